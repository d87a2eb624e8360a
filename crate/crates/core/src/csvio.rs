//! CSV writers and matching readers for every table the crate produces.
//! Floats are written in Rust's shortest round-trip form, so a write/read
//! cycle is exact.

use std::io::{Read, Write};

use nalgebra::{Complex, DMatrix};

use crate::abm::{AbmRun, RoundRecord};
use crate::error::{Error, Result};
use crate::norms::{Norm, NormClass};
use crate::partisan::PartisanRound;
use crate::payoff::PayoffMatrix;
use crate::replicator::{BasinTable, Spectrum, Stability, TerminalLabel, Trajectory};
use crate::sweep::{SweepRecord, SweepTable};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(r)
}

fn f(v: f64) -> String {
    v.to_string()
}

fn parse_f(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn parse_u(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not an integer: {s:?}")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Parse(format!("not a boolean: {s:?}"))),
    }
}

fn field(rec: &csv::StringRecord, i: usize) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| Error::Parse(format!("missing column {i} in {rec:?}")))
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Square matrix with a leading label column: `label,<labels...>`.
pub fn write_gamma<W: Write>(w: W, gamma: &PayoffMatrix) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["label".to_string()];
    header.extend(gamma.labels().iter().cloned());
    out.write_record(&header)?;
    for (i, label) in gamma.labels().iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..gamma.len()).map(|j| f(gamma.get(i, j))));
        out.write_record(&row)?;
    }
    flush(out)
}

pub fn read_gamma<R: Read>(r: R) -> Result<PayoffMatrix> {
    let mut rd = reader(r);
    let labels: Vec<String> = rd.headers()?.iter().skip(1).map(String::from).collect();
    let n = labels.len();
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(Error::Shape(format!("row with {} fields, expected {}", rec.len(), n + 1)));
        }
        for j in 0..n {
            values.push(parse_f(field(&rec, j + 1)?)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Shape(format!("{rows} rows for {n} columns")));
    }
    PayoffMatrix::from_matrix(DMatrix::from_row_slice(n, n, &values))?.with_labels(labels)
}

/// Plain numeric matrix with header `c0,c1,...`.
pub fn write_matrix<W: Write>(w: W, m: &DMatrix<f64>) -> Result<()> {
    let mut out = writer(w);
    out.write_record((0..m.ncols()).map(|j| format!("c{j}")))?;
    for row in m.row_iter() {
        out.write_record(row.iter().map(|v| f(*v)))?;
    }
    flush(out)
}

pub fn read_matrix<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rd = reader(r);
    let ncols = rd.headers()?.len();
    let mut values = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != ncols {
            return Err(Error::Shape("ragged matrix".into()));
        }
        for s in rec.iter() {
            values.push(parse_f(s)?);
        }
    }
    Ok(DMatrix::from_row_slice(values.len() / ncols.max(1), ncols, &values))
}

/// `t,x_0,...,x_{N-1}`.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = writer(w);
    let dim = traj.states.first().map_or(0, |s| s.dim());
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    out.write_record(&header)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![f(*t)];
        row.extend(s.as_vector().iter().map(|v| f(*v)));
        out.write_record(&row)?;
    }
    flush(out)
}

/// Times and raw state rows of a trajectory file.
pub fn read_trajectory<R: Read>(r: R) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut rd = reader(r);
    let mut times = Vec::new();
    let mut states = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        times.push(parse_f(field(&rec, 0)?)?);
        states.push(rec.iter().skip(1).map(parse_f).collect::<Result<Vec<_>>>()?);
    }
    Ok((times, states))
}

/// One spectrum row per `(b, L, vertex)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub b: f64,
    pub l: f64,
    pub vertex: usize,
    pub spectrum: Spectrum,
    pub class: Stability,
}

/// `b,L,vertex,re_1,im_1,...,re_N,im_N,lambda_max,class`.
pub fn write_spectra<W: Write>(w: W, rows: &[SpectrumRow]) -> Result<()> {
    let mut out = writer(w);
    let n = rows.first().map_or(0, |r| r.spectrum.eigenvalues.len());
    let mut header: Vec<String> = vec!["b".into(), "L".into(), "vertex".into()];
    for k in 1..=n {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    header.push("lambda_max".into());
    header.push("class".into());
    out.write_record(&header)?;
    for r in rows {
        if r.spectrum.eigenvalues.len() != n {
            return Err(Error::Shape("spectra of different sizes".into()));
        }
        let mut row = vec![f(r.b), f(r.l), r.vertex.to_string()];
        for z in &r.spectrum.eigenvalues {
            row.push(f(z.re));
            row.push(f(z.im));
        }
        row.push(f(r.spectrum.lambda_max_real));
        row.push(r.class.to_string());
        out.write_record(&row)?;
    }
    flush(out)
}

fn parse_stability(s: &str) -> Result<Stability> {
    match s {
        "stable" => Ok(Stability::Stable),
        "neutral" => Ok(Stability::Neutral),
        "unstable" => Ok(Stability::Unstable),
        _ => Err(Error::Parse(format!("unknown stability class {s:?}"))),
    }
}

pub fn read_spectra<R: Read>(r: R) -> Result<Vec<SpectrumRow>> {
    let mut rd = reader(r);
    let n = (rd.headers()?.len().saturating_sub(5)) / 2;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let eig = (0..n)
            .map(|k| {
                Ok(Complex::new(
                    parse_f(field(&rec, 3 + 2 * k)?)?,
                    parse_f(field(&rec, 4 + 2 * k)?)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(SpectrumRow {
            b: parse_f(field(&rec, 0)?)?,
            l: parse_f(field(&rec, 1)?)?,
            vertex: parse_u(field(&rec, 2)?)?,
            spectrum: Spectrum::new(eig),
            class: parse_stability(field(&rec, 3 + 2 * n + 1)?)?,
        });
    }
    Ok(rows)
}

/// Long format `b,<y>,quantity,value,label`.
pub fn write_sweep<W: Write>(w: W, table: &SweepTable) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["b", table.y_name.as_str(), "quantity", "value", "label"])?;
    for r in &table.records {
        out.write_record([f(r.b), f(r.y), r.quantity.clone(), f(r.value), r.label.clone()])?;
    }
    flush(out)
}

pub fn read_sweep<R: Read>(r: R) -> Result<SweepTable> {
    let mut rd = reader(r);
    let y_name = rd
        .headers()?
        .get(1)
        .ok_or_else(|| Error::Parse("sweep header too short".into()))?
        .to_string();
    let mut records = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        records.push(SweepRecord {
            b: parse_f(field(&rec, 0)?)?,
            y: parse_f(field(&rec, 1)?)?,
            quantity: field(&rec, 2)?.to_string(),
            value: parse_f(field(&rec, 3)?)?,
            label: field(&rec, 4)?.to_string(),
        });
    }
    Ok(SweepTable { y_name, records })
}

/// One classified norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub id: usize,
    pub prescription: String,
    pub description: String,
    pub class: NormClass,
}

impl NormRow {
    pub fn new(norm: &Norm, class: NormClass) -> Self {
        Self {
            id: norm.id,
            prescription: norm.prescription.bits(),
            description: norm.description.bits(),
            class,
        }
    }
}

const NORM_HEADER: [&str; 11] = [
    "id",
    "prescription",
    "description",
    "rational",
    "null",
    "empirically_validatable",
    "consistent",
    "inconsistent",
    "evolutionarily_stable",
    "best_response",
    "class",
];

pub fn write_norm_table<W: Write>(w: W, rows: &[NormRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(NORM_HEADER)?;
    for r in rows {
        let c = &r.class;
        out.write_record([
            r.id.to_string(),
            r.prescription.clone(),
            r.description.clone(),
            c.rational.to_string(),
            c.null.to_string(),
            c.empirically_validatable.to_string(),
            c.consistent.to_string(),
            c.inconsistent.to_string(),
            c.evolutionarily_stable.to_string(),
            c.best_response.to_string(),
            c.strongest().to_string(),
        ])?;
    }
    flush(out)
}

pub fn read_norm_table<R: Read>(r: R) -> Result<Vec<NormRow>> {
    let mut rd = reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let b = |i| parse_bool(field(&rec, i)?);
        rows.push(NormRow {
            id: parse_u(field(&rec, 0)?)?,
            prescription: field(&rec, 1)?.to_string(),
            description: field(&rec, 2)?.to_string(),
            class: NormClass {
                rational: b(3)?,
                null: b(4)?,
                empirically_validatable: b(5)?,
                consistent: b(6)?,
                inconsistent: b(7)?,
                evolutionarily_stable: b(8)?,
                best_response: b(9)?,
            },
        });
    }
    Ok(rows)
}

fn parse_terminal(s: &str) -> Result<TerminalLabel> {
    if s == "mixed" {
        return Ok(TerminalLabel::Mixed);
    }
    s.strip_prefix("vertex-")
        .and_then(|n| n.parse().ok())
        .map(TerminalLabel::Vertex)
        .ok_or_else(|| Error::Parse(format!("unknown terminal label {s:?}")))
}

/// `sample,terminal,x0_0,...`: one row per start.
pub fn write_basin<W: Write>(w: W, table: &BasinTable) -> Result<()> {
    let mut out = writer(w);
    let dim = table.starts.first().map_or(0, |s| s.dim());
    let mut header = vec!["sample".to_string(), "terminal".to_string()];
    header.extend((0..dim).map(|i| format!("x0_{i}")));
    out.write_record(&header)?;
    for (i, (l, s)) in table.labels.iter().zip(&table.starts).enumerate() {
        let mut row = vec![i.to_string(), l.to_string()];
        row.extend(s.as_vector().iter().map(|v| f(*v)));
        out.write_record(&row)?;
    }
    flush(out)
}

/// Terminal labels and starting points of a basin file.
pub fn read_basin<R: Read>(r: R) -> Result<Vec<(TerminalLabel, Vec<f64>)>> {
    let mut rd = reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let label = parse_terminal(field(&rec, 1)?)?;
        let x = rec.iter().skip(2).map(parse_f).collect::<Result<Vec<_>>>()?;
        rows.push((label, x));
    }
    Ok(rows)
}

/// `round,freq_*,gamma_emp_n_m,gamma_exp_n_m,est_n_m_ij,nash_fallbacks,mean_payoff`.
/// Round `-1` holds the initial frequencies with NaN elsewhere.
pub fn write_abm<W: Write>(w: W, run: &AbmRun) -> Result<()> {
    let mut out = writer(w);
    let k = run.initial_frequencies.len();
    let mut header = vec!["round".to_string()];
    header.extend((0..k).map(|n| format!("freq_{n}")));
    for prefix in ["gamma_emp", "gamma_exp"] {
        for n in 0..k {
            for m in 0..k {
                header.push(format!("{prefix}_{n}_{m}"));
            }
        }
    }
    for n in 0..k {
        for m in 0..k {
            for ij in ["00", "01", "10", "11"] {
                header.push(format!("est_{n}_{m}_{ij}"));
            }
        }
    }
    header.push("nash_fallbacks".into());
    header.push("mean_payoff".into());
    out.write_record(&header)?;

    let nan_tail = 2 * k * k + 4 * k * k;
    let mut first = vec!["-1".to_string()];
    first.extend(run.initial_frequencies.iter().map(|v| f(*v)));
    first.extend(std::iter::repeat_n(f(f64::NAN), nan_tail));
    first.push("0".into());
    first.push(f(f64::NAN));
    out.write_record(&first)?;

    for r in &run.rounds {
        let mut row = vec![r.round.to_string()];
        row.extend(r.frequencies.iter().map(|v| f(*v)));
        // row-major over (n, m)
        row.extend(r.gamma_empirical.transpose().iter().map(|v| f(*v)));
        row.extend(r.gamma_expected.transpose().iter().map(|v| f(*v)));
        row.extend(r.estimates.iter().map(|v| f(*v)));
        row.push(r.nash_fallbacks.to_string());
        row.push(f(r.mean_payoff));
        out.write_record(&row)?;
    }
    flush(out)
}

/// Initial frequencies and per-round records of an ABM file.
pub fn read_abm<R: Read>(r: R) -> Result<(Vec<f64>, Vec<RoundRecord>)> {
    let mut rd = reader(r);
    let k = rd
        .headers()?
        .iter()
        .filter(|h| h.starts_with("freq_"))
        .count();
    let mut initial = Vec::new();
    let mut rounds = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let vals = |from: usize, len: usize| -> Result<Vec<f64>> {
            (from..from + len).map(|i| parse_f(field(&rec, i)?)).collect()
        };
        let freqs = vals(1, k)?;
        if field(&rec, 0)? == "-1" {
            initial = freqs;
            continue;
        }
        let ge = vals(1 + k, k * k)?;
        let gx = vals(1 + k + k * k, k * k)?;
        let est = vals(1 + k + 2 * k * k, 4 * k * k)?;
        let tail = 1 + k + 6 * k * k;
        rounds.push(RoundRecord {
            round: parse_u(field(&rec, 0)?)?,
            frequencies: freqs,
            gamma_empirical: DMatrix::from_row_slice(k, k, &ge),
            gamma_expected: DMatrix::from_row_slice(k, k, &gx),
            estimates: est,
            nash_fallbacks: parse_u(field(&rec, tail)?)?,
            mean_payoff: parse_f(field(&rec, tail + 1)?)?,
        });
    }
    Ok((initial, rounds))
}

pub fn write_partisan<W: Write>(w: W, rounds: &[PartisanRound]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["round", "within_coop", "cross_coop", "cross_xi0", "nash_fallbacks"])?;
    for r in rounds {
        out.write_record([
            r.round.to_string(),
            f(r.within_coop),
            f(r.cross_coop),
            f(r.cross_xi0),
            r.nash_fallbacks.to_string(),
        ])?;
    }
    flush(out)
}

pub fn read_partisan<R: Read>(r: R) -> Result<Vec<PartisanRound>> {
    let mut rd = reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        rows.push(PartisanRound {
            round: parse_u(field(&rec, 0)?)?,
            within_coop: parse_f(field(&rec, 1)?)?,
            cross_coop: parse_f(field(&rec, 2)?)?,
            cross_xi0: parse_f(field(&rec, 3)?)?,
            nash_fallbacks: parse_u(field(&rec, 4)?)?,
        });
    }
    Ok(rows)
}
