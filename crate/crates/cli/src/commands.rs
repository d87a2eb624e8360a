use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use normdyn::abm::{self, AbmConfig};
use normdyn::csvio::{self, NormRow, SpectrumRow};
use normdyn::games::chicken_warning;
use normdyn::norms::{classify_all, enumerate_norms, mixed_nash_chicken, Norm};
use normdyn::partisan::{self, Inference, PartisanConfig, Prior};
use normdyn::payoff::{build_gamma, chicken_gamma_closed_form, Strategy, NASH, SIGNAL_FOLLOWING};
use normdyn::replicator::{
    basin_sample, classify_stability, integrate, vertex_spectrum, IntegrateOptions, STABILITY_TOL,
};
use normdyn::sweep::{self, chicken_gamma, Axis, GridSpec};
use normdyn::{chicken_reward, signal_dist, JointDist2, SignalParams};

use crate::config::{Manifest, Meta, RunConfig};

/// Invalid user input; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Files written by one run, removed again if the run fails.
pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> normdyn::Result<()>,
    ) -> anyhow::Result<()> {
        let mut w = self.create(name)?;
        let path = self.dir.join(name);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }

    pub fn finish(mut self, command: &str, config: &RunConfig) -> anyhow::Result<()> {
        let manifest = Manifest {
            config: config.clone(),
            meta: Meta {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                outputs: self.names(),
            },
        };
        let text = manifest.to_toml()?;
        let mut w = self.create("manifest.toml")?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        self.written.clear();
        Ok(())
    }

    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> anyhow::Result<()> {
    if cond {
        Ok(())
    } else {
        Err(usage(msg()))
    }
}

/// Range checks shared by the chicken-based subcommands.
pub fn validate_game(c: &RunConfig) -> anyhow::Result<()> {
    check(c.big_b > 1.0, || format!("--B must exceed 1, got {}", c.big_b))?;
    check(c.l > 0.0, || format!("--L must be positive, got {}", c.l))?;
    check((0.0..=1.0).contains(&c.b), || format!("--b must lie in [0,1], got {}", c.b))?;
    check((0.0..=1.0).contains(&c.g), || format!("--g must lie in [0,1], got {}", c.g))?;
    check(c.b >= c.g, || format!("positivity: need b >= g, got b={} g={}", c.b, c.g))
}

fn validate_integration(c: &RunConfig) -> anyhow::Result<()> {
    check(c.dt > 0.0 && c.dt.is_finite(), || format!("--dt must be positive, got {}", c.dt))?;
    check(c.t_end >= 0.0 && c.t_end.is_finite(), || {
        format!("--t-end must be nonnegative, got {}", c.t_end)
    })
}

fn device(c: &RunConfig) -> anyhow::Result<JointDist2> {
    Ok(signal_dist(SignalParams::new(c.b, c.g)?))
}

fn warn_condition3(c: &RunConfig) {
    if let Some(w) = chicken_warning(c.big_b, c.l) {
        eprintln!("warning: {w}");
    }
}

pub fn classify(c: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    validate_game(c)?;
    warn_condition3(c);
    let j = device(c)?;
    let r = chicken_reward(c.big_b, c.l)?;
    let nash = mixed_nash_chicken(c.big_b, c.l)?;
    let gamma = build_gamma(&Strategy::chicken_set(&nash), &j, &r, &nash)?;
    let norms = enumerate_norms(2, 2);
    let classes = classify_all(&norms, &j, &r, &gamma);
    let rows: Vec<NormRow> = norms
        .iter()
        .zip(&classes)
        .map(|(n, cl)| NormRow::new(n, *cl))
        .collect();
    out.write_with("classify.csv", |w| csvio::write_norm_table(w, &rows))?;

    let count = |f: fn(&normdyn::NormClass) -> bool| classes.iter().filter(|c| f(c)).count();
    println!("norms: {}", norms.len());
    println!("rational: {}", count(|c| c.rational));
    println!("null: {}", count(|c| c.null));
    println!("empirically validatable: {}", count(|c| c.empirically_validatable));
    println!("consistent: {}", count(|c| c.consistent));
    println!("inconsistent: {}", count(|c| c.inconsistent));
    println!("evolutionarily stable: {}", count(|c| c.evolutionarily_stable));
    println!("best response: {}", count(|c| c.best_response));
    println!(
        "hierarchy coherent: {}",
        classes.iter().all(normdyn::NormClass::is_coherent)
    );
    Ok(())
}

pub fn gamma(c: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    validate_game(c)?;
    warn_condition3(c);
    let numeric = chicken_gamma(c.b, c.g, c.l, c.big_b)?;
    out.write_with("gamma_numeric.csv", |w| csvio::write_gamma(w, &numeric))?;
    if c.big_b == 3.0 && c.g == 0.0 {
        let closed = chicken_gamma_closed_form(c.b, c.l);
        out.write_with("gamma_closed_form.csv", |w| csvio::write_gamma(w, &closed))?;
        println!("max |numeric - closed form|: {:e}", numeric.max_abs_diff(&closed)?);
    } else {
        println!("closed form defined only for B=3, g=0; skipped");
    }
    let col0 = (0..numeric.len())
        .map(|i| (numeric.get(i, NASH) - numeric.get(NASH, NASH)).abs())
        .fold(0.0, f64::max);
    println!("column 0 constant: {}", col0 <= 1e-12);
    let nash = mixed_nash_chicken(c.big_b, c.l)?;
    let ratio = numeric.get(SIGNAL_FOLLOWING, SIGNAL_FOLLOWING) / nash.rho;
    println!("nash reward: {}", nash.rho);
    println!("gamma_22 / nash reward: {ratio:.4}");
    Ok(())
}

pub fn simulate(c: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    validate_game(c)?;
    validate_integration(c)?;
    check(c.samples >= 1, || "--samples must be at least 1".into())?;
    warn_condition3(c);
    let gamma = chicken_gamma(c.b, c.g, c.l, c.big_b)?;
    let opts = IntegrateOptions {
        dt: c.dt,
        t_end: c.t_end,
        record_every: c.record_every,
        ..Default::default()
    };
    let table = basin_sample(&gamma, c.samples, c.seed, &opts)?;
    out.write_with("basin.csv", |w| csvio::write_basin(w, &table))?;

    let spectra: Vec<SpectrumRow> = (0..gamma.len())
        .map(|v| {
            let s = vertex_spectrum(v, &gamma)?;
            Ok(SpectrumRow {
                b: c.b,
                l: c.l,
                vertex: v,
                class: classify_stability(&s, STABILITY_TOL),
                spectrum: s,
            })
        })
        .collect::<normdyn::Result<_>>()?;
    out.write_with("spectra.csv", |w| csvio::write_spectra(w, &spectra))?;

    let traj = integrate(&table.starts[0], &gamma, &opts)?;
    out.write_with("trajectory.csv", |w| csvio::write_trajectory(w, &traj))?;

    for (v, label) in gamma.labels().iter().enumerate() {
        println!(
            "vertex {v} ({label}): share {:.3}, lambda_max {:.6}, {}",
            table.share(v),
            spectra[v].spectrum.lambda_max_real,
            spectra[v].class
        );
    }
    println!("mixed: share {:.3}", table.mixed_share());
    Ok(())
}

pub fn sweep(c: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    check(c.grid >= 2, || format!("--grid must be at least 2, got {}", c.grid))?;
    check(c.big_b > 1.0, || format!("--B must exceed 1, got {}", c.big_b))?;
    check((0.0..=1.0).contains(&c.g), || format!("--g must lie in [0,1], got {}", c.g))?;
    let grid = GridSpec {
        g: c.g,
        big_b: c.big_b,
        ..GridSpec::with_resolution(c.grid)
    };
    let rat = sweep::rationality_map(&grid)?;
    out.write_with("rationality.csv", |w| csvio::write_sweep(w, &rat))?;
    let ratio = sweep::reward_ratio_map(&grid)?;
    out.write_with("reward_ratio.csv", |w| csvio::write_sweep(w, &ratio))?;
    let stab = sweep::stability_map(&grid)?;
    out.write_with("stability.csv", |w| csvio::write_sweep(w, &stab.to_table()))?;
    let axis = Axis::closed(0.0, 1.0, c.grid);
    let mi = sweep::mi_map(&axis, &axis)?;
    out.write_with("mi.csv", |w| csvio::write_sweep(w, &mi))?;
    println!("cells per map: {}", grid.b.n * grid.l.n);
    println!("stability transitions: {}", stab.transitions.len());
    Ok(())
}

fn selected_norms(ids: &[usize]) -> anyhow::Result<Vec<Norm>> {
    let all = enumerate_norms(2, 2);
    check(!ids.is_empty(), || "--norms must name at least one norm".into())?;
    ids.iter()
        .map(|&i| {
            all.get(i)
                .cloned()
                .ok_or_else(|| usage(format!("norm id {i} out of 0..{}", all.len())))
        })
        .collect()
}

pub fn abm_run(c: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    validate_game(c)?;
    check(c.beta >= 0.0, || format!("--beta must be >= 0, got {}", c.beta))?;
    check(c.n_agents >= 2 && c.n_agents.is_multiple_of(2), || {
        format!("--N must be even and at least 2, got {}", c.n_agents)
    })?;
    let norms = selected_norms(&c.norms)?;
    let initial = if c.initial.is_empty() {
        vec![1.0 / norms.len() as f64; norms.len()]
    } else {
        c.initial.clone()
    };
    check(initial.len() == norms.len(), || {
        format!("{} initial frequencies for {} norms", initial.len(), norms.len())
    })?;
    let cfg = AbmConfig {
        n_agents: c.n_agents,
        rounds: c.rounds,
        beta: c.beta,
        initial,
        j0: device(c)?,
        env: abm::Environment {
            norms,
            reward: chicken_reward(c.big_b, c.l)?,
            nash: mixed_nash_chicken(c.big_b, c.l)?,
        },
        seed: c.seed,
    };
    let run = abm::run(&cfg)?;
    out.write_with("abm.csv", |w| csvio::write_abm(w, &run))?;
    let fin = run.final_population.frequencies();
    for (id, f) in c.norms.iter().zip(&fin) {
        println!("norm {id}: final frequency {f}");
    }
    Ok(())
}

fn parse_inference(s: &str) -> anyhow::Result<Inference> {
    match s {
        "full" => Ok(Inference::Full),
        "partial-non-overlapping" => Ok(Inference::Partial(Prior::NonOverlapping)),
        "partial-uninformative" => Ok(Inference::Partial(Prior::Uninformative)),
        _ => bail!(usage(format!(
            "--inference must be full, partial-non-overlapping or partial-uninformative, got {s:?}"
        ))),
    }
}

pub fn partisan_demo(c: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    validate_game(c)?;
    check(c.n_agents >= 2 && c.n_agents.is_multiple_of(2), || {
        format!("--N must be even and at least 2, got {}", c.n_agents)
    })?;
    check(c.dim >= 1, || "--dim must be at least 1".into())?;
    check(c.polarization.is_finite(), || "--polarization must be finite".into())?;
    let cfg = PartisanConfig {
        n_per_population: c.n_agents / 2,
        dim: c.dim,
        polarization: c.polarization,
        rounds: c.rounds,
        big_b: c.big_b,
        l: c.l,
        j0: device(c)?,
        inference: parse_inference(&c.inference)?,
        seed: c.seed,
    };
    let rounds = partisan::demo(&cfg)?;
    out.write_with("partisan.csv", |w| csvio::write_partisan(w, &rounds))?;
    if let Some(last) = rounds.last() {
        println!(
            "final round: within {:.3}, cross {:.3}, cross pairs read as out-group {:.3}",
            last.within_coop, last.cross_coop, last.cross_xi0
        );
    }
    Ok(())
}
