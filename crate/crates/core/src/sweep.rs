//! Parameter sweeps over the signal parameter `b` and a second axis (`L` or
//! `g`), emitted as long-format records.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::chicken_reward;
use crate::norms::{
    avg_reward, is_rational, mixed_nash_chicken, rationality_region, ConstraintState, Norm,
    Policy, RationalityRegion,
};
use crate::payoff::{build_gamma, PayoffMatrix, Strategy};
use crate::probkit::{mutual_information, signal_dist, SignalParams};
use crate::replicator::{classify_stability, vertex_spectrum, Stability, STABILITY_TOL};

/// Evenly spaced axis. With `open_min` the lower end is excluded and the
/// `n` points are `min + (max − min)·k/n`, `k = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    #[serde(default)]
    pub open_min: bool,
}

impl Axis {
    pub fn closed(min: f64, max: f64, n: usize) -> Self {
        Self {
            min,
            max,
            n,
            open_min: false,
        }
    }

    pub fn open_min(min: f64, max: f64, n: usize) -> Self {
        Self {
            min,
            max,
            n,
            open_min: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Parameter(format!("axis resolution {} < 2", self.n)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::Parameter(format!(
                "empty axis range [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.max - self.min;
        if self.open_min {
            (1..=self.n)
                .map(|k| self.min + span * k as f64 / self.n as f64)
                .collect()
        } else {
            (0..self.n)
                .map(|k| self.min + span * k as f64 / (self.n - 1) as f64)
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub b: Axis,
    pub l: Axis,
    pub g: f64,
    pub big_b: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::with_resolution(200)
    }
}

impl GridSpec {
    /// `b ∈ [0, 1]`, `L ∈ (0, 2.5]`, `g = 0`, `B = 3`.
    pub fn with_resolution(n: usize) -> Self {
        Self {
            b: Axis::closed(0.0, 1.0, n),
            l: Axis::open_min(0.0, 2.5, n),
            g: 0.0,
            big_b: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.b.validate()?;
        self.l.validate()?;
        if self.l.min < 0.0 || (self.l.min == 0.0 && !self.l.open_min) {
            return Err(Error::Parameter("L axis must lie in (0, ∞)".into()));
        }
        if !(0.0..=1.0).contains(&self.g) {
            return Err(Error::Parameter(format!("g={} outside [0,1]", self.g)));
        }
        if !(self.big_b > 1.0) {
            return Err(Error::Parameter(format!("B={} must exceed 1", self.big_b)));
        }
        Ok(())
    }

    /// Cells in row-major order over `(L, b)`: all `b` for the first `L`,
    /// then the next `L`.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let bs = self.b.values();
        self.l
            .values()
            .into_iter()
            .flat_map(|l| bs.iter().map(move |&b| (b, l)))
            .collect()
    }
}

/// One long-format output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub b: f64,
    /// `L` or `g`, as named by the owning table.
    pub y: f64,
    pub quantity: String,
    pub value: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Name of the second axis, `"L"` or `"g"`.
    pub y_name: String,
    pub records: Vec<SweepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    Valid,
    RedViolated,
    GreenViolated,
    PositivityViolated,
    Condition3Violated,
    Marginal,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Valid => "valid",
            RegionLabel::RedViolated => "red-violated",
            RegionLabel::GreenViolated => "green-violated",
            RegionLabel::PositivityViolated => "positivity-violated",
            RegionLabel::Condition3Violated => "condition-3-violated",
            RegionLabel::Marginal => "marginal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            RegionLabel::Valid,
            RegionLabel::RedViolated,
            RegionLabel::GreenViolated,
            RegionLabel::PositivityViolated,
            RegionLabel::Condition3Violated,
            RegionLabel::Marginal,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub b: f64,
    pub l: f64,
    pub label: RegionLabel,
    pub region: RationalityRegion,
}

impl RegionCell {
    /// Rationality of the signal-following norm from the closed-form
    /// inequalities; `None` on a boundary or where the device is undefined.
    pub fn closed_form_rational(&self) -> Option<bool> {
        if self.region.is_marginal() || self.region.positivity != ConstraintState::Ok {
            return None;
        }
        Some(self.region.green_ok() && self.region.red_ok())
    }
}

/// Label priority: positivity, condition 3, red, green, marginal, valid.
pub fn region_label(b: f64, g: f64, l: f64, big_b: f64) -> Result<RegionCell> {
    let region = rationality_region(b, g, l)?;
    let label = if region.positivity != ConstraintState::Ok {
        RegionLabel::PositivityViolated
    } else if l >= big_b - 1.0 {
        RegionLabel::Condition3Violated
    } else if region.red == ConstraintState::Violated {
        RegionLabel::RedViolated
    } else if region.green == ConstraintState::Violated {
        RegionLabel::GreenViolated
    } else if region.is_marginal() {
        RegionLabel::Marginal
    } else {
        RegionLabel::Valid
    };
    Ok(RegionCell { b, l, label, region })
}

pub fn rationality_cells(grid: &GridSpec) -> Result<Vec<RegionCell>> {
    grid.validate()?;
    grid.cells()
        .into_par_iter()
        .map(|(b, l)| region_label(b, grid.g, l, grid.big_b))
        .collect()
}

pub fn rationality_map(grid: &GridSpec) -> Result<SweepTable> {
    let records = rationality_cells(grid)?
        .into_iter()
        .map(|c| SweepRecord {
            b: c.b,
            y: c.l,
            quantity: "region".into(),
            value: c.closed_form_rational().map_or(f64::NAN, |r| r as u8 as f64),
            label: c.label.to_string(),
        })
        .collect();
    Ok(SweepTable {
        y_name: "L".into(),
        records,
    })
}

/// Per-observation best-response check of the signal-following norm on
/// `signal_dist(b, g)` in chicken `(B, L)`; `None` if `b < g`.
pub fn brute_force_rational(b: f64, g: f64, l: f64, big_b: f64) -> Result<Option<bool>> {
    let Ok(params) = SignalParams::new(b, g) else {
        return Ok(None);
    };
    let j = signal_dist(params);
    let r = chicken_reward(big_b, l)?;
    let sf = Policy::signal_following();
    let n = Norm::new(5, sf.clone(), sf)?;
    Ok(Some(is_rational(&n, &j, &r)))
}

/// `ρ(sf, sf)/ρ_Nash`. The label is the rationality label of the cell.
pub fn reward_ratio(b: f64, g: f64, l: f64, big_b: f64) -> Result<(f64, RegionLabel)> {
    let label = region_label(b, g, l, big_b)?.label;
    let Ok(params) = SignalParams::new(b, g) else {
        return Ok((f64::NAN, label));
    };
    let j = signal_dist(params);
    let r = chicken_reward(big_b, l)?;
    let nash = mixed_nash_chicken(big_b, l)?;
    let sf = Policy::signal_following();
    Ok((avg_reward(&sf, &sf, &j, &r)? / nash.rho, label))
}

pub fn reward_ratio_map(grid: &GridSpec) -> Result<SweepTable> {
    grid.validate()?;
    let records = grid
        .cells()
        .into_par_iter()
        .map(|(b, l)| {
            let (value, label) = reward_ratio(b, grid.g, l, grid.big_b)?;
            Ok(SweepRecord {
                b,
                y: l,
                quantity: "reward_ratio".into(),
                value,
                label: label.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        y_name: "L".into(),
        records,
    })
}

/// Γ over the four chicken strategies at one cell.
pub fn chicken_gamma(b: f64, g: f64, l: f64, big_b: f64) -> Result<PayoffMatrix> {
    let j = signal_dist(SignalParams::new(b, g)?);
    let r = chicken_reward(big_b, l)?;
    let nash = mixed_nash_chicken(big_b, l)?;
    build_gamma(&Strategy::chicken_set(&nash), &j, &r, &nash)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCell {
    pub b: f64,
    pub l: f64,
    pub lambda_max: Vec<f64>,
    pub class: Vec<Stability>,
}

/// A stable/unstable change of a vertex along `b` at fixed `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub vertex: usize,
    pub l: f64,
    /// Linear interpolation of the zero crossing of `λ_max`.
    pub b: f64,
    pub from: Stability,
    pub to: Stability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub cells: Vec<StabilityCell>,
    pub transitions: Vec<Transition>,
}

impl StabilityMap {
    pub fn to_table(&self) -> SweepTable {
        let mut records = Vec::new();
        for c in &self.cells {
            for (n, (lm, cl)) in c.lambda_max.iter().zip(&c.class).enumerate() {
                records.push(SweepRecord {
                    b: c.b,
                    y: c.l,
                    quantity: format!("lambda_max_v{n}"),
                    value: *lm,
                    label: cl.to_string(),
                });
            }
        }
        for t in &self.transitions {
            records.push(SweepRecord {
                b: t.b,
                y: t.l,
                quantity: format!("transition_v{}", t.vertex),
                value: t.b,
                label: format!("{}->{}", t.from, t.to),
            });
        }
        SweepTable {
            y_name: "L".into(),
            records,
        }
    }
}

fn sign(s: Stability) -> i8 {
    match s {
        Stability::Stable => -1,
        Stability::Neutral => 0,
        Stability::Unstable => 1,
    }
}

pub fn stability_map(grid: &GridSpec) -> Result<StabilityMap> {
    grid.validate()?;
    let cells: Vec<StabilityCell> = grid
        .cells()
        .into_par_iter()
        .map(|(b, l)| {
            if b < grid.g {
                return Ok(StabilityCell {
                    b,
                    l,
                    lambda_max: vec![f64::NAN; 4],
                    class: vec![Stability::Neutral; 4],
                });
            }
            let gamma = chicken_gamma(b, grid.g, l, grid.big_b)?;
            let mut lambda_max = Vec::with_capacity(4);
            let mut class = Vec::with_capacity(4);
            for n in 0..gamma.len() {
                let s = vertex_spectrum(n, &gamma)?;
                class.push(classify_stability(&s, STABILITY_TOL));
                lambda_max.push(s.lambda_max_real);
            }
            Ok(StabilityCell {
                b,
                l,
                lambda_max,
                class,
            })
        })
        .collect::<Result<_>>()?;

    let nb = grid.b.n;
    let mut transitions = Vec::new();
    for column in cells.chunks(nb) {
        for v in 0..4 {
            for w in column.windows(2) {
                let (c0, c1) = (&w[0], &w[1]);
                if sign(c0.class[v]) * sign(c1.class[v]) < 0 {
                    let (y0, y1) = (c0.lambda_max[v], c1.lambda_max[v]);
                    let b = c0.b + (c1.b - c0.b) * y0 / (y0 - y1);
                    transitions.push(Transition {
                        vertex: v,
                        l: c0.l,
                        b,
                        from: c0.class[v],
                        to: c1.class[v],
                    });
                }
            }
        }
    }
    Ok(StabilityMap { cells, transitions })
}

/// Mutual information over `(b, g)`. Cells with `b < g` are labelled
/// `skipped` with a NaN value.
pub fn mi_map(b_axis: &Axis, g_axis: &Axis) -> Result<SweepTable> {
    b_axis.validate()?;
    g_axis.validate()?;
    let bs = b_axis.values();
    let cells: Vec<(f64, f64)> = g_axis
        .values()
        .into_iter()
        .flat_map(|g| bs.iter().map(move |&b| (b, g)))
        .collect();
    let records = cells
        .into_par_iter()
        .map(|(b, g)| match SignalParams::new(b, g) {
            Ok(p) => SweepRecord {
                b,
                y: g,
                quantity: "mutual_information".into(),
                value: mutual_information(&signal_dist(p)),
                label: "evaluated".into(),
            },
            Err(_) => SweepRecord {
                b,
                y: g,
                quantity: "mutual_information".into(),
                value: f64::NAN,
                label: "skipped".into(),
            },
        })
        .collect();
    Ok(SweepTable {
        y_name: "g".into(),
        records,
    })
}
