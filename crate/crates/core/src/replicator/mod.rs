//! Replicator dynamics `ẋ = diag(x)(Γx − (xᵀΓx)1)` on the probability simplex.

mod eigen;

pub use eigen::{eigenvalues, spectrum_distance, MAX_DIM};

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::payoff::PayoffMatrix;
use crate::seeding::stream_rng;

/// Simplex normalization tolerance.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Negative components down to this value are clipped after a step; below it
/// the integration aborts.
pub const CLIP_TOL: f64 = 1e-12;
/// A state is converged to vertex `n` once `x_n > 1 − VERTEX_TOL`.
pub const VERTEX_TOL: f64 = 1e-6;
/// Within this distance of a vertex a state still moving toward it is
/// counted as attracted by it.
pub const APPROACH_TOL: f64 = 1e-2;
/// Default tolerance of [`classify_stability`].
pub const STABILITY_TOL: f64 = 1e-9;

/// A frequency vector: nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexState(DVector<f64>);

impl SimplexState {
    pub fn new(x: DVector<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Shape("empty state".into()));
        }
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::SimplexEscape("negative or non-finite component".into()));
        }
        let s = x.sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::SimplexEscape(format!("components sum to {s}")));
        }
        Ok(Self(x))
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(x))
    }

    /// The single-strategy state `ê_n`.
    pub fn vertex(n: usize, dim: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[n] = 1.0;
        Self(v)
    }

    pub fn uniform(dim: usize) -> Self {
        Self(DVector::from_element(dim, 1.0 / dim as f64))
    }

    /// Uniform sample from the simplex volume (normalized exponential
    /// spacings).
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        let e: DVector<f64> = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(Exp1));
        let s = e.sum();
        Self(e / s)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, n: usize) -> f64 {
        self.0[n]
    }
}

fn check_dim(x: &DVector<f64>, gamma: &PayoffMatrix) -> Result<()> {
    if x.len() != gamma.len() {
        return Err(Error::Shape(format!(
            "state of length {} vs {} strategies",
            x.len(),
            gamma.len()
        )));
    }
    Ok(())
}

/// Fitness deviations `Γx − (xᵀΓx)1`.
fn fitness_deviation(x: &DVector<f64>, gamma: &DMatrix<f64>) -> DVector<f64> {
    let f = gamma * x;
    let mean = x.dot(&f);
    f.add_scalar(-mean)
}

/// Replicator velocity. Defined for any vector, not only simplex points, so
/// that derivatives can be checked off the simplex.
pub fn flow(x: &DVector<f64>, gamma: &PayoffMatrix) -> Result<DVector<f64>> {
    check_dim(x, gamma)?;
    Ok(flow_unchecked(x, gamma.entries()))
}

fn flow_unchecked(x: &DVector<f64>, gamma: &DMatrix<f64>) -> DVector<f64> {
    x.component_mul(&fitness_deviation(x, gamma))
}

/// Pairwise-comparison dynamics
/// `ẋ_n = x_n·tanh(βΔf_n) − x_n·Σ_m x_m tanh(βΔf_m)`.
pub fn tanh_flow(x: &DVector<f64>, gamma: &PayoffMatrix, beta: f64) -> Result<DVector<f64>> {
    check_dim(x, gamma)?;
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    Ok(tanh_flow_unchecked(x, gamma.entries(), beta))
}

fn tanh_flow_unchecked(x: &DVector<f64>, gamma: &DMatrix<f64>, beta: f64) -> DVector<f64> {
    let t = fitness_deviation(x, gamma).map(|d| (beta * d).tanh());
    let drift = x.dot(&t);
    x.component_mul(&t.add_scalar(-drift))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dynamics {
    Linear,
    Tanh { beta: f64 },
}

impl Dynamics {
    fn velocity(&self, x: &DVector<f64>, gamma: &DMatrix<f64>) -> DVector<f64> {
        match *self {
            Dynamics::Linear => flow_unchecked(x, gamma),
            Dynamics::Tanh { beta } => tanh_flow_unchecked(x, gamma, beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub t_end: f64,
    pub dynamics: Dynamics,
    /// Store every k-th state (the final state is always stored). Zero keeps
    /// only the endpoints.
    pub record_every: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 500.0,
            dynamics: Dynamics::Linear,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalLabel {
    Vertex(usize),
    Mixed,
}

impl fmt::Display for TerminalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalLabel::Vertex(n) => write!(f, "vertex-{n}"),
            TerminalLabel::Mixed => f.write_str("mixed"),
        }
    }
}

/// Vertex `n` if `x_n > 1 − VERTEX_TOL`, or if `x_n > 1 − APPROACH_TOL` and
/// the flow still increases `x_n` (slow, non-exponential approach to a
/// marginally stable vertex); otherwise mixed.
pub fn terminal_label(x: &DVector<f64>, gamma: &PayoffMatrix) -> TerminalLabel {
    let (n, &xmax) = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    if xmax > 1.0 - VERTEX_TOL {
        return TerminalLabel::Vertex(n);
    }
    if xmax > 1.0 - APPROACH_TOL {
        let v = flow_unchecked(x, gamma.entries());
        if v[n] > 0.0 {
            return TerminalLabel::Vertex(n);
        }
    }
    TerminalLabel::Mixed
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SimplexState>,
    pub terminal: TerminalLabel,
    /// Smallest component seen before clipping.
    pub min_before_clip: f64,
    /// Largest `|Σx − 1|` seen before renormalizing.
    pub max_sum_error: f64,
}

impl Trajectory {
    pub fn last(&self) -> &SimplexState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn rk4_step(x: &DVector<f64>, gamma: &DMatrix<f64>, dt: f64, dyn_: Dynamics) -> DVector<f64> {
    let k1 = dyn_.velocity(x, gamma);
    let k2 = dyn_.velocity(&(x + &k1 * (dt / 2.0)), gamma);
    let k3 = dyn_.velocity(&(x + &k2 * (dt / 2.0)), gamma);
    let k4 = dyn_.velocity(&(x + &k3 * dt), gamma);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

struct Stepper<'a> {
    gamma: &'a DMatrix<f64>,
    dt: f64,
    dynamics: Dynamics,
    min_before_clip: f64,
    max_sum_error: f64,
}

impl Stepper<'_> {
    fn step(&mut self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let mut y = rk4_step(x, self.gamma, self.dt, self.dynamics);
        let min = y.min();
        self.min_before_clip = self.min_before_clip.min(min);
        self.max_sum_error = self.max_sum_error.max((y.sum() - 1.0).abs());
        if !min.is_finite() || min < -CLIP_TOL || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimplexEscape(format!(
                "component {min} at t={t:.4}; reduce dt"
            )));
        }
        y.apply(|v| *v = v.max(0.0));
        let s = y.sum();
        Ok(y / s)
    }
}

/// Fixed-step classical Runge–Kutta integration, clipping rounding-level
/// negatives and renormalizing after every step.
pub fn integrate(
    x0: &SimplexState,
    gamma: &PayoffMatrix,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    check_dim(x0.as_vector(), gamma)?;
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) {
        return Err(Error::Parameter(format!(
            "need dt > 0 and t_end >= 0, got dt={} t_end={}",
            opts.dt, opts.t_end
        )));
    }
    if let Dynamics::Tanh { beta } = opts.dynamics {
        if !(beta > 0.0) {
            return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
        }
    }
    let n_steps = (opts.t_end / opts.dt).round() as usize;
    let mut stepper = Stepper {
        gamma: gamma.entries(),
        dt: opts.dt,
        dynamics: opts.dynamics,
        min_before_clip: x0.as_vector().min(),
        max_sum_error: 0.0,
    };
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut x = x0.as_vector().clone();
    for i in 1..=n_steps {
        let t = i as f64 * opts.dt;
        x = stepper.step(&x, t)?;
        let keep = i == n_steps || (opts.record_every > 0 && i % opts.record_every == 0);
        if keep {
            times.push(t);
            states.push(SimplexState(x.clone()));
        }
    }
    Ok(Trajectory {
        times,
        terminal: terminal_label(&x, gamma),
        states,
        min_before_clip: stepper.min_before_clip,
        max_sum_error: stepper.max_sum_error,
    })
}

/// First time at which `1 − x_n` exceeds `radius`, i.e. the state leaves the
/// sup-norm ball of that radius around vertex `n`; `None` if it stays inside
/// up to `opts.t_end`.
pub fn vertex_exit_time(
    x0: &SimplexState,
    n: usize,
    radius: f64,
    gamma: &PayoffMatrix,
    opts: &IntegrateOptions,
) -> Result<Option<f64>> {
    check_dim(x0.as_vector(), gamma)?;
    let n_steps = (opts.t_end / opts.dt).round() as usize;
    let mut stepper = Stepper {
        gamma: gamma.entries(),
        dt: opts.dt,
        dynamics: opts.dynamics,
        min_before_clip: 0.0,
        max_sum_error: 0.0,
    };
    let mut x = x0.as_vector().clone();
    for i in 1..=n_steps {
        let t = i as f64 * opts.dt;
        x = stepper.step(&x, t)?;
        if 1.0 - x[n] > radius {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// `max_{n: x_n > 0} |(Γx)_n − xᵀΓx|`.
pub fn fixed_point_residual(x: &DVector<f64>, gamma: &PayoffMatrix) -> Result<f64> {
    check_dim(x, gamma)?;
    let d = fitness_deviation(x, gamma.entries());
    Ok(x.iter()
        .zip(d.iter())
        .filter(|(&xi, _)| xi > 0.0)
        .map(|(_, di)| di.abs())
        .fold(0.0, f64::max))
}

/// `diag(Γx − (xᵀΓx)1) + (diag(x) − xxᵀ)Γ − xxᵀΓᵀ`.
pub fn jacobian(x: &DVector<f64>, gamma: &PayoffMatrix) -> Result<DMatrix<f64>> {
    check_dim(x, gamma)?;
    let g = gamma.entries();
    let xxt = x * x.transpose();
    let j = DMatrix::from_diagonal(&fitness_deviation(x, g))
        + (DMatrix::from_diagonal(x) - &xxt) * g
        - &xxt * g.transpose();
    Ok(j)
}

/// Jacobian at `ê_n`: `diag(Γ_{·n} − Γ_nn·1) − ê_n Γ_{·n}ᵀ`.
pub fn jacobian_at_vertex(n: usize, gamma: &PayoffMatrix) -> Result<DMatrix<f64>> {
    let size = gamma.len();
    if n >= size {
        return Err(Error::Shape(format!("vertex {n} out of {size}")));
    }
    let g = gamma.entries();
    let col = g.column(n).into_owned();
    let mut j = DMatrix::from_diagonal(&col.add_scalar(-g[(n, n)]));
    for k in 0..size {
        j[(n, k)] -= col[k];
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex<f64>>,
    pub lambda_max_real: f64,
}

impl Spectrum {
    pub fn new(mut eigenvalues: Vec<Complex<f64>>) -> Self {
        eigen::sort_spectrum(&mut eigenvalues);
        let lambda_max_real = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            eigenvalues,
            lambda_max_real,
        }
    }
}

/// Closed-form spectrum at `ê_n`: `{Γ_in − Γ_nn : i ≠ n} ∪ {−Γ_nn}`.
pub fn vertex_spectrum(n: usize, gamma: &PayoffMatrix) -> Result<Spectrum> {
    let size = gamma.len();
    if n >= size {
        return Err(Error::Shape(format!("vertex {n} out of {size}")));
    }
    let g = gamma.entries();
    let ev = (0..size)
        .map(|i| {
            let re = if i == n { -g[(n, n)] } else { g[(i, n)] - g[(n, n)] };
            Complex::new(re, 0.0)
        })
        .collect();
    Ok(Spectrum::new(ev))
}

/// Numeric spectrum of [`jacobian_at_vertex`].
pub fn vertex_spectrum_numeric(n: usize, gamma: &PayoffMatrix) -> Result<Spectrum> {
    Ok(Spectrum::new(eigenvalues(&jacobian_at_vertex(n, gamma)?)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Neutral,
    Unstable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Neutral => "neutral",
            Stability::Unstable => "unstable",
        })
    }
}

pub fn classify_stability(s: &Spectrum, tol: f64) -> Stability {
    if s.lambda_max_real > tol {
        Stability::Unstable
    } else if s.lambda_max_real.abs() <= tol {
        Stability::Neutral
    } else {
        Stability::Stable
    }
}

/// Terminal-label tally from uniformly sampled starts.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinTable {
    /// Trajectories ending at each vertex.
    pub vertex_counts: Vec<usize>,
    pub mixed: usize,
    /// Per-sample labels in sample order.
    pub labels: Vec<TerminalLabel>,
    pub starts: Vec<SimplexState>,
}

impl BasinTable {
    pub fn total(&self) -> usize {
        self.labels.len()
    }

    pub fn share(&self, vertex: usize) -> f64 {
        self.vertex_counts[vertex] as f64 / self.total() as f64
    }

    pub fn mixed_share(&self) -> f64 {
        self.mixed as f64 / self.total() as f64
    }
}

/// Integrates `n_samples` uniformly drawn starts in parallel. Sample `i` uses
/// the RNG stream `(seed, i)`, so the table depends only on `seed`.
pub fn basin_sample(
    gamma: &PayoffMatrix,
    n_samples: usize,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<BasinTable> {
    if n_samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let dim = gamma.len();
    let opts = IntegrateOptions {
        record_every: 0,
        ..*opts
    };
    let runs: Vec<(SimplexState, TerminalLabel)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &[i as u64]);
            let x0 = SimplexState::sample(&mut rng, dim);
            let traj = integrate(&x0, gamma, &opts)?;
            Ok((x0, traj.terminal))
        })
        .collect::<Result<_>>()?;
    let mut vertex_counts = vec![0; dim];
    let mut mixed = 0;
    for (_, l) in &runs {
        match l {
            TerminalLabel::Vertex(n) => vertex_counts[*n] += 1,
            TerminalLabel::Mixed => mixed += 1,
        }
    }
    let (starts, labels) = runs.into_iter().unzip();
    Ok(BasinTable {
        vertex_counts,
        mixed,
        labels,
        starts,
    })
}
