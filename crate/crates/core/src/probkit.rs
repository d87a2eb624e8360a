//! Matrix algebra for two-dimensional discrete distributions.
//!
//! A joint distribution over `(x, y)` is a `k×k` matrix `P` with rows indexed
//! by `x` and columns by `y`. Marginals are `P·1` and `Pᵀ·1`, expectations are
//! `tr(F Pᵀ)`, and conditionals are column-stochastic matrices whose column `j`
//! is the distribution of the output given input `j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance used for every normalization check in this crate.
pub const PROB_TOL: f64 = 1e-12;

/// Joint distribution of two discrete variables on the same alphabet size.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist2 {
    entries: DMatrix<f64>,
    symmetric: bool,
}

impl JointDist2 {
    /// Validates a square, nonnegative matrix with unit mass.
    ///
    /// Entries within `PROB_TOL` below zero are treated as rounding noise and
    /// set to zero; anything more negative is rejected.
    pub fn new(mut entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.is_empty() {
            return Err(Error::Shape(format!(
                "joint distribution must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for v in entries.iter_mut() {
            if !v.is_finite() || *v < -PROB_TOL || *v > 1.0 + PROB_TOL {
                return Err(Error::Probability(format!("entry {v} outside [0,1]")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total = entries.sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Probability(format!("entries sum to {total}, not 1")));
        }
        Ok(Self {
            entries,
            symmetric: false,
        })
    }

    /// Like [`JointDist2::new`] but also asserts (and records) exact symmetry.
    pub fn new_symmetric(entries: DMatrix<f64>) -> Result<Self> {
        let mut j = Self::new(entries)?;
        if j.entries != j.entries.transpose() {
            return Err(Error::Probability("matrix is not symmetric".into()));
        }
        j.symmetric = true;
        Ok(j)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn uniform(k: usize) -> Self {
        let v = 1.0 / (k * k) as f64;
        Self {
            entries: DMatrix::from_element(k, k, v),
            symmetric: true,
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Whether the symmetry flag is set. Only constructors that guarantee
    /// exact symmetry set it.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            symmetric: self.symmetric,
        }
    }
}

/// Column-stochastic conditional distribution: column `j` is `p(· | j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondDist {
    entries: DMatrix<f64>,
}

impl CondDist {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Shape("empty conditional distribution".into()));
        }
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Probability(
                "conditional distribution has a negative or non-finite entry".into(),
            ));
        }
        for (j, col) in entries.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::Probability(format!("column {j} sums to {s}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn identity(k: usize) -> Self {
        Self {
            entries: DMatrix::identity(k, k),
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn n_outputs(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.entries.ncols()
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_deterministic(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    probs: DVector<f64>,
}

impl Marginal {
    pub fn new(probs: DVector<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Shape("empty marginal".into()));
        }
        if probs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Probability("negative marginal entry".into()));
        }
        let s = probs.sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::Probability(format!("marginal sums to {s}")));
        }
        Ok(Self { probs })
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(p))
    }

    pub fn probs(&self) -> &DVector<f64> {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Bernoulli variance `p0·p1`, the determinant of `diag(p)` for a
    /// binary variable.
    pub fn binary_variance(&self) -> Option<f64> {
        (self.len() == 2).then(|| self.probs[0] * self.probs[1])
    }
}

/// Coordination potential `b` and exploitation mass `g` of the symmetric
/// binary signal device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    pub b: f64,
    pub g: f64,
}

impl SignalParams {
    /// Accepts `0 ≤ g ≤ b ≤ 1`. The boundary `b = g` (no mass on the
    /// red/red signal) is allowed so that the pure antisymmetric device
    /// `(0, 0)` is representable.
    pub fn new(b: f64, g: f64) -> Result<Self> {
        if !(b.is_finite() && g.is_finite()) {
            return Err(Error::Parameter("b and g must be finite".into()));
        }
        if !(0.0..=1.0).contains(&b) || !(0.0..=1.0).contains(&g) {
            return Err(Error::Parameter(format!("b={b}, g={g} must lie in [0,1]")));
        }
        if b < g {
            return Err(Error::Parameter(format!(
                "positivity violated: b={b} < g={g}"
            )));
        }
        Ok(Self { b, g })
    }

    /// Strict positivity of the red/red entry.
    pub fn is_strictly_positive(&self) -> bool {
        self.b > self.g
    }
}

/// `(row marginal, column marginal)`.
pub fn marginals(j: &JointDist2) -> (Marginal, Marginal) {
    let rows = j.entries.column_sum();
    let cols = j.entries.row_sum().transpose();
    (Marginal { probs: rows }, Marginal { probs: cols })
}

/// `E[f(x,y)] = tr(F Pᵀ)`.
pub fn expectation(f: &DMatrix<f64>, j: &JointDist2) -> Result<f64> {
    if f.shape() != j.entries.shape() {
        return Err(Error::Shape(format!(
            "value matrix {:?} vs joint {:?}",
            f.shape(),
            j.entries.shape()
        )));
    }
    Ok(f.component_mul(&j.entries).sum())
}

/// `P_{y|ỹ} · Jᵀ · P_{x|x̃}ᵀ` for a joint `J` over `(x̃, ỹ)`.
pub fn compose_conditionals(
    p_y_given_yt: &CondDist,
    j_xt_yt: &JointDist2,
    p_x_given_xt: &CondDist,
) -> Result<JointDist2> {
    let k = j_xt_yt.dim();
    if p_y_given_yt.n_inputs() != k || p_x_given_xt.n_inputs() != k {
        return Err(Error::Shape(format!(
            "conditionals take {} and {} inputs, joint has {k}",
            p_y_given_yt.n_inputs(),
            p_x_given_xt.n_inputs()
        )));
    }
    let out = &p_y_given_yt.entries * j_xt_yt.entries.transpose() * p_x_given_xt.entries.transpose();
    JointDist2::new(out)
}

/// Whether `J` factorizes into the outer product of its marginals.
pub fn is_independent(j: &JointDist2, tol: f64) -> bool {
    let (px, py) = marginals(j);
    let outer = &px.probs * py.probs.transpose();
    (&j.entries - outer).amax() <= tol
}

/// Binary joint from marginals and correlation:
/// `p_x p_yᵀ + ρ·√(σ²_x σ²_y)·[[1,-1],[-1,1]]`.
pub fn correlation_form(p_x: &Marginal, p_y: &Marginal, rho: f64) -> Result<JointDist2> {
    let (vx, vy) = match (p_x.binary_variance(), p_y.binary_variance()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Shape("correlation form needs binary marginals".into())),
    };
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Parameter(format!("correlation {rho} outside [-1,1]")));
    }
    let c = rho * (vx * vy).sqrt();
    let sign = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    let m = &p_x.probs * p_y.probs.transpose() + sign * c;
    if m.iter().any(|&v| !(-PROB_TOL..=1.0 + PROB_TOL).contains(&v)) {
        return Err(Error::Probability(format!(
            "correlation {rho} is infeasible for these marginals"
        )));
    }
    JointDist2::new(m)
}

/// Pearson correlation of a binary joint, `None` if either marginal is
/// degenerate.
pub fn correlation(j: &JointDist2) -> Option<f64> {
    if j.dim() != 2 {
        return None;
    }
    let (px, py) = marginals(j);
    let v = px.binary_variance()? * py.binary_variance()?;
    if v <= 0.0 {
        return None;
    }
    Some((j.get(0, 0) - px.probs[0] * py.probs[0]) / v.sqrt())
}

/// `[[b−g, (1−b)/2], [(1−b)/2, g]]`; index 0 is red (stop), 1 is green (go).
pub fn signal_dist(params: SignalParams) -> JointDist2 {
    let SignalParams { b, g } = params;
    let off = (1.0 - b) / 2.0;
    JointDist2 {
        entries: DMatrix::from_row_slice(2, 2, &[b - g, off, off, g]),
        symmetric: true,
    }
}

/// Mutual information in bits, with `0·log 0 = 0`.
pub fn mutual_information(j: &JointDist2) -> f64 {
    let (px, py) = marginals(j);
    let mut mi = 0.0;
    for r in 0..j.dim() {
        for c in 0..j.dim() {
            let p = j.get(r, c);
            if p > 0.0 {
                mi += p * (p / (px.probs[r] * py.probs[c])).log2();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationModel {
    /// Observation functions must be 0/1 partitions of the state space.
    Partition,
    /// Any column-stochastic observation matrix.
    Stochastic,
}

/// Joint observation distribution `P_{o|s} · diag(p_s) · P_{o'|s}ᵀ`.
pub fn env_from_partitions(
    p_o_given_s: &CondDist,
    p_op_given_s: &CondDist,
    p_s: &Marginal,
    model: ObservationModel,
) -> Result<JointDist2> {
    let n_states = p_s.len();
    if p_o_given_s.n_inputs() != n_states || p_op_given_s.n_inputs() != n_states {
        return Err(Error::Shape(format!(
            "observation matrices must have {n_states} state columns"
        )));
    }
    if p_o_given_s.n_outputs() != p_op_given_s.n_outputs() {
        return Err(Error::Shape("observation alphabets differ in size".into()));
    }
    if model == ObservationModel::Partition
        && !(p_o_given_s.is_deterministic() && p_op_given_s.is_deterministic())
    {
        return Err(Error::Probability(
            "partition observation matrices must be 0/1 valued".into(),
        ));
    }
    let m = &p_o_given_s.entries
        * DMatrix::from_diagonal(&p_s.probs)
        * p_op_given_s.entries.transpose();
    JointDist2::new(m)
}

pub(crate) fn matrix_from_rows(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape("ragged rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sd(b: f64, g: f64) -> JointDist2 {
        signal_dist(SignalParams::new(b, g).unwrap())
    }

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        matrix_from_rows(rows).unwrap()
    }

    #[test]
    fn marginals_examples() {
        let (r, c) = marginals(&JointDist2::uniform(2));
        assert_eq!(r.probs().as_slice(), &[0.5, 0.5]);
        assert_eq!(c.probs().as_slice(), &[0.5, 0.5]);

        let (r, c) = marginals(&sd(0.5, 0.0));
        assert_eq!(r.probs().as_slice(), &[0.75, 0.25]);
        assert_eq!(c.probs().as_slice(), &[0.75, 0.25]);

        let point = JointDist2::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let (r, c) = marginals(&point);
        assert_eq!(r.probs().as_slice(), &[1.0, 0.0]);
        assert_eq!(c.probs().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn expectation_examples() {
        let reward = mat(&[&[3.0, 1.0], &[3.5, 0.0]]);
        let j = JointDist2::from_rows(&[&[0.5, 0.25], &[0.25, 0.0]]).unwrap();
        assert_abs_diff_eq!(expectation(&reward, &j).unwrap(), 2.625, epsilon = 1e-15);
        assert_abs_diff_eq!(
            expectation(&DMatrix::from_element(2, 2, 1.0), &j).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(expectation(&DMatrix::zeros(2, 2), &j).unwrap(), 0.0);
        assert!(expectation(&DMatrix::zeros(3, 3), &j).is_err());
    }

    #[test]
    fn compose_examples() {
        let j = sd(0.5, 0.0);
        let id = CondDist::identity(2);
        assert_eq!(compose_conditionals(&id, &j, &id).unwrap().entries(), j.entries());

        let swap = CondDist::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let out = compose_conditionals(&swap, &j, &swap).unwrap();
        assert_eq!(out.entries(), &mat(&[&[0.0, 0.25], &[0.25, 0.5]]));

        let bad = CondDist::identity(3);
        assert!(compose_conditionals(&bad, &j, &id).is_err());
    }

    #[test]
    fn independence_examples() {
        assert!(is_independent(&JointDist2::uniform(2), 1e-12));
        let diag = JointDist2::from_rows(&[&[0.5, 0.0], &[0.0, 0.5]]).unwrap();
        assert!(!is_independent(&diag, 1e-12));
        assert!(is_independent(&sd(0.5, 0.25), 1e-12));
    }

    #[test]
    fn correlation_form_examples() {
        let h = Marginal::from_slice(&[0.5, 0.5]).unwrap();
        let q = Marginal::from_slice(&[0.3, 0.7]).unwrap();
        let z = correlation_form(&q, &h, 0.0).unwrap();
        assert_abs_diff_eq!(z.get(0, 1), 0.15, epsilon = 1e-15);

        let plus = correlation_form(&h, &h, 1.0).unwrap();
        assert_eq!(plus.entries(), &mat(&[&[0.5, 0.0], &[0.0, 0.5]]));
        let minus = correlation_form(&h, &h, -1.0).unwrap();
        assert_eq!(minus.entries(), &mat(&[&[0.0, 0.5], &[0.5, 0.0]]));

        // ρ = 1 needs equal marginals; otherwise an entry goes negative.
        assert!(correlation_form(&q, &h, 1.0).is_err());
        assert!(correlation_form(&h, &h, 1.5).is_err());
    }

    #[test]
    fn signal_dist_examples() {
        assert_eq!(sd(1.0, 0.5).entries(), &mat(&[&[0.5, 0.0], &[0.0, 0.5]]));
        assert_eq!(sd(0.0, 0.0).entries(), &mat(&[&[0.0, 0.5], &[0.5, 0.0]]));
        assert_eq!(sd(0.5, 0.0).entries(), &mat(&[&[0.5, 0.25], &[0.25, 0.0]]));
        let j = sd(0.3, 0.1);
        assert!(j.is_symmetric());
        assert_eq!(j.entries(), &j.entries().transpose());
        assert!(SignalParams::new(0.2, 0.3).is_err());
        assert!(SignalParams::new(1.2, 0.3).is_err());
        assert!(!SignalParams::new(0.0, 0.0).unwrap().is_strictly_positive());
    }

    #[test]
    fn mutual_information_examples() {
        let diag = JointDist2::from_rows(&[&[0.5, 0.0], &[0.0, 0.5]]).unwrap();
        assert_abs_diff_eq!(mutual_information(&diag), 1.0, epsilon = 1e-15);
        assert_eq!(mutual_information(&JointDist2::uniform(2)), 0.0);
        // 0.5·log2(0.5/0.5625) + 2·0.25·log2(0.25/0.1875)
        let expect = 0.5 * (0.5f64 / 0.5625).log2() + 0.5 * (0.25f64 / 0.1875).log2();
        assert_abs_diff_eq!(mutual_information(&sd(0.5, 0.0)), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(expect, 0.1226, epsilon = 1e-4);
    }

    #[test]
    fn partitions() {
        let p_o = CondDist::from_rows(&[&[1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 1.0]]).unwrap();
        let p_op = CondDist::from_rows(&[&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]]).unwrap();
        let ps = Marginal::from_slice(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let j = env_from_partitions(&p_o, &p_op, &ps, ObservationModel::Partition).unwrap();
        assert_eq!(j.entries(), &mat(&[&[0.1, 0.2], &[0.3, 0.4]]));

        let ps = Marginal::from_slice(&[0.5, 0.25, 0.25, 0.0]).unwrap();
        let j = env_from_partitions(&p_o, &p_op, &ps, ObservationModel::Partition).unwrap();
        assert_eq!(j.entries(), &mat(&[&[0.5, 0.25], &[0.25, 0.0]]));

        let id = CondDist::identity(2);
        let half = Marginal::from_slice(&[0.5, 0.5]).unwrap();
        let j = env_from_partitions(&id, &id, &half, ObservationModel::Partition).unwrap();
        assert_eq!(j.entries(), &mat(&[&[0.5, 0.0], &[0.0, 0.5]]));

        let noisy = CondDist::from_rows(&[&[0.9, 0.2], &[0.1, 0.8]]).unwrap();
        assert!(env_from_partitions(&noisy, &id, &half, ObservationModel::Partition).is_err());
        let j = env_from_partitions(&noisy, &id, &half, ObservationModel::Stochastic).unwrap();
        assert_abs_diff_eq!(j.entries().sum(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_joints() {
        assert!(JointDist2::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).is_err());
        assert!(JointDist2::from_rows(&[&[1.5, -0.5], &[0.0, 0.0]]).is_err());
        assert!(JointDist2::new(DMatrix::zeros(2, 3)).is_err());
        assert!(JointDist2::new_symmetric(mat(&[&[0.5, 0.3], &[0.2, 0.0]])).is_err());
        assert!(CondDist::from_rows(&[&[0.5, 1.0], &[0.4, 0.0]]).is_err());
    }
}
