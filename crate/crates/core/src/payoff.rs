//! The norm payoff matrix Γ: `Γ[n][n']` is the average reward of strategy `n`
//! against strategy `n'`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::games::RewardMatrix;
use crate::norms::{avg_reward, is_rational, NashSolution, Norm, Policy, GO};
use crate::probkit::JointDist2;

/// A row/column of Γ before null substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub label: String,
    pub policy: Policy,
    /// When present, the strategy is a norm: it falls back to the default
    /// Nash policy if its prescription is not rational given this description.
    pub description: Option<Policy>,
}

impl Strategy {
    pub fn default_nash(nash: &NashSolution, n_obs: usize) -> Self {
        Self {
            label: "nash".into(),
            policy: nash.policy(n_obs),
            description: None,
        }
    }

    pub fn prescription(label: impl Into<String>, policy: Policy) -> Self {
        Self {
            label: label.into(),
            policy,
            description: None,
        }
    }

    pub fn norm(label: impl Into<String>, norm: &Norm) -> Self {
        Self {
            label: label.into(),
            policy: norm.prescription.clone(),
            description: Some(norm.description.clone()),
        }
    }

    /// `{Nash, anti-signal, signal-following, always-go}`: the four strategies
    /// of the binary chicken game, indexed 0..=3.
    pub fn chicken_set(nash: &NashSolution) -> Vec<Strategy> {
        vec![
            Self::default_nash(nash, 2),
            Self::prescription("P1", Policy::anti_signal()),
            Self::prescription("P2", Policy::signal_following()),
            Self::prescription("P3", Policy::always(GO, 2, 2).expect("valid")),
        ]
    }
}

/// Index of the signal-following strategy in [`Strategy::chicken_set`].
pub const SIGNAL_FOLLOWING: usize = 2;
/// Index of the anti-signal strategy in [`Strategy::chicken_set`].
pub const ANTI_SIGNAL: usize = 1;
/// Index of the always-go strategy in [`Strategy::chicken_set`].
pub const ALWAYS_GO: usize = 3;
/// Index of the default Nash strategy.
pub const NASH: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    entries: DMatrix<f64>,
    labels: Vec<String>,
    policies: Vec<Policy>,
    substituted: Vec<bool>,
}

impl PayoffMatrix {
    /// A bare fitness matrix with generated labels, for use in the dynamics.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.is_empty() {
            return Err(Error::Shape("payoff matrix must be square".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("payoff entries must be finite".into()));
        }
        let n = entries.nrows();
        Ok(Self {
            entries,
            labels: (0..n).map(|i| format!("s{i}")).collect(),
            policies: Vec::new(),
            substituted: vec![false; n],
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Shape("label count differs from strategy count".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries[(n, m)]
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Which strategies were replaced by the default Nash policy.
    pub fn substituted(&self) -> &[bool] {
        &self.substituted
    }

    /// Index of the first unsubstituted strategy whose original policy is `p`.
    pub fn index_of_policy(&self, p: &Policy) -> Option<usize> {
        self.policies
            .iter()
            .zip(&self.substituted)
            .position(|(q, &s)| !s && q == p)
    }

    /// `Γ + 1·cᵀ`: adds `c[m]` to every entry of column `m`.
    pub fn shift_columns(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.len() {
            return Err(Error::Shape("column shift length".into()));
        }
        let mut out = self.clone();
        for (m, mut col) in out.entries.column_iter_mut().enumerate() {
            col.add_scalar_mut(c[m]);
        }
        Ok(out)
    }

    /// Largest entrywise difference to another Γ of the same size.
    pub fn max_abs_diff(&self, other: &PayoffMatrix) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Shape("payoff matrices differ in size".into()));
        }
        Ok((&self.entries - &other.entries).amax())
    }
}

/// Evaluates `Γ[n][n'] = ρ(strategy_n, strategy_n')`. Norm strategies that are
/// null under `(j, r)` are evaluated as the default Nash policy instead, and
/// the substitution is recorded.
pub fn build_gamma(
    strategies: &[Strategy],
    j: &JointDist2,
    r: &RewardMatrix,
    nash: &NashSolution,
) -> Result<PayoffMatrix> {
    if strategies.is_empty() {
        return Err(Error::Shape("no strategies".into()));
    }
    let default = nash.policy(j.dim());
    let mut substituted = Vec::with_capacity(strategies.len());
    let mut played = Vec::with_capacity(strategies.len());
    for s in strategies {
        let null = match &s.description {
            Some(d) => {
                let n = Norm {
                    id: 0,
                    prescription: s.policy.clone(),
                    description: d.clone(),
                };
                !is_rational(&n, j, r)
            }
            None => false,
        };
        substituted.push(null);
        played.push(if null { &default } else { &s.policy });
    }
    let n = strategies.len();
    let mut entries = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            entries[(a, b)] = avg_reward(played[a], played[b], j, r)?;
        }
    }
    Ok(PayoffMatrix {
        entries,
        labels: strategies.iter().map(|s| s.label.clone()).collect(),
        policies: strategies.iter().map(|s| s.policy.clone()).collect(),
        substituted,
    })
}

/// Symbolic Γ(b, L) of the chicken game at `B = 3`, `g = 0`, strategy order
/// as in [`Strategy::chicken_set`].
pub fn chicken_gamma_closed_form(b: f64, l: f64) -> PayoffMatrix {
    let col0 = (l + 3.0) / (l + 1.0);
    let q = l * (l + 3.0) + 3.0;
    #[rustfmt::skip]
    let rows = [
        col0, (b - (b - 1.0) * q + 1.0) / (2.0 * (l + 1.0)), (-b + (b + 1.0) * q + 1.0) / (2.0 * (l + 1.0)), 1.0 / (l + 1.0),
        col0, -b / 2.0 - (l + 3.0) * (b - 1.0) / 2.0 + 0.5, b * (l + 1.5) + 1.5, 0.5 - b / 2.0,
        col0, 1.5 - b / 2.0, 5.0 * b / 2.0 - (l + 3.0) * (b - 1.0) / 2.0 + 0.5, b / 2.0 + 0.5,
        col0, -(l + 3.0) * (b - 1.0) / 2.0, (l + 3.0) * (b + 1.0) / 2.0, 0.0,
    ];
    let nash = NashSolution {
        p_stop: 1.0 / (1.0 + l),
        rho: col0,
    };
    let set = Strategy::chicken_set(&nash);
    PayoffMatrix {
        entries: DMatrix::from_row_slice(4, 4, &rows),
        labels: set.iter().map(|s| s.label.clone()).collect(),
        policies: set.into_iter().map(|s| s.policy).collect(),
        substituted: vec![false; 4],
    }
}
