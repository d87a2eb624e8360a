//! Norms as (prescription, description) pairs of deterministic policies, and
//! everything needed to judge them: average reward, per-observation best
//! responses, correlated-equilibrium checks and the class hierarchy
//! null ⊂ rational ⊃ empirically validatable ⊃ consistent ⊃ ES ⊃ BR.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::games::RewardMatrix;
use crate::payoff::PayoffMatrix;
use crate::probkit::{is_independent, CondDist, JointDist2};

/// Action 0 in the binary games: cooperate / stop.
pub const STOP: usize = 0;
/// Action 1 in the binary games: exploit / go.
pub const GO: usize = 1;

/// Relative tolerance for treating two action values as tied.
pub const BR_TOL: f64 = 1e-12;

/// Tolerance on `b` for reporting a closed-form rationality boundary.
pub const MARGIN_TOL: f64 = 1e-9;

/// Observation-to-action map, `|A|×|O|` and column-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    dist: CondDist,
    deterministic: bool,
}

impl Policy {
    pub fn new(dist: CondDist) -> Self {
        let deterministic = dist.is_deterministic();
        Self { dist, deterministic }
    }

    /// Deterministic policy playing `actions[o]` on observation `o`.
    pub fn from_actions(actions: &[usize], n_actions: usize) -> Result<Self> {
        if actions.iter().any(|&a| a >= n_actions) {
            return Err(Error::Parameter(format!(
                "action index out of range for {n_actions} actions"
            )));
        }
        let m = DMatrix::from_fn(n_actions, actions.len(), |a, o| {
            if actions[o] == a {
                1.0
            } else {
                0.0
            }
        });
        Ok(Self::new(CondDist::new(m)?))
    }

    /// Plays the same action distribution whatever it observes.
    pub fn observation_independent(action_probs: &[f64], n_obs: usize) -> Result<Self> {
        let m = DMatrix::from_fn(action_probs.len(), n_obs, |a, _| action_probs[a]);
        Ok(Self::new(CondDist::new(m)?))
    }

    pub fn always(action: usize, n_actions: usize, n_obs: usize) -> Result<Self> {
        Self::from_actions(&vec![action; n_obs], n_actions)
    }

    /// Stop on red, go on green.
    pub fn signal_following() -> Self {
        Self::new(CondDist::identity(2))
    }

    /// Go on red, stop on green.
    pub fn anti_signal() -> Self {
        Self::from_actions(&[GO, STOP], 2).expect("valid")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.dist.entries()
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn n_actions(&self) -> usize {
        self.dist.n_outputs()
    }

    pub fn n_obs(&self) -> usize {
        self.dist.n_inputs()
    }

    /// Action per observation, for deterministic policies.
    pub fn actions(&self) -> Option<Vec<usize>> {
        if !self.deterministic {
            return None;
        }
        Some(
            self.matrix()
                .column_iter()
                .map(|c| c.iter().position(|&v| v == 1.0).expect("one-hot column"))
                .collect(),
        )
    }

    /// Compact `0/1` rendering of a deterministic policy's actions, e.g. `"01"`.
    pub fn bits(&self) -> String {
        match self.actions() {
            Some(a) => a.iter().map(|x| x.to_string()).collect(),
            None => "mixed".to_string(),
        }
    }
}

/// A social norm: what to do, and what the opponent is believed to do.
#[derive(Debug, Clone, PartialEq)]
pub struct Norm {
    pub id: usize,
    pub prescription: Policy,
    pub description: Policy,
}

impl Norm {
    pub fn new(id: usize, prescription: Policy, description: Policy) -> Result<Self> {
        if !(prescription.is_deterministic() && description.is_deterministic()) {
            return Err(Error::Parameter("norm policies must be deterministic".into()));
        }
        Ok(Self {
            id,
            prescription,
            description,
        })
    }
}

/// All `n_actions^n_obs` deterministic policies, ordered lexicographically by
/// their action vector with observation 0 most significant.
///
/// For the binary game this is always-stop, signal-following, anti-signal,
/// always-go.
pub fn deterministic_policies(n_actions: usize, n_obs: usize) -> Vec<Policy> {
    let count = n_actions.pow(n_obs as u32);
    (0..count)
        .map(|mut idx| {
            let mut actions = vec![0; n_obs];
            for slot in actions.iter_mut().rev() {
                *slot = idx % n_actions;
                idx /= n_actions;
            }
            Policy::from_actions(&actions, n_actions).expect("in range")
        })
        .collect()
}

/// Every ordered (prescription, description) pair, prescription-major. Norm
/// `id = p·K + d` where `K` is the number of deterministic policies.
pub fn enumerate_norms(n_actions: usize, n_obs: usize) -> Vec<Norm> {
    let policies = deterministic_policies(n_actions, n_obs);
    let k = policies.len();
    let mut out = Vec::with_capacity(k * k);
    for (p, pres) in policies.iter().enumerate() {
        for (d, desc) in policies.iter().enumerate() {
            out.push(Norm {
                id: p * k + d,
                prescription: pres.clone(),
                description: desc.clone(),
            });
        }
    }
    out
}

fn check_shapes(pi: &Policy, pi_opp: &Policy, j: &JointDist2, r: &RewardMatrix) -> Result<()> {
    let k = j.dim();
    let a = r.entries().nrows();
    if pi.n_obs() != k || pi_opp.n_obs() != k || pi.n_actions() != a || pi_opp.n_actions() != a {
        return Err(Error::Shape(format!(
            "policies {}x{} / {}x{} incompatible with joint {k}x{k} and reward {a}x{a}",
            pi.n_actions(),
            pi.n_obs(),
            pi_opp.n_actions(),
            pi_opp.n_obs()
        )));
    }
    Ok(())
}

/// Average reward `ρ = tr(R · P_{a'|o'} · Jᵀ · P_{a|o}ᵀ)` of `pi` against
/// `pi_opp`, where `J[o, o']` has the player's observation on rows. For the
/// symmetric signal devices used throughout, `Jᵀ = J`.
pub fn avg_reward(pi: &Policy, pi_opp: &Policy, j: &JointDist2, r: &RewardMatrix) -> Result<f64> {
    check_shapes(pi, pi_opp, j, r)?;
    let m = pi_opp.matrix() * j.entries().transpose() * pi.matrix().transpose();
    Ok((r.entries() * m).trace())
}

/// Joint action distribution `P_{a|o} · J · P_{a'|o'}ᵀ` (player's action on rows).
pub fn joint_actions(pi: &Policy, pi_opp: &Policy, j: &JointDist2) -> Result<JointDist2> {
    if pi.n_obs() != j.dim() || pi_opp.n_obs() != j.dim() {
        return Err(Error::Shape("policy and joint observation sizes differ".into()));
    }
    JointDist2::new(pi.matrix() * j.entries() * pi_opp.matrix().transpose())
}

/// Per-observation best-response sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// Optimal actions per observation, ascending.
    pub sets: Vec<Vec<usize>>,
    /// Posterior-averaged value of each action (rows) per observation
    /// (columns). Zero for degenerate observations.
    pub values: DMatrix<f64>,
    /// Observation has zero probability; every action is in its set.
    pub degenerate: Vec<bool>,
}

impl BestResponse {
    /// Whether every action played with positive probability is optimal.
    pub fn admits(&self, policy: &Policy) -> bool {
        policy
            .matrix()
            .column_iter()
            .zip(&self.sets)
            .all(|(col, set)| {
                col.iter()
                    .enumerate()
                    .all(|(a, &p)| p == 0.0 || set.contains(&a))
            })
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    /// Some observation has more than one optimal action.
    pub fn has_tie(&self) -> bool {
        self.sets
            .iter()
            .zip(&self.degenerate)
            .any(|(s, &d)| !d && s.len() > 1)
    }
}

/// For each observation `o`, the actions maximizing
/// `Σ_{o'} p(o'|o) · E_{a'∼opp(·|o')}[R(a, a')]`.
pub fn best_response_per_obs(opp: &Policy, j: &JointDist2, r: &RewardMatrix) -> BestResponse {
    let n_actions = r.entries().nrows();
    let k = j.dim();
    // column o: Σ_{o'} J[o,o'] · (R · opp)_{·,o'}
    let raw = r.entries() * opp.matrix() * j.entries().transpose();
    let p_obs = j.entries().column_sum();
    let mut values = DMatrix::zeros(n_actions, k);
    let mut sets = Vec::with_capacity(k);
    let mut degenerate = Vec::with_capacity(k);
    for o in 0..k {
        if p_obs[o] <= 0.0 {
            sets.push((0..n_actions).collect());
            degenerate.push(true);
            continue;
        }
        let col: Vec<f64> = (0..n_actions).map(|a| raw[(a, o)] / p_obs[o]).collect();
        let best = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = BR_TOL * best.abs().max(1.0);
        sets.push((0..n_actions).filter(|&a| best - col[a] <= tol).collect());
        for (a, v) in col.into_iter().enumerate() {
            values[(a, o)] = v;
        }
        degenerate.push(false);
    }
    BestResponse {
        sets,
        values,
        degenerate,
    }
}

/// The prescription is never worse than any alternative given the description.
pub fn is_rational(n: &Norm, j: &JointDist2, r: &RewardMatrix) -> bool {
    best_response_per_obs(&n.description, j, r).admits(&n.prescription)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NormClass {
    pub rational: bool,
    pub null: bool,
    pub empirically_validatable: bool,
    pub consistent: bool,
    pub inconsistent: bool,
    pub evolutionarily_stable: bool,
    pub best_response: bool,
}

impl NormClass {
    /// Checks the containment chain of the hierarchy.
    pub fn is_coherent(&self) -> bool {
        self.null == !self.rational
            && (!self.consistent || self.empirically_validatable)
            && (!self.empirically_validatable || self.rational)
            && (!self.evolutionarily_stable || self.consistent)
            && (!self.best_response || self.evolutionarily_stable)
            && self.inconsistent == (self.empirically_validatable && !self.consistent)
    }

    /// Name of the narrowest class the norm belongs to.
    pub fn strongest(&self) -> &'static str {
        if self.best_response {
            "best-response"
        } else if self.evolutionarily_stable {
            "evolutionarily-stable"
        } else if self.consistent {
            "consistent"
        } else if self.inconsistent {
            "inconsistent"
        } else if self.rational {
            "rational"
        } else {
            "null"
        }
    }
}

impl fmt::Display for NormClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.strongest())
    }
}

/// Maynard-Smith condition for strategy `n` of `gamma`: for every `m ≠ n`,
/// `Γ_nn > Γ_mn`, or `Γ_nn = Γ_mn` and `Γ_nm > Γ_mm`.
pub fn is_ess(gamma: &DMatrix<f64>, n: usize) -> bool {
    let scale = gamma.amax().max(1.0);
    let tol = BR_TOL * scale;
    (0..gamma.nrows()).filter(|&m| m != n).all(|m| {
        let d = gamma[(n, n)] - gamma[(m, n)];
        d > tol || (d.abs() <= tol && gamma[(n, m)] - gamma[(m, m)] > tol)
    })
}

/// Classifies every norm. `gamma` supplies the payoff matrix for the ESS test;
/// a norm's strategy is located by its prescription among the unsubstituted
/// strategies of `gamma`.
pub fn classify_all(
    norms: &[Norm],
    j: &JointDist2,
    r: &RewardMatrix,
    gamma: &PayoffMatrix,
) -> Vec<NormClass> {
    let rational: Vec<bool> = norms.iter().map(|n| is_rational(n, j, r)).collect();
    // BR sets against each norm's prescription, cached per norm.
    let br_vs_pres: Vec<BestResponse> = norms
        .iter()
        .map(|n| best_response_per_obs(&n.prescription, j, r))
        .collect();

    let mut classes: Vec<NormClass> = norms
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let rat = rational[i];
            let ev = rat
                && norms
                    .iter()
                    .enumerate()
                    .any(|(k, _)| rational[k] && br_vs_pres[k].admits(&n.prescription));
            let consistent = rat && br_vs_pres[i].admits(&n.prescription);
            let es = consistent
                && gamma
                    .index_of_policy(&n.prescription)
                    .is_some_and(|idx| is_ess(gamma.entries(), idx));
            NormClass {
                rational: rat,
                null: !rat,
                empirically_validatable: ev,
                consistent,
                inconsistent: ev && !consistent,
                evolutionarily_stable: es,
                best_response: false,
            }
        })
        .collect();

    let consistent_idx: Vec<usize> = (0..norms.len()).filter(|&i| classes[i].consistent).collect();
    for (i, c) in classes.iter_mut().enumerate() {
        c.best_response = c.evolutionarily_stable
            && consistent_idx
                .iter()
                .all(|&k| br_vs_pres[k].admits(&norms[i].prescription));
    }
    classes
}

/// Both deterministic policies are per-observation best responses to each
/// other; the opponent sees the transposed joint.
pub fn is_correlated_equilibrium(
    pi: &Policy,
    pi_opp: &Policy,
    j: &JointDist2,
    r: &RewardMatrix,
) -> bool {
    best_response_per_obs(pi_opp, j, r).admits(pi)
        && best_response_per_obs(pi, &j.transpose(), r).admits(pi_opp)
}

/// Whether the induced joint action distribution factorizes.
pub fn is_nash_factorizable(pi: &Policy, pi_opp: &Policy, j: &JointDist2, tol: f64) -> bool {
    match joint_actions(pi, pi_opp, j) {
        Ok(p_aa) => is_independent(&p_aa, tol),
        Err(_) => false,
    }
}

/// A symmetric Nash strategy in a binary game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashSolution {
    /// Probability of the cooperative action.
    pub p_stop: f64,
    /// Average reward in self-play.
    pub rho: f64,
}

impl NashSolution {
    /// Observation-independent policy playing the Nash mix.
    pub fn policy(&self, n_obs: usize) -> Policy {
        Policy::observation_independent(&[self.p_stop, 1.0 - self.p_stop], n_obs)
            .expect("p_stop in [0,1]")
    }
}

/// Mixed equilibrium of the normalized chicken game: `p_stop = 1/(1+L)`,
/// `ρ = (B+L)/(1+L)`.
pub fn mixed_nash_chicken(b: f64, l: f64) -> Result<NashSolution> {
    if !(l > 0.0) {
        return Err(Error::Parameter(format!("needs L > 0, got {l}")));
    }
    Ok(NashSolution {
        p_stop: 1.0 / (1.0 + l),
        rho: (b + l) / (1.0 + l),
    })
}

/// Highest-reward symmetric Nash equilibrium of a 2×2 symmetric game.
pub fn best_symmetric_nash(r: &RewardMatrix) -> NashSolution {
    let [b, s, t, p] = r.as_bstp();
    let mut cands = Vec::with_capacity(3);
    if b >= t {
        cands.push(NashSolution { p_stop: 1.0, rho: b });
    }
    if p >= s {
        cands.push(NashSolution { p_stop: 0.0, rho: p });
    }
    // indifference: q·B + (1−q)·S = q·T + (1−q)·P
    let denom = (b - t) - (s - p);
    if denom != 0.0 {
        let q = (p - s) / denom;
        if q > 0.0 && q < 1.0 {
            let rho = q * b + (1.0 - q) * s;
            cands.push(NashSolution { p_stop: q, rho });
        }
    }
    cands
        .into_iter()
        .max_by(|x, y| x.rho.total_cmp(&y.rho))
        .expect("every symmetric 2x2 game has a symmetric equilibrium")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintState {
    Ok,
    Marginal,
    Violated,
}

impl ConstraintState {
    /// `value < threshold` with a `MARGIN_TOL` band reported as marginal.
    fn below(value: f64, threshold: f64) -> Self {
        if (value - threshold).abs() <= MARGIN_TOL {
            ConstraintState::Marginal
        } else if value < threshold {
            ConstraintState::Ok
        } else {
            ConstraintState::Violated
        }
    }

    /// Satisfied under the weak ("never worse") reading.
    pub fn holds(self) -> bool {
        self != ConstraintState::Violated
    }
}

/// Closed-form rationality of the signal-following norm on `signal_dist(b, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalityRegion {
    /// Going on green is optimal: `b < 1 − 2g/L`.
    pub green: ConstraintState,
    /// Stopping on red is optimal: `b < (1 + 2gL)/(1 + 2L)`.
    pub red: ConstraintState,
    /// `b > g`.
    pub positivity: ConstraintState,
}

impl RationalityRegion {
    pub fn green_ok(&self) -> bool {
        self.green == ConstraintState::Ok
    }
    pub fn red_ok(&self) -> bool {
        self.red == ConstraintState::Ok
    }
    pub fn positivity_ok(&self) -> bool {
        self.positivity == ConstraintState::Ok
    }
    pub fn is_marginal(&self) -> bool {
        [self.green, self.red, self.positivity].contains(&ConstraintState::Marginal)
    }
}

pub fn rationality_region(b: f64, g: f64, l: f64) -> Result<RationalityRegion> {
    if !(l > 0.0) {
        return Err(Error::Parameter(format!("needs L > 0, got {l}")));
    }
    let green = if g == 0.0 {
        ConstraintState::Ok
    } else {
        ConstraintState::below(b, 1.0 - 2.0 * g / l)
    };
    let red = ConstraintState::below(b, (1.0 + 2.0 * g * l) / (1.0 + 2.0 * l));
    let positivity = ConstraintState::below(g, b);
    Ok(RationalityRegion {
        green,
        red,
        positivity,
    })
}
