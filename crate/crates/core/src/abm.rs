//! Closed-loop finite-population simulation. Each round agents are paired,
//! observe signals drawn from the previous round's empirical action
//! statistics for their norm pair, play, and then imitate.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::games::RewardMatrix;
use crate::norms::{avg_reward, best_response_per_obs, NashSolution, Norm, Policy};
use crate::payoff::PayoffMatrix;
use crate::replicator::{integrate, Dynamics, IntegrateOptions, SimplexState};
use crate::probkit::JointDist2;
use crate::seeding::stream_rng;

const GAME_PAIRING: u64 = 0;
const IMITATION: u64 = 1;
const PLAY: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    norm_of: Vec<usize>,
    n_norms: usize,
}

impl Population {
    pub fn new(norm_of: Vec<usize>, n_norms: usize) -> Result<Self> {
        if norm_of.is_empty() || !norm_of.len().is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "population size must be even and positive, got {}",
                norm_of.len()
            )));
        }
        if let Some(&bad) = norm_of.iter().find(|&&n| n >= n_norms) {
            return Err(Error::Parameter(format!("norm index {bad} out of {n_norms}")));
        }
        Ok(Self { norm_of, n_norms })
    }

    /// `n_agents` agents split by largest remainder over `freqs`, in blocks.
    pub fn from_frequencies(n_agents: usize, freqs: &[f64]) -> Result<Self> {
        if freqs.is_empty() || freqs.iter().any(|f| !(*f >= 0.0)) {
            return Err(Error::Parameter("frequencies must be nonnegative".into()));
        }
        let total: f64 = freqs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("frequencies sum to {total}")));
        }
        let exact: Vec<f64> = freqs.iter().map(|f| f * n_agents as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..freqs.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - counts[a] as f64;
            let rb = exact[b] - counts[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let short = n_agents - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        let norm_of = counts
            .iter()
            .enumerate()
            .flat_map(|(n, &c)| std::iter::repeat_n(n, c))
            .collect();
        Self::new(norm_of, freqs.len())
    }

    pub fn monoculture(n_agents: usize, norm: usize, n_norms: usize) -> Result<Self> {
        Self::new(vec![norm; n_agents], n_norms)
    }

    pub fn len(&self) -> usize {
        self.norm_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norm_of.is_empty()
    }

    pub fn n_norms(&self) -> usize {
        self.n_norms
    }

    pub fn norm_of(&self) -> &[usize] {
        &self.norm_of
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_norms];
        for &n in &self.norm_of {
            c[n] += 1;
        }
        c
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.counts().into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Uniform random perfect matching of `0..n`.
pub fn pair_agents<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::Parameter(format!("cannot pair {n} agents")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    Ok(idx.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// Empirical joint action distribution of `(own, opponent)` action pairs,
/// `None` when there are no pairs.
pub fn empirical_joint(outcomes: &[(usize, usize)]) -> Option<JointDist2> {
    if outcomes.is_empty() {
        return None;
    }
    let mut m = DMatrix::zeros(2, 2);
    for &(a, b) in outcomes {
        m[(a, b)] += 1.0;
    }
    m /= outcomes.len() as f64;
    Some(JointDist2::new(m).expect("normalized counts"))
}

/// Outcome of [`conditional_play`].
#[derive(Debug, Clone, PartialEq)]
pub struct Play {
    pub own: Policy,
    pub opp: Policy,
    /// `δ`: each side's norm is rational against the other's prescription.
    pub rational: (bool, bool),
    /// No estimate was available; both sides fell back to Nash.
    pub missing: bool,
}

/// Each side plays its prescription if that is a best response to the other
/// side's prescription under `j` (rows = own observation), else the
/// observation-independent Nash policy.
pub fn conditional_play(
    n: &Norm,
    n_opp: &Norm,
    j: Option<&JointDist2>,
    r: &RewardMatrix,
    nash: &NashSolution,
) -> Play {
    let fallback = |norm: &Norm| nash.policy(norm.prescription.n_obs());
    let Some(j) = j else {
        return Play {
            own: fallback(n),
            opp: fallback(n_opp),
            rational: (false, false),
            missing: true,
        };
    };
    let own_ok = best_response_per_obs(&n_opp.prescription, j, r).admits(&n.prescription);
    let opp_ok = best_response_per_obs(&n.prescription, &j.transpose(), r).admits(&n_opp.prescription);
    Play {
        own: if own_ok { n.prescription.clone() } else { fallback(n) },
        opp: if opp_ok { n_opp.prescription.clone() } else { fallback(n_opp) },
        rational: (own_ok, opp_ok),
        missing: false,
    }
}

/// Per ordered norm pair `(n, n')`, the current joint observation estimate
/// with rows indexed by the observation of the agent holding `n`. Entries
/// satisfy `est(n', n) = est(n, n')ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    n_norms: usize,
    joints: Vec<Option<JointDist2>>,
    /// Number of games behind each entry in the last update.
    pub pair_counts: Vec<usize>,
}

impl Estimates {
    /// Every pair starts from `j0` (transposed below the diagonal).
    pub fn uniform_start(n_norms: usize, j0: &JointDist2) -> Self {
        let mut joints = Vec::with_capacity(n_norms * n_norms);
        for a in 0..n_norms {
            for b in 0..n_norms {
                joints.push(Some(if a <= b { j0.clone() } else { j0.transpose() }));
            }
        }
        Self {
            n_norms,
            joints,
            pair_counts: vec![0; n_norms * n_norms],
        }
    }

    pub fn n_norms(&self) -> usize {
        self.n_norms
    }

    pub fn get(&self, n: usize, m: usize) -> Option<&JointDist2> {
        self.joints[n * self.n_norms + m].as_ref()
    }

    /// Entries in `(n, m)` row-major order, each flattened row-major.
    pub fn flattened(&self) -> Vec<f64> {
        self.joints
            .iter()
            .flat_map(|j| match j {
                Some(j) => {
                    let e = j.entries();
                    vec![e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]]
                }
                None => vec![f64::NAN; 4],
            })
            .collect()
    }
}

/// Result of one round of play.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub actions: Vec<usize>,
    pub payoffs: Vec<f64>,
    pub estimates: Estimates,
    /// `tr(R P̂^{nn'}_{aa'})` from this round's realized actions; NaN for
    /// pairs that did not meet.
    pub gamma_empirical: DMatrix<f64>,
    /// Average reward of the policies actually used under the estimates that
    /// generated this round's signals.
    pub gamma_expected: DMatrix<f64>,
    /// Agents that fell back to the Nash policy.
    pub nash_fallbacks: usize,
}

/// Shared inputs of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub norms: Vec<Norm>,
    pub reward: RewardMatrix,
    pub nash: NashSolution,
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: impl IntoIterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_action<R: Rng + ?Sized>(rng: &mut R, pi: &Policy, obs: usize) -> usize {
    sample_index(rng, pi.matrix().column(obs).iter().copied())
}

/// One round of play. Signals for a pair with norms `(n, n')` are drawn from
/// `est(n, n')`; new estimates are this round's empirical action
/// frequencies, with unobserved pairs carried forward.
pub fn step(
    pop: &Population,
    estimates: &Estimates,
    env: &Environment,
    seed: u64,
    round: u64,
) -> Result<RoundOutcome> {
    let k = pop.n_norms();
    if env.norms.len() != k || estimates.n_norms() != k {
        return Err(Error::Shape(format!(
            "{} norms, {} estimate rows, population over {k}",
            env.norms.len(),
            estimates.n_norms()
        )));
    }
    let r = &env.reward;
    let plays: Vec<Play> = (0..k * k)
        .map(|i| {
            let (n, m) = (i / k, i % k);
            conditional_play(&env.norms[n], &env.norms[m], estimates.get(n, m), r, &env.nash)
        })
        .collect();

    let mut gamma_expected = DMatrix::from_element(k, k, f64::NAN);
    for n in 0..k {
        for m in 0..k {
            if let Some(j) = estimates.get(n, m) {
                let p = &plays[n * k + m];
                gamma_expected[(n, m)] = avg_reward(&p.own, &p.opp, j, r)?;
            }
        }
    }

    let mut rng = stream_rng(seed, &[GAME_PAIRING, round]);
    let pairs = pair_agents(pop.len(), &mut rng)?;
    let norm_of = pop.norm_of();
    let games: Vec<(usize, usize, bool)> = pairs
        .par_iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let (n, m) = (norm_of[i], norm_of[j]);
            let play = &plays[n * k + m];
            let mut rng = stream_rng(seed, &[PLAY, round, p as u64]);
            // without an estimate both sides play Nash, which ignores the signal
            let cell = match estimates.get(n, m) {
                Some(joint) => {
                    let e = joint.entries();
                    sample_index(&mut rng, [e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]])
                }
                None => sample_index(&mut rng, [0.25; 4]),
            };
            let (o, o2) = (cell / 2, cell % 2);
            let a = sample_action(&mut rng, &play.own, o);
            let b = sample_action(&mut rng, &play.opp, o2);
            (a, b, play.missing)
        })
        .collect();

    let mut actions = vec![0; pop.len()];
    let mut payoffs = vec![0.0; pop.len()];
    let mut counts = vec![DMatrix::<f64>::zeros(2, 2); k * k];
    let mut pair_counts = vec![0usize; k * k];
    let mut nash_fallbacks = 0;
    let re = r.entries();
    for (&(i, j), &(a, b, _)) in pairs.iter().zip(&games) {
        actions[i] = a;
        actions[j] = b;
        payoffs[i] = re[(a, b)];
        payoffs[j] = re[(b, a)];
        let (n, m) = (norm_of[i], norm_of[j]);
        let play = &plays[n * k + m];
        nash_fallbacks += (!play.rational.0) as usize + (!play.rational.1) as usize;
        counts[n * k + m][(a, b)] += 1.0;
        pair_counts[n * k + m] += 1;
        counts[m * k + n][(b, a)] += 1.0;
        pair_counts[m * k + n] += 1;
    }

    let mut joints = estimates.joints.clone();
    let mut gamma_empirical = DMatrix::from_element(k, k, f64::NAN);
    for idx in 0..k * k {
        let c = pair_counts[idx];
        if c > 0 {
            let p = JointDist2::new(&counts[idx] / c as f64)?;
            gamma_empirical[(idx / k, idx % k)] = (re * p.entries().transpose()).trace();
            joints[idx] = Some(p);
        }
    }
    Ok(RoundOutcome {
        actions,
        payoffs,
        estimates: Estimates {
            n_norms: k,
            joints,
            pair_counts,
        },
        gamma_empirical,
        gamma_expected,
        nash_fallbacks,
    })
}

/// Probability that the higher-payoff side of an imitation pair wins,
/// `1/(1 + e^{−β|Δf|})`. `β = ∞` gives 1 for unequal payoffs.
pub fn adoption_probability(delta_f: f64, beta: f64) -> f64 {
    let x = delta_f.abs();
    if beta.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.5 };
    }
    1.0 / (1.0 + (-beta * x).exp())
}

/// Agents meet in a fresh random matching; in each pair exactly one agent
/// copies the other's norm. The higher-payoff agent's norm spreads with
/// [`adoption_probability`], the lower one's otherwise.
pub fn imitation_update(
    pop: &Population,
    payoffs: &[f64],
    beta: f64,
    seed: u64,
    round: u64,
) -> Result<Population> {
    if !(beta >= 0.0) {
        return Err(Error::Parameter(format!("beta must be >= 0, got {beta}")));
    }
    if payoffs.len() != pop.len() {
        return Err(Error::Shape("one payoff per agent".into()));
    }
    let mut rng = stream_rng(seed, &[IMITATION, round]);
    let pairs = pair_agents(pop.len(), &mut rng)?;
    let mut norm_of = pop.norm_of.clone();
    for (i, j) in pairs {
        let (hi, lo) = if payoffs[i] >= payoffs[j] { (i, j) } else { (j, i) };
        let p = adoption_probability(payoffs[hi] - payoffs[lo], beta);
        let u: f64 = rng.random();
        if u < p {
            norm_of[lo] = pop.norm_of[hi];
        } else {
            norm_of[hi] = pop.norm_of[lo];
        }
    }
    Ok(Population {
        norm_of,
        n_norms: pop.n_norms,
    })
}

/// Replicator time covered by one imitation round at weak selection.
pub fn mean_field_time_per_round(beta: f64) -> f64 {
    beta / 2.0
}

/// Replicator path driven by the run's per-round expected Γ, each round
/// covering [`mean_field_time_per_round`] of replicator time. Starts from the
/// run's initial mix; one state per recorded frequency vector.
pub fn matched_replicator_path(run: &AbmRun, beta: f64, substeps: usize) -> Result<Vec<Vec<f64>>> {
    if !(beta > 0.0 && beta.is_finite()) || substeps == 0 {
        return Err(Error::Parameter("need finite beta > 0 and substeps >= 1".into()));
    }
    let h = mean_field_time_per_round(beta);
    let opts = IntegrateOptions {
        dt: h / substeps as f64,
        t_end: h,
        dynamics: Dynamics::Linear,
        record_every: 0,
    };
    let mut x = SimplexState::from_slice(&run.initial_frequencies)?;
    let mut path = vec![x.as_vector().iter().copied().collect()];
    for r in &run.rounds {
        let gamma = PayoffMatrix::from_matrix(r.gamma_expected.clone())?;
        x = integrate(&x, &gamma, &opts)?.last().clone();
        path.push(x.as_vector().iter().copied().collect());
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbmConfig {
    pub n_agents: usize,
    pub rounds: usize,
    pub beta: f64,
    pub initial: Vec<f64>,
    pub j0: JointDist2,
    pub env: Environment,
    pub seed: u64,
}

/// Per-round record. `frequencies` is the mix after this round's imitation.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub frequencies: Vec<f64>,
    pub gamma_empirical: DMatrix<f64>,
    pub gamma_expected: DMatrix<f64>,
    /// Estimates produced by this round (used for the next one).
    pub estimates: Vec<f64>,
    pub nash_fallbacks: usize,
    pub mean_payoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbmRun {
    pub initial_frequencies: Vec<f64>,
    pub rounds: Vec<RoundRecord>,
    pub final_population: Population,
}

impl AbmRun {
    /// Frequencies at rounds `0..=rounds`, starting with the initial mix.
    pub fn frequency_path(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.initial_frequencies.clone())
            .chain(self.rounds.iter().map(|r| r.frequencies.clone()))
            .collect()
    }
}

pub fn run(config: &AbmConfig) -> Result<AbmRun> {
    let k = config.env.norms.len();
    if config.initial.len() != k {
        return Err(Error::Shape(format!(
            "{} initial frequencies for {k} norms",
            config.initial.len()
        )));
    }
    if config.j0.dim() != 2 {
        return Err(Error::Shape("binary observations required".into()));
    }
    let mut pop = Population::from_frequencies(config.n_agents, &config.initial)?;
    let mut est = Estimates::uniform_start(k, &config.j0);
    let initial_frequencies = pop.frequencies();
    let mut rounds = Vec::with_capacity(config.rounds);
    for t in 0..config.rounds {
        let out = step(&pop, &est, &config.env, config.seed, t as u64)?;
        pop = imitation_update(&pop, &out.payoffs, config.beta, config.seed, t as u64)?;
        let mean_payoff = out.payoffs.iter().sum::<f64>() / out.payoffs.len() as f64;
        est = out.estimates;
        rounds.push(RoundRecord {
            round: t,
            frequencies: pop.frequencies(),
            gamma_empirical: out.gamma_empirical,
            gamma_expected: out.gamma_expected,
            estimates: est.flattened(),
            nash_fallbacks: out.nash_fallbacks,
            mean_payoff,
        });
    }
    Ok(AbmRun {
        initial_frequencies,
        rounds,
        final_population: pop,
    })
}
