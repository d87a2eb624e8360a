//! Opinion vectors, similarity-based type inference and pair-type-dependent
//! rewards, with a small two-population demo loop.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::abm::pair_agents;
use crate::error::{Error, Result};
use crate::games::{chicken_reward, RewardMatrix};
use crate::norms::{best_response_per_obs, best_symmetric_nash, NashSolution, Policy};
use crate::probkit::JointDist2;
use crate::seeding::stream_rng;

/// Deviation of an agent's beliefs from the population average.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionVector(Vec<f64>);

impl OpinionVector {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Shape("opinion vector needs D >= 1".into()));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("opinion components must be finite".into()));
        }
        Ok(Self(d))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `Θ(d)` with `Θ(x) = 1` iff `x > 0`.
    pub fn binarized(&self) -> Vec<bool> {
        self.0.iter().map(|&v| v > 0.0).collect()
    }
}

/// `S = Θ(d)ᵀΘ(d')/D`.
pub fn similarity(d: &OpinionVector, d_opp: &OpinionVector) -> Result<f64> {
    if d.dim() != d_opp.dim() {
        return Err(Error::Shape(format!(
            "opinion dimensions {} and {}",
            d.dim(),
            d_opp.dim()
        )));
    }
    let shared = d
        .0
        .iter()
        .zip(&d_opp.0)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .count();
    Ok(shared as f64 / d.dim() as f64)
}

/// Pair type `ξ`: 1 for like-minded pairs, 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairType {
    pub xi: u8,
    pub estimated: bool,
}

/// `ξ = Θ(S − 1/2)`, so `S = 1/2` gives 0.
pub fn infer_type(s: f64) -> Result<PairType> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Parameter(format!("similarity {s} outside [0,1]")));
    }
    Ok(PairType {
        xi: (s > 0.5) as u8,
        estimated: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prior {
    /// Opposite camps hold non-overlapping opinions, so one deviating
    /// component identifies an out-group partner.
    NonOverlapping,
    Uninformative,
}

/// Inference from a single observed opinion component. `None` means
/// undecided.
pub fn infer_type_partial(observed: f64, own: f64, prior: Prior) -> Option<PairType> {
    match prior {
        Prior::NonOverlapping if (observed > 0.0) != (own > 0.0) => Some(PairType {
            xi: 0,
            estimated: true,
        }),
        _ => None,
    }
}

/// `[[B, 2ξ − 1], [B + L, 0]]`.
pub fn partisan_reward(xi: PairType, b: f64, l: f64) -> Result<RewardMatrix> {
    let base = chicken_reward(b, l)?;
    RewardMatrix::new(base.b(), 2.0 * xi.xi as f64 - 1.0, base.t(), base.p())
}

/// How a pair estimates `ξ` in the demo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inference {
    /// Threshold the full similarity.
    Full,
    /// One randomly chosen component of the partner's opinion; undecided
    /// pairs are treated as `ξ̂ = 1`.
    Partial(Prior),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartisanConfig {
    /// Agents per population; the total must be even.
    pub n_per_population: usize,
    pub dim: usize,
    /// Mean opinion component, `+polarization` in population A and
    /// `−polarization` in B, unit noise.
    pub polarization: f64,
    pub rounds: usize,
    pub big_b: f64,
    pub l: f64,
    /// Initial signal device for both `ξ̂` channels.
    pub j0: JointDist2,
    pub inference: Inference,
    pub seed: u64,
}

/// Per-round cooperation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PartisanRound {
    pub round: usize,
    /// Share of stop actions in same-population pairs.
    pub within_coop: f64,
    /// Share of stop actions in cross-population pairs.
    pub cross_coop: f64,
    /// Share of cross-population pairs estimated as `ξ̂ = 0`.
    pub cross_xi0: f64,
    /// Agents that fell back to the channel's Nash policy.
    pub nash_fallbacks: usize,
}

struct Channel {
    reward: RewardMatrix,
    nash: NashSolution,
    estimate: JointDist2,
}

impl Channel {
    fn policy(&self) -> (Policy, bool) {
        let sf = Policy::signal_following();
        if best_response_per_obs(&sf, &self.estimate, &self.reward).admits(&sf) {
            (sf, true)
        } else {
            (self.nash.policy(2), false)
        }
    }
}

fn sample_cell<R: Rng + ?Sized>(rng: &mut R, j: &JointDist2) -> (usize, usize) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            acc += j.get(r, c);
            if u < acc {
                return (r, c);
            }
        }
    }
    (1, 1)
}

fn sample_action<R: Rng + ?Sized>(rng: &mut R, pi: &Policy, o: usize) -> usize {
    let u: f64 = rng.random();
    (u >= pi.matrix()[(0, o)]) as usize
}

/// Two opinion camps, everyone holding the signal-following norm. Each pair
/// estimates `ξ̂`, reads signals from the device of that channel, and plays
/// the norm if it is rational under the channel's perceived reward
/// (otherwise the channel's Nash policy). Each channel's device is then
/// replaced by its empirical action frequencies.
pub fn demo(config: &PartisanConfig) -> Result<Vec<PartisanRound>> {
    let n = 2 * config.n_per_population;
    if config.n_per_population == 0 || config.dim == 0 {
        return Err(Error::Parameter("need agents and opinion dimensions".into()));
    }
    let mut rng = stream_rng(config.seed, &[0]);
    let noise = Normal::new(0.0, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let opinions: Vec<OpinionVector> = (0..n)
        .map(|i| {
            let mu = if i < config.n_per_population {
                config.polarization
            } else {
                -config.polarization
            };
            OpinionVector::new((0..config.dim).map(|_| mu + noise.sample(&mut rng)).collect())
        })
        .collect::<Result<_>>()?;

    let mut channels: Vec<Channel> = [0u8, 1]
        .into_iter()
        .map(|xi| {
            let reward = partisan_reward(PairType { xi, estimated: true }, config.big_b, config.l)?;
            let nash = best_symmetric_nash(&reward);
            Ok(Channel {
                reward,
                nash,
                estimate: config.j0.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(config.rounds);
    for t in 0..config.rounds {
        let mut rng = stream_rng(config.seed, &[1, t as u64]);
        let pairs = pair_agents(n, &mut rng)?;
        let policies: Vec<(Policy, bool)> = channels.iter().map(Channel::policy).collect();
        let mut counts = [DMatrix::<f64>::zeros(2, 2), DMatrix::<f64>::zeros(2, 2)];
        let (mut within, mut within_stop, mut cross, mut cross_stop, mut cross0) = (0, 0, 0, 0, 0);
        let mut fallbacks = 0;
        for (i, k) in pairs {
            let xi_hat = match config.inference {
                Inference::Full => infer_type(similarity(&opinions[i], &opinions[k])?)?.xi,
                Inference::Partial(prior) => {
                    let c = rng.random_range(0..config.dim);
                    let own = opinions[i].components()[c];
                    let seen = opinions[k].components()[c];
                    infer_type_partial(seen, own, prior).map_or(1, |p| p.xi)
                }
            } as usize;
            let ch = &channels[xi_hat];
            let (pi, ok) = &policies[xi_hat];
            let (o, o2) = sample_cell(&mut rng, &ch.estimate);
            let a = sample_action(&mut rng, pi, o);
            let b = sample_action(&mut rng, pi, o2);
            counts[xi_hat][(a, b)] += 1.0;
            counts[xi_hat][(b, a)] += 1.0;
            fallbacks += 2 * (!ok) as usize;
            let stops = (a == 0) as usize + (b == 0) as usize;
            let same = (i < config.n_per_population) == (k < config.n_per_population);
            if same {
                within += 2;
                within_stop += stops;
            } else {
                cross += 2;
                cross_stop += stops;
                cross0 += (xi_hat == 0) as usize;
            }
        }
        for (ch, c) in channels.iter_mut().zip(&counts) {
            let total = c.sum();
            if total > 0.0 {
                ch.estimate = JointDist2::new(c / total)?;
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
        out.push(PartisanRound {
            round: t,
            within_coop: ratio(within_stop, within),
            cross_coop: ratio(cross_stop, cross),
            cross_xi0: ratio(cross0, cross / 2),
            nash_fallbacks: fallbacks,
        });
    }
    Ok(out)
}
