//! Social norms as correlated equilibria of repeated two-player games.
//!
//! Layers, bottom up: probability objects ([`probkit`]), reward matrices
//! ([`games`]), policies and norms ([`norms`]), the norm payoff matrix
//! ([`payoff`]), replicator dynamics ([`replicator`]), parameter sweeps
//! ([`sweep`]), the closed-loop agent simulation ([`abm`]) and the partisan
//! extension ([`partisan`]). [`csvio`] reads and writes every output table.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abm;
pub mod csvio;
pub mod error;
pub mod games;
pub mod norms;
pub mod partisan;
pub mod payoff;
pub mod probkit;
pub mod replicator;
pub mod seeding;
pub mod sweep;

pub use error::{Error, Result};
pub use games::{chicken_reward, classify_dilemma, pd_reward, DilemmaClass, RewardMatrix};
pub use norms::{
    classify_all, enumerate_norms, is_rational, mixed_nash_chicken, NashSolution, Norm, NormClass,
    Policy,
};
pub use payoff::{build_gamma, chicken_gamma_closed_form, PayoffMatrix, Strategy};
pub use probkit::{mutual_information, signal_dist, CondDist, JointDist2, Marginal, SignalParams};
pub use replicator::{
    basin_sample, integrate, vertex_spectrum, Dynamics, IntegrateOptions, SimplexState, Spectrum,
    Stability, TerminalLabel, Trajectory,
};
pub use sweep::{Axis, GridSpec};
