//! Two-player symmetric 2×2 reward matrices and social-dilemma taxonomy.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Reward to the row player, laid out as `[[B, S], [T, P]]` with action 0 the
/// cooperative action (stop) and action 1 the exploitative one (go).
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    entries: DMatrix<f64>,
}

impl RewardMatrix {
    /// Builds from `(B, S, T, P)`.
    pub fn new(b: f64, s: f64, t: f64, p: f64) -> Result<Self> {
        if ![b, s, t, p].iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("reward entries must be finite".into()));
        }
        Ok(Self {
            entries: DMatrix::from_row_slice(2, 2, &[b, s, t, p]),
        })
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Mutual cooperation.
    pub fn b(&self) -> f64 {
        self.entries[(0, 0)]
    }

    /// Sucker's payoff.
    pub fn s(&self) -> f64 {
        self.entries[(0, 1)]
    }

    /// Temptation.
    pub fn t(&self) -> f64 {
        self.entries[(1, 0)]
    }

    /// Mutual exploitation.
    pub fn p(&self) -> f64 {
        self.entries[(1, 1)]
    }

    /// `αR + β`.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        Self {
            entries: self.entries.map(|v| alpha * v + beta),
        }
    }

    pub fn as_bstp(&self) -> [f64; 4] {
        [self.b(), self.s(), self.t(), self.p()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DilemmaClass {
    NoDilemma,
    Chicken,
    StagHunt,
    PrisonersDilemma,
    NotASocialDilemma,
}

impl fmt::Display for DilemmaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DilemmaClass::NoDilemma => "no-dilemma",
            DilemmaClass::Chicken => "chicken",
            DilemmaClass::StagHunt => "stag-hunt",
            DilemmaClass::PrisonersDilemma => "prisoners-dilemma",
            DilemmaClass::NotASocialDilemma => "not-a-social-dilemma",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DilemmaFlags {
    /// `B > P`
    pub c1: bool,
    /// `B > S`
    pub c2: bool,
    /// `2B > T + S`
    pub c3: bool,
    /// `T > B`
    pub greed: bool,
    /// `P > S`
    pub fear: bool,
    /// At least one of the five comparisons is an exact equality.
    pub tie: bool,
}

pub fn check_dilemma_conditions(r: &RewardMatrix) -> DilemmaFlags {
    let [b, s, t, p] = r.as_bstp();
    let tie = b == p || b == s || 2.0 * b == t + s || t == b || p == s;
    DilemmaFlags {
        c1: b > p,
        c2: b > s,
        c3: 2.0 * b > t + s,
        greed: t > b,
        fear: p > s,
        tie,
    }
}

/// Ties anywhere in the defining comparisons give `NotASocialDilemma`; the
/// `tie` flag of [`check_dilemma_conditions`] says why.
pub fn classify_dilemma(r: &RewardMatrix) -> DilemmaClass {
    let f = check_dilemma_conditions(r);
    if f.tie || !(f.c1 && f.c2 && f.c3) {
        return DilemmaClass::NotASocialDilemma;
    }
    match (f.greed, f.fear) {
        (true, false) => DilemmaClass::Chicken,
        (false, true) => DilemmaClass::StagHunt,
        (true, true) => DilemmaClass::PrisonersDilemma,
        (false, false) => DilemmaClass::NoDilemma,
    }
}

/// Normalized game of chicken `[[B, 1], [B+L, 0]]`.
pub fn chicken_reward(b: f64, l: f64) -> Result<RewardMatrix> {
    if !(b > 1.0) {
        return Err(Error::Parameter(format!("chicken needs B > 1, got {b}")));
    }
    if !(l > 0.0) {
        return Err(Error::Parameter(format!("chicken needs L > 0, got {l}")));
    }
    RewardMatrix::new(b, 1.0, b + l, 0.0)
}

/// Non-fatal parameter diagnostics for [`chicken_reward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChickenWarning {
    /// `L ≥ B − 1`: pure competition pays at least as much as cooperation.
    Condition3 { b: f64, l: f64 },
}

impl fmt::Display for ChickenWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChickenWarning::Condition3 { b, l } => {
                write!(f, "L={l} >= B-1={}: exploitation excess overwhelms cooperation", b - 1.0)
            }
        }
    }
}

pub fn chicken_warning(b: f64, l: f64) -> Option<ChickenWarning> {
    (l >= b - 1.0).then_some(ChickenWarning::Condition3 { b, l })
}

/// Prisoner's dilemma obtained by swapping the second column of the chicken
/// matrix: `[[B, 0], [B+L, 1]]`.
pub fn pd_reward(b: f64, l: f64) -> Result<RewardMatrix> {
    if !(l < b) {
        return Err(Error::Parameter(format!("needs L < B, got L={l}, B={b}")));
    }
    RewardMatrix::new(b, 0.0, b + l, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chicken_conditions() {
        let f = check_dilemma_conditions(&chicken_reward(3.0, 0.5).unwrap());
        assert!(f.c1 && f.c2 && f.c3 && f.greed);
        assert!(!f.fear && !f.tie);

        let zero = RewardMatrix::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let f = check_dilemma_conditions(&zero);
        assert!(!(f.c1 || f.c2 || f.c3 || f.greed || f.fear));
        assert!(f.tie);
        assert_eq!(classify_dilemma(&zero), DilemmaClass::NotASocialDilemma);

        let f = check_dilemma_conditions(&RewardMatrix::from_rows([[3.0, 1.0], [2.0, 0.0]]).unwrap());
        assert!(!f.greed && !f.fear);
    }

    #[test]
    fn classes() {
        let c = |rows| classify_dilemma(&RewardMatrix::from_rows(rows).unwrap());
        assert_eq!(c([[3.0, 1.0], [3.5, 0.0]]), DilemmaClass::Chicken);
        assert_eq!(c([[3.0, -1.0], [2.0, 0.0]]), DilemmaClass::StagHunt);
        assert_eq!(c([[3.0, -1.0], [4.0, 0.0]]), DilemmaClass::PrisonersDilemma);
        assert_eq!(c([[3.0, 1.0], [2.0, 0.0]]), DilemmaClass::NoDilemma);
        // T == B tie
        assert_eq!(c([[3.0, 1.0], [3.0, 0.0]]), DilemmaClass::NotASocialDilemma);
        // condition 3 violated
        assert_eq!(c([[3.0, 1.0], [6.0, 0.0]]), DilemmaClass::NotASocialDilemma);
    }

    #[test]
    fn chicken_construction() {
        let r = chicken_reward(3.0, 0.5).unwrap();
        assert_eq!(r.as_bstp(), [3.0, 1.0, 3.5, 0.0]);
        assert!(chicken_warning(3.0, 0.5).is_none());

        let r = chicken_reward(3.0, 2.0).unwrap();
        assert_eq!(r.as_bstp(), [3.0, 1.0, 5.0, 0.0]);
        assert!(matches!(chicken_warning(3.0, 2.0), Some(ChickenWarning::Condition3 { .. })));
        assert!(!check_dilemma_conditions(&r).c3);

        assert_eq!(chicken_reward(2.0, 0.1).unwrap().as_bstp(), [2.0, 1.0, 2.1, 0.0]);
        assert!(chicken_reward(1.0, 0.5).is_err());
        assert!(chicken_reward(3.0, 0.0).is_err());
    }

    #[test]
    fn prisoners_dilemma_construction() {
        let r = pd_reward(3.0, 0.5).unwrap();
        assert_eq!(r.as_bstp(), [3.0, 0.0, 3.5, 1.0]);
        assert_eq!(classify_dilemma(&r), DilemmaClass::PrisonersDilemma);
        assert_eq!(pd_reward(2.0, 1.9).unwrap().as_bstp(), [2.0, 0.0, 3.9, 1.0]);
        assert!(pd_reward(2.0, 2.0).is_err());
    }

    #[test]
    fn chicken_family_is_chicken() {
        for i in 1..40 {
            let b = 1.0 + 0.1 * i as f64;
            for k in 1..20 {
                let l = (b - 1.0) * k as f64 / 20.0;
                let r = chicken_reward(b, l).unwrap();
                assert_eq!(classify_dilemma(&r), DilemmaClass::Chicken, "B={b} L={l}");
                assert_eq!(r.s(), 1.0);
                assert_eq!(r.p(), 0.0);
            }
        }
    }
}
