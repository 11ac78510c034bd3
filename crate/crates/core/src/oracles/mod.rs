//! Equilibrium learning and testing oracles for matrix games.

mod adapters;
mod learn;
mod test_eq;

pub use adapters::{
    best_response_env_adapter, extended_mdp, induced_mdp, modification_env_adapter, DeviationAdapter, ObservationMode,
};
pub use learn::{learn_eq, LearnOutcome};
pub use test_eq::{test_eq, estimation_episodes, TestEqRun, TestVerdict};

use crate::bandit::pac_drift_constant;
use crate::dp::EqKind;
use crate::error::{Error, Result};
use crate::game::{Game, Shape};

/// Multiplier in front of the Table-1 order in `c_1`. Calibrated so that the
/// self-play learners hit their target accuracy on random 2x2 and 3x3 games
/// with room to spare.
pub const LEARN_CONSTANT: f64 = 4.0;

/// Drift sensitivity of the self-play learners' output.
pub const LEARN_DRIFT_CONSTANT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Nash equilibrium of a two-player game with `R_2 = 1 - R_1`.
    NeZeroSum,
    Cce,
    Ce,
}

impl ProfileKind {
    pub fn eq_kind(self) -> EqKind {
        match self {
            ProfileKind::NeZeroSum => EqKind::Ne,
            ProfileKind::Cce => EqKind::Cce,
            ProfileKind::Ce => EqKind::Ce,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::NeZeroSum => "ne-zero-sum",
            ProfileKind::Cce => "cce",
            ProfileKind::Ce => "ce",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ne-zero-sum" | "ne" => Some(ProfileKind::NeZeroSum),
            "cce" => Some(ProfileKind::Cce),
            "ce" => Some(ProfileKind::Ce),
            _ => None,
        }
    }
}

/// Budgets of the learning (`C_1 = c_1 eps^alpha`) and testing
/// (`C_2 = c_2 eps^-2`) oracles, with their drift constants.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleProfile {
    pub kind: ProfileKind,
    pub players: usize,
    pub horizon: usize,
    pub delta: f64,
    /// Table-1 order: `A + B`, `A_max`, or `A_max^2`.
    pub order: f64,
    pub c1: f64,
    pub alpha: i32,
    pub c1_delta: f64,
    pub c2: f64,
    pub c2_delta: f64,
}

impl OracleProfile {
    /// `C_1(eps) = ceil(c_1 eps^alpha)`, at least 1.
    pub fn learn_budget(&self, eps: f64) -> u64 {
        ((self.c1 * eps.powi(self.alpha)).ceil() as u64).max(1)
    }

    /// `C_2(eps) = ceil(c_2 / eps^2)`, at least 1.
    pub fn test_budget(&self, eps: f64) -> u64 {
        ((self.c2 / (eps * eps)).ceil() as u64).max(1)
    }

    /// Whether `game` meets this profile's structural requirement.
    pub fn check_game(&self, game: &Game) -> Result<()> {
        if !game.is_matrix() {
            return Err(Error::Structure(format!(
                "the {} learner is defined for matrix games only",
                self.kind.name()
            )));
        }
        if self.kind == ProfileKind::NeZeroSum && !game.is_zero_sum(1e-12) {
            return Err(Error::Structure(
                "ne-zero-sum requires two players with R_2 = 1 - R_1".into(),
            ));
        }
        if game.shape().players() != self.players {
            return Err(Error::Structure("player count differs from the profile".into()));
        }
        Ok(())
    }
}

/// Testing constant for a game of this shape: phase-one and phase-three
/// estimation, one PAC learner per player on its adapter, and slack for the
/// rounding of each phase.
fn test_constant(kind: ProfileKind, shape: &Shape, delta: f64) -> f64 {
    let m = shape.players() as f64;
    let h = shape.horizon() as f64;
    let estimation = (1.0 + m) * 18.0 * h * h * (4.0 * m / delta).ln();
    let learning: f64 = (0..shape.players())
        .map(|i| {
            let a = shape.num_actions(i) as f64;
            let s = shape.states() as f64 * if kind == ProfileKind::Ce { a } else { 1.0 };
            72.0 * h.powi(3) * s * a * (4.0 * m * s * a * h / delta).ln()
        })
        .sum();
    estimation + learning + (2.0 * m + 1.0) * h * h
}

/// Profile for a matrix-game shape.
pub fn profile_for(kind: ProfileKind, shape: &Shape, delta: f64) -> Result<OracleProfile> {
    if shape.horizon() != 1 || shape.states() != 1 {
        return Err(Error::Structure(format!(
            "no built-in {} learner for Markov games; plug one in through the oracle interface",
            kind.name()
        )));
    }
    let m = shape.players();
    let order = match kind {
        ProfileKind::NeZeroSum => {
            if m != 2 {
                return Err(Error::Structure("ne-zero-sum requires exactly two players".into()));
            }
            (shape.num_actions(0) + shape.num_actions(1)) as f64
        }
        ProfileKind::Cce => shape.max_actions() as f64,
        ProfileKind::Ce => (shape.max_actions() * shape.max_actions()) as f64,
    };
    let c1 = LEARN_CONSTANT * order * (2.0 * m as f64 / delta).ln();
    // The tester's drift sensitivity is inherited from its PAC learner.
    let c2_delta = pac_drift_constant(shape.horizon());
    Ok(OracleProfile {
        kind,
        players: m,
        horizon: shape.horizon(),
        delta,
        order,
        c1,
        alpha: -2,
        c1_delta: LEARN_DRIFT_CONSTANT,
        c2: test_constant(kind, shape, delta),
        c2_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_orders() {
        let s22 = Shape::matrix(vec![2, 2]).unwrap();
        let s33 = Shape::matrix(vec![3, 3]).unwrap();
        assert_eq!(profile_for(ProfileKind::NeZeroSum, &s22, 0.1).unwrap().order, 4.0);
        assert_eq!(profile_for(ProfileKind::Cce, &s33, 0.1).unwrap().order, 3.0);
        assert_eq!(profile_for(ProfileKind::Ce, &s33, 0.1).unwrap().order, 9.0);
    }

    #[test]
    fn learn_budget_for_a_two_by_two_game() {
        let s22 = Shape::matrix(vec![2, 2]).unwrap();
        let p = profile_for(ProfileKind::NeZeroSum, &s22, 0.1).unwrap();
        // ceil(4 * 4 * ln 40 * 100)
        assert_eq!(p.learn_budget(0.1), 5903);
    }

    #[test]
    fn tester_drift_constant_is_the_learners() {
        let s22 = Shape::matrix(vec![2, 2]).unwrap();
        let p = profile_for(ProfileKind::Ce, &s22, 0.1).unwrap();
        assert_eq!(p.c2_delta, pac_drift_constant(1));
    }

    #[test]
    fn test_budget_scales_with_inverse_square() {
        let s22 = Shape::matrix(vec![2, 2]).unwrap();
        let p = profile_for(ProfileKind::Cce, &s22, 0.1).unwrap();
        assert!(p.test_budget(0.2) <= p.test_budget(0.1));
        let exact = |e: f64| p.c2 / (e * e);
        assert!((exact(0.1) / exact(0.2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn markov_shapes_are_unsupported() {
        let s = Shape::new(2, 2, vec![2, 2]).unwrap();
        assert!(profile_for(ProfileKind::Cce, &s, 0.1).is_err());
        let s3 = Shape::matrix(vec![2, 2, 2]).unwrap();
        assert!(profile_for(ProfileKind::NeZeroSum, &s3, 0.1).is_err());
    }
}
