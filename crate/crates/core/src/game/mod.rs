//! Ground-truth tabular Markov games.
//!
//! A [`Game`] is the tuple `(S, A_1 x ... x A_m, H, P, R)` with a fixed initial
//! state `0`. Horizon one with a single state is a matrix game. The simulator
//! owns the game; learners only ever see sampled episodes.

mod distance;
pub mod families;
mod shape;
mod text;

pub use distance::game_distance;
pub use shape::Shape;
pub use text::{parse_game, write_game};

use std::fmt;

use thiserror::Error;

/// Tolerance used for every probability-table check.
pub const PROB_TOL: f64 = 1e-12;

/// How realized rewards are drawn from the mean table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RewardNoise {
    /// `r ~ Bernoulli(R)`, so realized rewards lie in `{0, 1}`.
    #[default]
    Bernoulli,
    /// `r = R` exactly.
    Deterministic,
}

impl RewardNoise {
    pub fn name(self) -> &'static str {
        match self {
            RewardNoise::Bernoulli => "bernoulli",
            RewardNoise::Deterministic => "deterministic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "bernoulli" => Some(RewardNoise::Bernoulli),
            "deterministic" => Some(RewardNoise::Deterministic),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("table length mismatch for {table}: expected {expected}, got {actual}")]
    TableLength {
        table: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("game violates {} invariant(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
    #[error("shape mismatch between games or policy")]
    ShapeMismatch,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("infeasible drift budget {requested} (profile maximum {maximum})")]
    InfeasibleBudget { requested: f64, maximum: f64 },
    #[error("invalid switch schedule: {0}")]
    Schedule(String),
    #[error("{0}")]
    Unsupported(String),
}

/// One failed invariant of a game's tables. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TransitionSum {
        step: usize,
        state: usize,
        joint: usize,
        sum: f64,
    },
    NegativeTransition {
        step: usize,
        state: usize,
        joint: usize,
        next: usize,
        value: f64,
    },
    RewardRange {
        step: usize,
        state: usize,
        joint: usize,
        player: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TransitionSum {
                step,
                state,
                joint,
                sum,
            } => write!(
                f,
                "P[{step}]( . | s={state}, a={joint}) sums to {sum}, expected 1"
            ),
            Violation::NegativeTransition {
                step,
                state,
                joint,
                next,
                value,
            } => write!(
                f,
                "P[{step}](s'={next} | s={state}, a={joint}) = {value} is negative"
            ),
            Violation::RewardRange {
                step,
                state,
                joint,
                player,
                value,
            } => write!(
                f,
                "R[{step}][player {player}](s={state}, a={joint}) = {value} outside [0, 1]"
            ),
        }
    }
}

/// A finite-horizon tabular Markov game with mean rewards in `[0, 1]`.
///
/// Transition rows are stored at `((h * S + s) * J + j) * S + s'` and rewards at
/// `((h * S + s) * J + j) * m + i`, where `J` is the joint action count.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    shape: Shape,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    noise: RewardNoise,
}

impl Game {
    /// Builds a game and rejects it if any invariant fails.
    pub fn new(
        shape: Shape,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        noise: RewardNoise,
    ) -> Result<Self, GameError> {
        let game = Self::new_unchecked(shape, transitions, rewards, noise)?;
        let violations = game.validate();
        if violations.is_empty() {
            Ok(game)
        } else {
            Err(GameError::Invalid(violations))
        }
    }

    /// Builds a game checking only table lengths. Use [`Game::validate`] to
    /// inspect the remaining invariants.
    pub fn new_unchecked(
        shape: Shape,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        noise: RewardNoise,
    ) -> Result<Self, GameError> {
        let rows = shape.horizon() * shape.states() * shape.joint_actions();
        let expected_p = rows * shape.states();
        let expected_r = rows * shape.players();
        if transitions.len() != expected_p {
            return Err(GameError::TableLength {
                table: "transitions",
                expected: expected_p,
                actual: transitions.len(),
            });
        }
        if rewards.len() != expected_r {
            return Err(GameError::TableLength {
                table: "rewards",
                expected: expected_r,
                actual: rewards.len(),
            });
        }
        Ok(Self {
            shape,
            transitions,
            rewards,
            noise,
        })
    }

    /// Matrix game (one state, horizon one). `rewards` is indexed
    /// `joint * m + player`.
    pub fn matrix(actions: &[usize], rewards: Vec<f64>, noise: RewardNoise) -> Result<Self, GameError> {
        let shape = Shape::new(1, 1, actions.to_vec())?;
        let transitions = vec![1.0; shape.joint_actions()];
        Self::new(shape, transitions, rewards, noise)
    }

    /// Two-player matrix game from per-player payoff matrices `[row][col]`.
    pub fn bimatrix(row: &[Vec<f64>], col: &[Vec<f64>], noise: RewardNoise) -> Result<Self, GameError> {
        let a = row.len();
        let b = row.first().map_or(0, Vec::len);
        if col.len() != a || row.iter().chain(col).any(|r| r.len() != b) {
            return Err(GameError::Shape("payoff matrices must be a x b".into()));
        }
        let mut rewards = Vec::with_capacity(2 * a * b);
        for i in 0..a {
            for j in 0..b {
                rewards.push(row[i][j]);
                rewards.push(col[i][j]);
            }
        }
        Self::matrix(&[a, b], rewards, noise)
    }

    /// Every invariant violation, in table order.
    pub fn validate(&self) -> Vec<Violation> {
        let s_count = self.shape.states();
        let j_count = self.shape.joint_actions();
        let m = self.shape.players();
        let mut violations = Vec::new();
        for h in 0..self.shape.horizon() {
            for s in 0..s_count {
                for j in 0..j_count {
                    let row = self.transition(h, s, j);
                    let mut sum = 0.0;
                    for (next, &p) in row.iter().enumerate() {
                        if p < 0.0 {
                            violations.push(Violation::NegativeTransition {
                                step: h,
                                state: s,
                                joint: j,
                                next,
                                value: p,
                            });
                        }
                        sum += p;
                    }
                    if !((sum - 1.0).abs() <= PROB_TOL) {
                        violations.push(Violation::TransitionSum {
                            step: h,
                            state: s,
                            joint: j,
                            sum,
                        });
                    }
                    for i in 0..m {
                        let r = self.reward(h, s, j, i);
                        if !(0.0..=1.0).contains(&r) {
                            violations.push(Violation::RewardRange {
                                step: h,
                                state: s,
                                joint: j,
                                player: i,
                                value: r,
                            });
                        }
                    }
                }
            }
        }
        violations
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    pub fn with_noise(mut self, noise: RewardNoise) -> Self {
        self.noise = noise;
        self
    }

    pub fn initial_state(&self) -> usize {
        0
    }

    fn row(&self, h: usize, s: usize, j: usize) -> usize {
        (h * self.shape.states() + s) * self.shape.joint_actions() + j
    }

    /// Next-state distribution `P_h( . | s, a)`.
    pub fn transition(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let n = self.shape.states();
        let base = self.row(h, s, joint) * n;
        &self.transitions[base..base + n]
    }

    /// Mean rewards of every player at `(h, s, a)`.
    pub fn rewards_at(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let m = self.shape.players();
        let base = self.row(h, s, joint) * m;
        &self.rewards[base..base + m]
    }

    pub fn reward(&self, h: usize, s: usize, joint: usize, player: usize) -> f64 {
        self.rewards[self.row(h, s, joint) * self.shape.players() + player]
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transitions
    }

    pub fn reward_table(&self) -> &[f64] {
        &self.rewards
    }

    /// Convex combination `(1 - lambda) * self + lambda * other`.
    pub fn interpolate(&self, other: &Game, lambda: f64) -> Result<Game, GameError> {
        if self.shape != other.shape {
            return Err(GameError::ShapeMismatch);
        }
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| if x == y { *x } else { x + lambda * (y - x) })
                .collect()
        };
        Ok(Game {
            shape: self.shape.clone(),
            transitions: mix(&self.transitions, &other.transitions),
            rewards: mix(&self.rewards, &other.rewards),
            noise: self.noise,
        })
    }

    /// Two players with `R_2 = 1 - R_1` everywhere (rescaled zero-sum).
    pub fn is_zero_sum(&self, tol: f64) -> bool {
        self.shape.players() == 2
            && self
                .rewards
                .chunks_exact(2)
                .all(|r| (r[0] + r[1] - 1.0).abs() <= tol)
    }

    /// One state and horizon one.
    pub fn is_matrix(&self) -> bool {
        self.shape.horizon() == 1 && self.shape.states() == 1
    }
}

/// All invariant violations of `game`; empty means valid.
pub fn validate_game(game: &Game) -> Vec<Violation> {
    game.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies_is_valid() {
        let g = families::matching_pennies();
        assert!(validate_game(&g).is_empty());
        assert!(g.is_zero_sum(1e-12));
        assert!(g.is_matrix());
    }

    #[test]
    fn short_transition_row_is_reported_with_its_index() {
        let shape = Shape::new(1, 2, vec![1]).unwrap();
        // step 0, state 1 sums to 0.9
        let p = vec![0.5, 0.5, 0.4, 0.5];
        let g = Game::new_unchecked(shape, p, vec![0.5, 0.5], RewardNoise::Deterministic).unwrap();
        let v = g.validate();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::TransitionSum { step, state, joint, sum } => {
                assert_eq!((*step, *state, *joint), (0, 1, 0));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reward_above_one_is_a_range_violation() {
        let shape = Shape::new(1, 1, vec![2]).unwrap();
        let g = Game::new_unchecked(shape, vec![1.0, 1.0], vec![1.2, 0.3], RewardNoise::Bernoulli)
            .unwrap();
        assert_eq!(
            g.validate(),
            vec![Violation::RewardRange {
                step: 0,
                state: 0,
                joint: 0,
                player: 0,
                value: 1.2
            }]
        );
        assert!(matches!(
            Game::matrix(&[2], vec![1.2, 0.3], RewardNoise::Bernoulli),
            Err(GameError::Invalid(_))
        ));
    }

    #[test]
    fn negative_entries_and_nan_are_caught() {
        let shape = Shape::new(1, 2, vec![1]).unwrap();
        let p = vec![1.5, -0.5, f64::NAN, 1.0];
        let g = Game::new_unchecked(shape, p, vec![0.0, f64::NAN], RewardNoise::Bernoulli).unwrap();
        let v = g.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::NegativeTransition { next: 1, .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::TransitionSum { state: 1, .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::RewardRange { state: 1, .. })));
    }

    #[test]
    fn table_lengths_are_checked() {
        let shape = Shape::new(1, 1, vec![2, 2]).unwrap();
        let err = Game::new_unchecked(shape, vec![1.0; 3], vec![0.0; 8], RewardNoise::Bernoulli);
        assert!(matches!(err, Err(GameError::TableLength { table: "transitions", .. })));
    }

    #[test]
    fn interpolation_stays_valid() {
        let a = families::matching_pennies();
        let b = families::prisoners_dilemma();
        let mid = a.interpolate(&b, 0.25).unwrap();
        assert!(mid.validate().is_empty());
        assert!((mid.reward(0, 0, 0, 0) - (0.75 * 1.0 + 0.25 * 0.6)).abs() < 1e-15);
    }
}
