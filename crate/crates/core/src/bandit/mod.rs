//! Single-agent learners: EXP3, a no-swap-regret bandit, and a PAC learner.

mod exp3;
mod pac;
mod swap;

pub use exp3::{Estimator, Exp3, LearningRate};
pub use pac::{learn_op, pac_budget, pac_drift_constant, LearnedPolicy, PacLearner};
pub use swap::{stationary_distribution, SwapLearner, STATIONARY_ITERATIONS, STATIONARY_TOL};
