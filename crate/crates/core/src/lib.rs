//! Equilibrium tracking in non-stationary matrix and tabular Markov games.
//!
//! The simulator owns ground-truth games ([`game`]) and evaluates every
//! executed policy exactly ([`dp`]); the learners ([`bandit`], [`oracles`],
//! [`nonstationary`]) only see sampled episodes under bandit feedback.

pub mod bandit;
pub mod dp;
pub mod env;
pub mod episode;
mod error;
pub mod game;
pub mod mdp;
pub mod nonstationary;
pub mod oracles;
pub mod policy;
pub mod sequence;
pub mod trace;

pub use error::{Error, Result};

/// The generator behind every seeded run.
pub type SimRng = rand_chacha::ChaCha8Rng;
