use thiserror::Error;

use crate::game::GameError;
use crate::policy::PolicyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    /// The episode stream ended before the caller was done with it.
    #[error("episode stream exhausted")]
    Exhausted,
    #[error("player {player} chose action {action} at step {step}, but has only {available}")]
    ActionOutOfRange {
        player: usize,
        step: usize,
        action: usize,
        available: usize,
    },
    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("reward {0} outside [0, 1]")]
    RewardRange(f64),
    #[error("stationary distribution did not converge (residual {residual:e})")]
    Stationary { residual: f64 },
    #[error("{0}")]
    Structure(String),
    #[error("episode {episode}: {source}")]
    AtEpisode {
        episode: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_episode(self, episode: usize) -> Self {
        match self {
            already @ Error::AtEpisode { .. } => already,
            other => Error::AtEpisode {
                episode,
                source: Box::new(other),
            },
        }
    }

    /// Whether this error (possibly wrapped) is stream exhaustion.
    pub fn is_exhausted(&self) -> bool {
        match self {
            Error::Exhausted => true,
            Error::AtEpisode { source, .. } => source.is_exhausted(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
