use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::sample_index;

/// How the played arm's feedback is turned into an unbiased estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Gain `r / p(a)` added to the arm's log-weight.
    Gain,
    /// Loss `(1 - r) / p(a)` subtracted from the arm's log-weight, so a zero
    /// reward moves mass away from the played arm.
    #[default]
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Fixed(f64),
    /// `eta = sqrt(ln A / (T A))` for a known number of rounds `T`.
    Horizon(u64),
    /// Rate tuned for epochs of length `1, 2, 4, ...`, with a fresh start at
    /// the beginning of each epoch.
    Doubling,
}

fn tuned_rate(arms: usize, rounds: u64) -> f64 {
    ((arms as f64).ln() / (rounds.max(1) as f64 * arms as f64)).sqrt()
}

/// Exponential weights over importance-weighted estimates, kept in log space.
#[derive(Debug, Clone)]
pub struct Exp3 {
    log_weights: Vec<f64>,
    probs: Vec<f64>,
    eta: f64,
    gamma: f64,
    rate: LearningRate,
    estimator: Estimator,
    round: u64,
    epoch_end: u64,
}

impl Exp3 {
    pub fn new(arms: usize, rate: LearningRate, gamma: f64, estimator: Estimator) -> Self {
        assert!(arms > 0, "EXP3 needs at least one arm");
        assert!((0.0..=1.0).contains(&gamma), "exploration mix must lie in [0, 1]");
        let (eta, epoch_end) = match rate {
            LearningRate::Fixed(eta) => (eta, u64::MAX),
            LearningRate::Horizon(t) => (tuned_rate(arms, t), u64::MAX),
            LearningRate::Doubling => (tuned_rate(arms, 1), 1),
        };
        Self {
            log_weights: vec![0.0; arms],
            probs: vec![1.0 / arms as f64; arms],
            eta,
            gamma,
            rate,
            estimator,
            round: 0,
            epoch_end,
        }
    }

    /// Loss-based EXP3 tuned for `rounds` rounds, no explicit exploration.
    pub fn with_horizon(arms: usize, rounds: u64) -> Self {
        Self::new(arms, LearningRate::Horizon(rounds), 0.0, Estimator::Loss)
    }

    pub fn arms(&self) -> usize {
        self.probs.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }

    /// Bandit update from the played arm's reward.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.check_arm(arm)?;
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardRange(reward));
        }
        let p = self.probs[arm];
        match self.estimator {
            Estimator::Gain => self.apply(arm, self.eta * reward / p),
            Estimator::Loss => self.apply(arm, -self.eta * (1.0 - reward) / p),
        }
        Ok(())
    }

    /// Update from an externally importance-weighted loss estimate.
    pub fn update_loss_estimate(&mut self, arm: usize, loss: f64) -> Result<()> {
        self.check_arm(arm)?;
        self.apply(arm, -self.eta * loss);
        Ok(())
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.arms() {
            return Err(Error::ArmOutOfRange {
                arm,
                arms: self.arms(),
            });
        }
        Ok(())
    }

    fn apply(&mut self, arm: usize, delta: f64) {
        self.log_weights[arm] += delta;
        self.round += 1;
        if self.round >= self.epoch_end {
            if let LearningRate::Doubling = self.rate {
                let len = self.epoch_end.saturating_mul(2).min(u64::MAX / 4);
                self.eta = tuned_rate(self.arms(), len);
                self.epoch_end = self.round + len;
                self.log_weights.iter_mut().for_each(|w| *w = 0.0);
            }
        }
        self.refresh();
    }

    fn refresh(&mut self) {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, w) in self.probs.iter_mut().zip(&self.log_weights) {
            *p = (w - max).exp();
            total += *p;
        }
        let a = self.probs.len() as f64;
        for p in &mut self.probs {
            *p = (1.0 - self.gamma) * (*p / total) + self.gamma / a;
        }
    }
}
