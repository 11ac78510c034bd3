//! Non-stationary game sequences `M^1, ..., M^T`.

use std::borrow::Cow;

use crate::game::{game_distance, Game, GameError, Shape};

/// Shape of the interpolation path in a drift sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftProfile {
    /// `lambda` grows linearly from 0 to its peak over the whole run.
    Linear,
    /// Quadratic ease-out: most of the movement happens early.
    FrontLoaded,
    /// `lambda` jumps between 0 and its peak at `bursts` evenly spaced episodes.
    AbruptBursts { bursts: usize },
}

impl DriftProfile {
    /// Total variation of `lambda` as a multiple of the peak interpolation weight.
    fn travel(self) -> f64 {
        match self {
            DriftProfile::Linear | DriftProfile::FrontLoaded => 1.0,
            DriftProfile::AbruptBursts { bursts } => bursts as f64,
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Pieces {
        bases: Vec<Game>,
        /// First episode of every piece after the first.
        switch_times: Vec<usize>,
    },
    Drift {
        g0: Game,
        g1: Game,
        /// One weight per episode.
        lambdas: Vec<f64>,
        /// Version number per episode: increments whenever `lambda` changes.
        versions: Vec<u32>,
    },
}

/// A finite game sequence with its realized non-stationarity budgets.
#[derive(Debug, Clone)]
pub struct GameSequence {
    len: usize,
    source: Source,
    switches: usize,
    variation: f64,
}

impl GameSequence {
    /// The same game for all `len` episodes.
    pub fn stationary(game: Game, len: usize) -> Self {
        Self {
            len,
            source: Source::Pieces {
                bases: vec![game],
                switch_times: Vec::new(),
            },
            switches: 0,
            variation: 0.0,
        }
    }

    /// Piecewise-stationary sequence. Piece `k` (starting at 0) uses
    /// `bases[k % bases.len()]`; piece `k >= 1` starts at episode
    /// `switch_times[k - 1]` (episodes are numbered from 1).
    pub fn switching(bases: Vec<Game>, switch_times: Vec<usize>, len: usize) -> Result<Self, GameError> {
        let first = bases
            .first()
            .ok_or_else(|| GameError::Schedule("at least one base game is required".into()))?;
        if bases.iter().any(|g| g.shape() != first.shape()) {
            return Err(GameError::ShapeMismatch);
        }
        let mut prev = 1;
        for &t in &switch_times {
            if t <= prev || t > len {
                return Err(GameError::Schedule(format!(
                    "switch times must be strictly increasing within [2, {len}], got {t} after {prev}"
                )));
            }
            prev = t;
        }
        let mut variation = 0.0;
        for k in 1..=switch_times.len() {
            let d = game_distance(&bases[(k - 1) % bases.len()], &bases[k % bases.len()])?;
            if d == 0.0 {
                return Err(GameError::Schedule(format!(
                    "piece {k} repeats the previous game, so the switch at episode {} is not a change",
                    switch_times[k - 1]
                )));
            }
            variation += d;
        }
        Ok(Self {
            len,
            switches: switch_times.len(),
            source: Source::Pieces { bases, switch_times },
            variation,
        })
    }

    /// Drift along the segment from `g0` to `g1` with total variation `budget`.
    pub fn drift(g0: Game, g1: Game, budget: f64, len: usize, profile: DriftProfile) -> Result<Self, GameError> {
        let d = game_distance(&g0, &g1)?;
        let maximum = d * profile.travel();
        if !(budget >= 0.0) || budget > maximum + 1e-12 || len == 0 {
            return Err(GameError::InfeasibleBudget {
                requested: budget,
                maximum,
            });
        }
        let peak = if maximum == 0.0 {
            0.0
        } else {
            (budget / maximum).min(1.0)
        };
        let denom = (len.max(2) - 1) as f64;
        let lambdas: Vec<f64> = match profile {
            DriftProfile::Linear => (0..len).map(|t| peak * t as f64 / denom).collect(),
            DriftProfile::FrontLoaded => (0..len)
                .map(|t| {
                    let x = t as f64 / denom;
                    peak * (1.0 - (1.0 - x) * (1.0 - x))
                })
                .collect(),
            DriftProfile::AbruptBursts { bursts } => {
                let gap = len / (bursts + 1);
                if bursts > 0 && gap == 0 {
                    return Err(GameError::Schedule(format!("{bursts} bursts do not fit in {len} episodes")));
                }
                (0..len)
                    .map(|t| {
                        let k = if gap == 0 { 0 } else { (t / gap).min(bursts) };
                        if k % 2 == 1 {
                            peak
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        };
        let mut versions = Vec::with_capacity(len);
        let mut switches = 0;
        let mut travel = 0.0;
        for t in 0..len {
            if t > 0 && lambdas[t] != lambdas[t - 1] {
                switches += 1;
                travel += (lambdas[t] - lambdas[t - 1]).abs();
            }
            versions.push(switches as u32);
        }
        Ok(Self {
            len,
            source: Source::Drift {
                g0,
                g1,
                lambdas,
                versions,
            },
            switches,
            variation: travel * d,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn shape(&self) -> &Shape {
        match &self.source {
            Source::Pieces { bases, .. } => bases[0].shape(),
            Source::Drift { g0, .. } => g0.shape(),
        }
    }

    /// Stored switch count `L`.
    pub fn switch_count(&self) -> usize {
        self.switches
    }

    /// Stored total variation `Delta`.
    pub fn variation(&self) -> f64 {
        self.variation
    }

    /// Identifier that changes exactly when the game changes; `t` starts at 1.
    pub fn version(&self, t: usize) -> u32 {
        assert!(t >= 1 && t <= self.len, "episode {t} outside 1..={}", self.len);
        match &self.source {
            Source::Pieces { switch_times, .. } => switch_times.partition_point(|&s| s <= t) as u32,
            Source::Drift { versions, .. } => versions[t - 1],
        }
    }

    /// The game `M^t`; `t` starts at 1.
    pub fn game(&self, t: usize) -> Cow<'_, Game> {
        let v = self.version(t) as usize;
        match &self.source {
            Source::Pieces { bases, .. } => Cow::Borrowed(&bases[v % bases.len()]),
            Source::Drift { g0, g1, lambdas, .. } => {
                let lambda = lambdas[t - 1];
                if lambda == 0.0 {
                    Cow::Borrowed(g0)
                } else {
                    Cow::Owned(g0.interpolate(g1, lambda).expect("shapes checked at construction"))
                }
            }
        }
    }

    /// Episodes `t` at which `M^t` differs from `M^{t-1}`.
    pub fn change_points(&self) -> Vec<usize> {
        match &self.source {
            Source::Pieces { switch_times, .. } => switch_times.clone(),
            Source::Drift { versions, .. } => (1..versions.len())
                .filter(|&k| versions[k] != versions[k - 1])
                .map(|k| k + 1)
                .collect(),
        }
    }

    /// Recomputes `(L, Delta)` from the materialized sequence.
    pub fn audit(&self) -> (usize, f64) {
        let mut switches = 0;
        let mut variation = 0.0;
        let mut prev = self.game(1).into_owned();
        for t in 2..=self.len {
            if self.version(t) == self.version(t - 1) {
                continue;
            }
            let cur = self.game(t).into_owned();
            let d = game_distance(&prev, &cur).expect("uniform shapes");
            if d > 0.0 {
                switches += 1;
                variation += d;
            }
            prev = cur;
        }
        (switches, variation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::families;

    #[test]
    fn single_base_has_no_budget() {
        let s = GameSequence::switching(vec![families::chicken()], vec![], 50).unwrap();
        assert_eq!((s.switch_count(), s.variation()), (0, 0.0));
        assert_eq!(s.audit(), (0, 0.0));
    }

    #[test]
    fn one_switch_costs_the_distance() {
        let (a, b) = families::dominance_flip_pair();
        let d = game_distance(&a, &b).unwrap();
        let s = GameSequence::switching(vec![a.clone(), b.clone()], vec![10], 20).unwrap();
        assert_eq!(s.switch_count(), 1);
        assert!((s.variation() - d).abs() < 1e-12);
        assert_eq!(s.game(9).as_ref(), &a);
        assert_eq!(s.game(10).as_ref(), &b);
        assert_eq!(s.change_points(), vec![10]);
    }

    #[test]
    fn bad_switch_times_are_rejected() {
        let (a, b) = families::dominance_flip_pair();
        assert!(GameSequence::switching(vec![a.clone(), b.clone()], vec![1], 20).is_err());
        assert!(GameSequence::switching(vec![a.clone(), b.clone()], vec![5, 5], 20).is_err());
        assert!(GameSequence::switching(vec![a.clone(), b], vec![21], 20).is_err());
        assert!(GameSequence::switching(vec![a], vec![4], 20).is_err());
    }

    #[test]
    fn linear_drift_realizes_the_full_distance() {
        let g0 = families::matching_pennies();
        let g1 = families::coordination();
        let d = game_distance(&g0, &g1).unwrap();
        let s = GameSequence::drift(g0, g1, d, 200, DriftProfile::Linear).unwrap();
        assert!((s.variation() - d).abs() < 1e-9);
        let (l, v) = s.audit();
        assert_eq!(l, 199);
        assert!((v - s.variation()).abs() < 1e-9);
    }

    #[test]
    fn drift_budget_is_capped_by_the_profile() {
        let g0 = families::matching_pennies();
        let g1 = families::coordination();
        let d = game_distance(&g0, &g1).unwrap();
        let err = GameSequence::drift(g0.clone(), g1.clone(), 1.5 * d, 100, DriftProfile::FrontLoaded);
        assert!(matches!(err, Err(GameError::InfeasibleBudget { .. })));
        let s = GameSequence::drift(g0, g1, 2.5 * d, 100, DriftProfile::AbruptBursts { bursts: 3 }).unwrap();
        assert_eq!(s.switch_count(), 3);
        assert!(s.variation() <= 2.5 * d + 1e-9);
    }
}
