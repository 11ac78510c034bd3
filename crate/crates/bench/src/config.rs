//! Experiment configuration files.
//!
//! A config is a TOML document with four sections:
//!
//! ```toml
//! [game]
//! family = "dominance-flip"
//!
//! [schedule]
//! kind = "switching"
//! switches = 3
//!
//! [algorithm]
//! name = "multiscale"
//! kind = "ne"
//!
//! [run]
//! T = 16384
//! seeds = [0, 1, 2]
//! ```
//!
//! Every key outside the documented set is an error.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use neq_core::game::RewardNoise;
use neq_core::oracles::ProfileKind;
use neq_core::sequence::DriftProfile;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    MatchingPennies,
    PrisonersDilemma,
    Chicken,
    Coordination,
    /// Two zero-sum games with saddle points in opposite corners.
    DominanceFlip,
    RandomZeroSum,
    RandomMatrix,
    /// A game in the text format, read from `game.path`.
    File,
}

impl Family {
    fn is_random(self) -> bool {
        matches!(self, Family::RandomZeroSum | Family::RandomMatrix)
    }

    fn has_partner(self) -> bool {
        self.is_random() || self == Family::DominanceFlip
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    Bernoulli,
    Deterministic,
}

impl From<Noise> for RewardNoise {
    fn from(n: Noise) -> Self {
        match n {
            Noise::Bernoulli => RewardNoise::Bernoulli,
            Noise::Deterministic => RewardNoise::Deterministic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub family: Family,
    /// Action counts for the random families. Random zero-sum games take two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<usize>>,
    /// Seed for drawing random games. Without it every run seed draws its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_noise")]
    pub noise: Noise,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn default_noise() -> Noise {
    Noise::Bernoulli
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Stationary,
    Switching,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftShape {
    Linear,
    FrontLoaded,
    Bursts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    /// Number of evenly spaced switches; piece `k` starts at `k T / (L + 1) + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switches: Option<usize>,
    /// Explicit first episodes of every piece after the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_times: Option<Vec<usize>>,
    /// Total variation of a drift sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<DriftShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bursts: Option<usize>,
}

impl ScheduleSpec {
    pub fn stationary() -> Self {
        Self {
            kind: ScheduleKind::Stationary,
            switches: None,
            switch_times: None,
            budget: None,
            profile: None,
            bursts: None,
        }
    }

    pub fn drift_profile(&self) -> DriftProfile {
        match self.profile.unwrap_or(DriftShape::Linear) {
            DriftShape::Linear => DriftProfile::Linear,
            DriftShape::FrontLoaded => DriftProfile::FrontLoaded,
            DriftShape::Bursts => DriftProfile::AbruptBursts {
                bursts: self.bursts.unwrap_or(1),
            },
        }
    }

    /// Switch times for a run of `horizon` episodes.
    pub fn switch_times_for(&self, horizon: usize) -> Vec<usize> {
        if let Some(times) = &self.switch_times {
            return times.clone();
        }
        let l = self.switches.unwrap_or(0);
        (1..=l).map(|k| k * horizon / (l + 1) + 1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmName {
    RestartEtc,
    Multiscale,
    ObliviousBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EqChoice {
    /// Nash equilibrium of a two-player zero-sum game.
    Ne,
    Cce,
    Ce,
}

impl From<EqChoice> for ProfileKind {
    fn from(k: EqChoice) -> Self {
        match k {
            EqChoice::Ne => ProfileKind::NeZeroSum,
            EqChoice::Cce => ProfileKind::Cce,
            EqChoice::Ce => ProfileKind::Ce,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    pub kind: EqChoice,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Known variation budget; required by restart-etc.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    /// Learning accuracy of the oblivious baseline.
    #[serde(default = "default_baseline_eps")]
    pub baseline_epsilon: f64,
    /// Overrides the testing constant `c_2` of the multiscale schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_constant: Option<f64>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_baseline_eps() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    #[serde(default = "ScheduleSpec::stationary")]
    pub schedule: ScheduleSpec,
    pub algorithm: AlgorithmSpec,
    pub run: RunSpec,
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml())
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every violated constraint, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = &self.game;
        if g.family == Family::File && g.path.is_none() {
            out.push("game.path is required for family \"file\"".to_string());
        }
        if g.family != Family::File && g.path.is_some() {
            out.push("game.path is only used by family \"file\"".to_string());
        }
        if let Some(actions) = &g.actions {
            if !g.family.is_random() {
                out.push("game.actions is only used by the random families".to_string());
            }
            if actions.contains(&0) {
                out.push("game.actions must be positive".to_string());
            }
            if g.family == Family::RandomZeroSum && actions.len() != 2 {
                out.push("random-zero-sum takes exactly two action counts".to_string());
            }
            if actions.len() < 2 {
                out.push("game.actions needs at least two players".to_string());
            }
        }

        let s = &self.schedule;
        match s.kind {
            ScheduleKind::Stationary => {
                for (key, set) in [
                    ("switches", s.switches.is_some()),
                    ("switch_times", s.switch_times.is_some()),
                    ("budget", s.budget.is_some()),
                    ("profile", s.profile.is_some()),
                    ("bursts", s.bursts.is_some()),
                ] {
                    if set {
                        out.push(format!("schedule.{key} is not used by a stationary schedule"));
                    }
                }
            }
            ScheduleKind::Switching => {
                if !g.family.has_partner() {
                    out.push(format!(
                        "schedule kind \"switching\" needs family dominance-flip or a random family, not {}",
                        family_name(g.family)
                    ));
                }
                match (&s.switches, &s.switch_times) {
                    (None, None) => out.push("schedule.switches or schedule.switch_times is required".to_string()),
                    (Some(_), Some(_)) => out.push("give schedule.switches or schedule.switch_times, not both".to_string()),
                    (None, Some(times)) => {
                        if times.windows(2).any(|w| w[0] >= w[1]) || times.first().is_some_and(|&t| t < 2) {
                            out.push("schedule.switch_times must be increasing and at least 2".to_string());
                        }
                        if times.last().is_some_and(|&t| t > self.run.horizon) {
                            out.push("schedule.switch_times must not exceed run.T".to_string());
                        }
                    }
                    (Some(_), None) => {}
                }
            }
            ScheduleKind::Drift => {
                if !g.family.has_partner() {
                    out.push(format!(
                        "schedule kind \"drift\" needs family dominance-flip or a random family, not {}",
                        family_name(g.family)
                    ));
                }
                match s.budget {
                    None => out.push("schedule.budget is required for a drift schedule".to_string()),
                    Some(b) if !(b.is_finite() && b >= 0.0) => {
                        out.push("schedule.budget must be finite and nonnegative".to_string())
                    }
                    _ => {}
                }
                if s.bursts.is_some() && s.profile != Some(DriftShape::Bursts) {
                    out.push("schedule.bursts is only used with profile \"bursts\"".to_string());
                }
                if s.bursts == Some(0) {
                    out.push("schedule.bursts must be positive".to_string());
                }
            }
        }

        let a = &self.algorithm;
        if !(a.delta > 0.0 && a.delta < 1.0) {
            out.push("algorithm.delta must lie in (0, 1)".to_string());
        }
        match (a.name, a.budget) {
            (AlgorithmName::RestartEtc, None) => {
                out.push("algorithm.budget is required for restart-etc".to_string())
            }
            (AlgorithmName::RestartEtc, Some(b)) if !(b.is_finite() && b >= 0.0) => {
                out.push("algorithm.budget must be finite and nonnegative".to_string())
            }
            (AlgorithmName::RestartEtc, _) => {}
            (_, Some(_)) => out.push("algorithm.budget is only used by restart-etc".to_string()),
            _ => {}
        }
        if !(a.baseline_epsilon > 0.0 && a.baseline_epsilon.is_finite()) {
            out.push("algorithm.baseline_epsilon must be positive".to_string());
        }
        if a.test_constant.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            out.push("algorithm.test_constant must be positive".to_string());
        }
        if a.kind == EqChoice::Ne && !matches!(g.family, Family::MatchingPennies | Family::DominanceFlip | Family::RandomZeroSum | Family::File) {
            out.push(format!("kind \"ne\" needs a zero-sum family, not {}", family_name(g.family)));
        }

        let r = &self.run;
        if r.horizon < 1 {
            out.push("run.T must be at least 1".to_string());
        }
        if r.seeds.is_empty() {
            out.push("run.seeds must not be empty".to_string());
        }
        if r.seeds.iter().collect::<BTreeSet<_>>().len() != r.seeds.len() {
            out.push("run.seeds must be distinct".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }
}

fn family_name(f: Family) -> String {
    serde_json::to_value(f)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[game]
family = "matching-pennies"

[algorithm]
name = "multiscale"
kind = "ne"

[run]
T = 1000
"#;

    #[test]
    fn switch_times_are_evenly_spaced() {
        let s = ScheduleSpec {
            kind: ScheduleKind::Switching,
            switches: Some(3),
            ..ScheduleSpec::stationary()
        };
        assert_eq!(s.switch_times_for(1 << 14), vec![4097, 8193, 12289]);
    }

    #[test]
    fn several_violations_are_listed_together() {
        let text = MINIMAL.replace("T = 1000", "T = 0\nseeds = [1, 1]");
        match ExperimentConfig::parse(&text) {
            Err(ConfigError::Invalid(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn switching_needs_a_partner_game() {
        let text = MINIMAL.replace("[algorithm]", "[schedule]\nkind = \"switching\"\nswitches = 1\n\n[algorithm]");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("matching-pennies"), "{err}");
    }
}
