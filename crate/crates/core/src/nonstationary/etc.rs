//! Restarted explore-then-commit with a known variation budget.

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::env::MultiAgentEnv;
use crate::episode::{Controller, PolicyController, Trajectory};
use crate::error::{Error, Result};
use crate::game::Shape;
use crate::oracles::{learn_eq, OracleProfile};
use crate::trace::{Label, Phase, TestRecord};
use crate::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct EtcConfig {
    pub horizon_t: u64,
    /// Variation budget used for tuning; 0 is replaced by `1 / T`.
    pub budget: f64,
    pub eps: f64,
    pub learn_len: u64,
    pub commit_len: u64,
}

/// Tunes accuracy and commit length from `T` and the variation budget:
/// `eps = (Delta c_1 K / T)^(1/4)` (fifth root when `alpha = -3`) and
/// `T_1 = ceil(sqrt(T c_1 eps^alpha / (K Delta)))` with `K = max(c_1^Delta, H)`.
/// `eps` is capped at `H` and `T_1` at `T`.
pub fn tune_etc(horizon_t: u64, budget: f64, profile: &OracleProfile) -> EtcConfig {
    let t = horizon_t.max(1) as f64;
    let budget = if budget > 0.0 { budget } else { 1.0 / t };
    let k = profile.c1_delta.max(profile.horizon as f64);
    let root = if profile.alpha == -3 { 5.0 } else { 4.0 };
    let eps = (budget * profile.c1 * k / t).powf(1.0 / root).min(profile.horizon as f64);
    let learn_exact = profile.c1 * eps.powi(profile.alpha);
    let commit_len = ((t * learn_exact / (k * budget)).sqrt().ceil() as u64).clamp(1, horizon_t.max(1));
    EtcConfig {
        horizon_t,
        budget,
        eps,
        learn_len: profile.learn_budget(eps),
        commit_len,
    }
}

/// Phase lengths actually played.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtcReport {
    pub phases: Vec<(Phase, u64)>,
}

/// Alternates `C_1(eps)` learning episodes with `T_1` committed episodes
/// until `T` episodes are played or the stream ends.
pub fn run_restart_etc<R: Rng>(
    env: &mut dyn MultiAgentEnv,
    cfg: &EtcConfig,
    profile: &OracleProfile,
    rng: &mut R,
) -> Result<EtcReport> {
    let mut report = EtcReport::default();
    let target = cfg.horizon_t as usize;
    let start = env.episodes_done();
    let left = |env: &dyn MultiAgentEnv| target.saturating_sub(env.episodes_done() - start);
    while left(env) > 0 {
        env.set_label(Label::new(None, Phase::Learn, None));
        let cap = left(env);
        let out = learn_eq(&mut Capped::new(env, cap), profile, cfg.eps, rng)?;
        report.phases.push((Phase::Learn, out.episodes));
        if out.truncated || left(env) == 0 {
            break;
        }
        env.set_label(Label::new(None, Phase::Commit, None));
        let mut ctl = PolicyController::new(Arc::clone(&out.policy), SimRng::from_rng(&mut *rng));
        let mut played = 0;
        while played < cfg.commit_len && left(env) > 0 {
            match env.run_episode(&mut ctl) {
                Ok(_) => played += 1,
                Err(e) if e.is_exhausted() => break,
                Err(e) => return Err(e),
            }
        }
        report.phases.push((Phase::Commit, played));
        if played < cfg.commit_len {
            break;
        }
    }
    Ok(report)
}

/// A stream that ends after `limit` more episodes.
pub(crate) struct Capped<'e> {
    inner: &'e mut dyn MultiAgentEnv,
    limit: usize,
}

impl<'e> Capped<'e> {
    pub(crate) fn new(inner: &'e mut dyn MultiAgentEnv, limit: usize) -> Self {
        Self { inner, limit }
    }
}

impl MultiAgentEnv for Capped<'_> {
    fn shape(&self) -> &Shape {
        self.inner.shape()
    }

    fn remaining(&self) -> Option<usize> {
        Some(self.inner.remaining().map_or(self.limit, |r| r.min(self.limit)))
    }

    fn run_episode(&mut self, controller: &mut dyn Controller) -> Result<Trajectory> {
        if self.limit == 0 {
            return Err(Error::Exhausted);
        }
        let out = self.inner.run_episode(controller)?;
        self.limit -= 1;
        Ok(out)
    }

    fn set_label(&mut self, label: Label) {
        self.inner.set_label(label);
    }

    fn mark_restart(&mut self) {
        self.inner.mark_restart();
    }

    fn record_test(&mut self, record: TestRecord) {
        self.inner.record_test(record);
    }

    fn episodes_done(&self) -> usize {
        self.inner.episodes_done()
    }
}
