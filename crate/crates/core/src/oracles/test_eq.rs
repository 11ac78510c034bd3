use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::adapters::{DeviationController, ExecutedCache, ObservationMode};
use super::{OracleProfile, ProfileKind};
use crate::bandit::{LearnedPolicy, PacLearner};
use crate::env::MultiAgentEnv;
use crate::episode::Controller;
use crate::error::Result;
use crate::mdp::Agent;
use crate::policy::{JointPolicy, PolicyCursor};
use crate::SimRng;

/// Episodes per value estimate: `ceil(18 H^2 ln(4m / delta) / eps^2)`, so
/// that each of the `2m` estimates is within `eps / 6` with probability
/// `1 - delta / (2m)`.
pub fn estimation_episodes(horizon: usize, players: usize, eps: f64, delta: f64) -> u64 {
    let h = horizon as f64;
    let n = 18.0 * h * h * (4.0 * players as f64 / delta).ln() / (eps * eps);
    (n.ceil() as u64).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestVerdict {
    /// `Some(true)` when no player can gain more than the threshold,
    /// `None` when the stream ended first.
    pub pass: Option<bool>,
    /// Estimated value of the tested policy per player.
    pub values: Vec<f64>,
    /// Estimated value of each player's learned deviation. Empty when the
    /// threshold is at least `H` and no deviation was learned.
    pub deviation_values: Vec<f64>,
    pub episodes: u64,
    pub threshold: f64,
}

impl TestVerdict {
    /// Largest estimated gain from deviating, clipped at 0.
    pub fn estimated_gap(&self) -> f64 {
        self.deviation_values
            .iter()
            .zip(&self.values)
            .map(|(d, v)| (d - v).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Follows a learned rule; reports it as its plan.
struct FixedAgent<'a>(&'a LearnedPolicy);

impl Agent for FixedAgent<'_> {
    fn begin_episode(&mut self) {}

    fn act(&mut self, h: usize, obs: usize) -> usize {
        self.0.action(h, obs)
    }

    fn observe(&mut self, _h: usize, _obs: usize, _a: usize, _r: f64, _next: Option<usize>) {}

    fn plan(&self) -> Option<&[usize]> {
        Some(&self.0.actions)
    }
}

/// Runs the policy and records its returns.
struct Follow<'a> {
    policy: &'a Arc<JointPolicy>,
    rng: &'a mut SimRng,
    cursor: PolicyCursor,
}

impl Controller for Follow<'_> {
    fn begin_episode(&mut self) {
        self.cursor = PolicyCursor::begin(self.policy, &mut *self.rng);
    }

    fn act(&mut self, h: usize, s: usize, out: &mut [usize]) {
        self.cursor.sample(self.policy, h, s, &mut *self.rng, out);
    }

    fn observe(&mut self, _h: usize, _s: usize, _actions: &[usize], _rewards: &[f64]) {}

    fn executed_policy(&self) -> Arc<JointPolicy> {
        Arc::clone(self.policy)
    }
}

#[derive(Debug, Clone)]
enum Stage {
    Estimate,
    Learn { player: usize, learner: Box<PacLearner> },
    Deviate { player: usize, rule: LearnedPolicy, sum: f64, count: u64 },
    Done,
}

/// Resumable equilibrium test of a fixed policy.
///
/// Phase one estimates every player's value, phase two learns a deviation
/// per player with a PAC learner at accuracy `eps / 6` (a best response for
/// NE and CCE, a strategy modification for CE), and phase three estimates
/// the value of each learned deviation. The test passes when no estimated
/// gain exceeds `3 eps / 2`. If that threshold is at least `H` the answer is
/// known in advance and only phase one runs.
///
/// Each [`step`](Self::step) plays exactly one episode, so a scheduler can
/// interleave several runs on the same stream.
#[derive(Debug, Clone)]
pub struct TestEqRun {
    policy: Arc<JointPolicy>,
    kind: ProfileKind,
    eps: f64,
    delta: f64,
    threshold: f64,
    budget: u64,
    n_est: u64,
    trivial: bool,
    rng: SimRng,
    cache: ExecutedCache,
    stage: Stage,
    value_sums: Vec<f64>,
    value_count: u64,
    deviation_values: Vec<f64>,
    episodes: u64,
    verdict: Option<TestVerdict>,
}

impl TestEqRun {
    pub fn new(policy: Arc<JointPolicy>, profile: &OracleProfile, eps: f64, rng: SimRng) -> Self {
        let shape = policy.shape();
        let (m, h) = (shape.players(), shape.horizon());
        let threshold = 1.5 * eps;
        Self {
            kind: profile.kind,
            eps,
            delta: profile.delta,
            threshold,
            budget: profile.test_budget(eps),
            n_est: estimation_episodes(h, m, eps, profile.delta),
            trivial: threshold >= h as f64,
            rng,
            cache: ExecutedCache::default(),
            stage: Stage::Estimate,
            value_sums: vec![0.0; m],
            value_count: 0,
            deviation_values: Vec::with_capacity(m),
            episodes: 0,
            verdict: None,
            policy,
        }
    }

    pub fn policy(&self) -> &Arc<JointPolicy> {
        &self.policy
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `C_2(eps)`: the most episodes this run will use.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    pub fn verdict(&self) -> Option<&TestVerdict> {
        self.verdict.as_ref()
    }

    fn mode(&self) -> ObservationMode {
        match self.kind {
            ProfileKind::Ce => ObservationMode::Recommendation,
            _ => ObservationMode::State,
        }
    }

    /// Verdict from what has been observed so far, `pass: None`.
    pub fn partial_verdict(&self) -> TestVerdict {
        TestVerdict {
            pass: None,
            values: self.values(),
            deviation_values: self.deviation_values.clone(),
            episodes: self.episodes,
            threshold: self.threshold,
        }
    }

    fn values(&self) -> Vec<f64> {
        let n = self.value_count.max(1) as f64;
        self.value_sums.iter().map(|s| s / n).collect()
    }

    fn learner_for(&self, player: usize) -> Box<PacLearner> {
        let shape = self.policy.shape();
        let m = shape.players() as f64;
        let a = shape.num_actions(player);
        let obs = self.mode().observations(shape.states(), a);
        Box::new(PacLearner::new(
            shape.horizon(),
            obs,
            a,
            self.eps / 6.0,
            self.delta / (2.0 * m),
        ))
    }

    fn finish(&mut self) -> TestVerdict {
        let mut v = self.partial_verdict();
        v.pass = Some(self.trivial || v.estimated_gap() <= self.threshold);
        self.stage = Stage::Done;
        self.verdict = Some(v.clone());
        v
    }

    /// Plays one episode. Returns the verdict once the test is complete;
    /// calling it again afterwards plays nothing and returns the same verdict.
    pub fn step(&mut self, env: &mut dyn MultiAgentEnv) -> Result<Option<TestVerdict>> {
        if let Some(v) = &self.verdict {
            return Ok(Some(v.clone()));
        }
        let mode = self.mode();
        let players = self.policy.shape().players();
        match &mut self.stage {
            Stage::Estimate => {
                let mut ctl = Follow {
                    policy: &self.policy,
                    rng: &mut self.rng,
                    cursor: PolicyCursor::default(),
                };
                let traj = env.run_episode(&mut ctl)?;
                self.episodes += 1;
                for (i, acc) in self.value_sums.iter_mut().enumerate() {
                    *acc += traj.return_of(i);
                }
                self.value_count += 1;
                if self.value_count >= self.n_est || (self.trivial && self.episodes >= self.budget) {
                    if self.trivial {
                        return Ok(Some(self.finish()));
                    }
                    self.stage = Stage::Learn {
                        player: 0,
                        learner: self.learner_for(0),
                    };
                }
            }
            Stage::Learn { player, learner } => {
                let p = *player;
                let mut ctl = DeviationController::new(
                    &self.policy,
                    p,
                    mode,
                    learner.as_mut(),
                    &mut self.rng,
                    &mut self.cache,
                );
                env.run_episode(&mut ctl)?;
                self.episodes += 1;
                if learner.is_done() {
                    let rule = learner.output();
                    self.stage = Stage::Deviate {
                        player: p,
                        rule,
                        sum: 0.0,
                        count: 0,
                    };
                }
            }
            Stage::Deviate {
                player,
                rule,
                sum,
                count,
            } => {
                let p = *player;
                let mut agent = FixedAgent(rule);
                let mut ctl = DeviationController::new(
                    &self.policy,
                    p,
                    mode,
                    &mut agent,
                    &mut self.rng,
                    &mut self.cache,
                );
                let traj = env.run_episode(&mut ctl)?;
                self.episodes += 1;
                *sum += traj.return_of(p);
                *count += 1;
                if *count >= self.n_est {
                    self.deviation_values.push(*sum / *count as f64);
                    if p + 1 < players {
                        self.stage = Stage::Learn {
                            player: p + 1,
                            learner: self.learner_for(p + 1),
                        };
                    } else {
                        return Ok(Some(self.finish()));
                    }
                }
            }
            Stage::Done => unreachable!("a finished run keeps its verdict"),
        }
        Ok(None)
    }
}

/// Runs a complete test. If the stream ends first the verdict is
/// inconclusive (`pass: None`).
pub fn test_eq<R: Rng>(
    env: &mut dyn MultiAgentEnv,
    policy: Arc<JointPolicy>,
    profile: &OracleProfile,
    eps: f64,
    rng: &mut R,
) -> Result<TestVerdict> {
    let mut run = TestEqRun::new(policy, profile, eps, SimRng::from_rng(rng));
    loop {
        match run.step(env) {
            Ok(Some(v)) => return Ok(v),
            Ok(None) => {}
            Err(e) if e.is_exhausted() => return Ok(run.partial_verdict()),
            Err(e) => return Err(e),
        }
    }
}
