//! Parameter-free multi-scale testing with doubling blocks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::etc::Capped;
use super::schedule::{compute_block_params, BlockSchedule, RandomSpawns, ScheduleAction, TestState};
use crate::dp::{gap_value, EqKind};
use crate::env::MultiAgentEnv;
use crate::episode::{Controller, PolicyController};
use crate::error::Result;
use crate::oracles::{learn_eq, OracleProfile, TestEqRun};
use crate::policy::{JointPolicy, PolicyCursor};
use crate::sequence::GameSequence;
use crate::trace::{Label, Phase, TestOutcome, TestRecord};
use crate::SimRng;

/// A test that can be advanced one episode at a time.
pub trait TestRunner {
    /// Plays one episode; `Some(pass)` once the verdict is in.
    fn step(&mut self, env: &mut dyn MultiAgentEnv) -> Result<Option<bool>>;
}

impl TestRunner for TestEqRun {
    fn step(&mut self, env: &mut dyn MultiAgentEnv) -> Result<Option<bool>> {
        Ok(TestEqRun::step(self, env)?.and_then(|v| v.pass))
    }
}

/// Creates the test run for a freshly spawned schedule entry.
pub trait TesterFactory {
    fn start(&mut self, policy: &Arc<JointPolicy>, level: u32, eps: f64, rng: SimRng) -> Box<dyn TestRunner>;
}

/// Spawns the black-box equilibrium tester.
#[derive(Debug, Clone)]
pub struct OracleTester {
    pub profile: OracleProfile,
}

impl TesterFactory for OracleTester {
    fn start(&mut self, policy: &Arc<JointPolicy>, _level: u32, eps: f64, rng: SimRng) -> Box<dyn TestRunner> {
        Box::new(TestEqRun::new(Arc::clone(policy), &self.profile, eps, rng))
    }
}

/// Plays the committed policy for `2^q` episodes and then compares its exact
/// gap in the current game with `3 eps / 2`. A noiseless stand-in for the
/// sampled tester when studying the schedule itself.
#[derive(Debug, Clone)]
pub struct ExactTester {
    pub sequence: Arc<GameSequence>,
    pub kind: EqKind,
}

struct ExactRun {
    policy: Arc<JointPolicy>,
    sequence: Arc<GameSequence>,
    kind: EqKind,
    threshold: f64,
    needed: u64,
    played: u64,
    rng: SimRng,
    cursor: PolicyCursor,
}

impl Controller for ExactRun {
    fn begin_episode(&mut self) {
        self.cursor = PolicyCursor::begin(&self.policy, &mut self.rng);
    }

    fn act(&mut self, h: usize, s: usize, out: &mut [usize]) {
        self.cursor.sample(&self.policy, h, s, &mut self.rng, out);
    }

    fn observe(&mut self, _h: usize, _s: usize, _actions: &[usize], _rewards: &[f64]) {}

    fn executed_policy(&self) -> Arc<JointPolicy> {
        Arc::clone(&self.policy)
    }
}

impl TestRunner for ExactRun {
    fn step(&mut self, env: &mut dyn MultiAgentEnv) -> Result<Option<bool>> {
        env.run_episode(self)?;
        self.played += 1;
        if self.played < self.needed {
            return Ok(None);
        }
        let t = env.episodes_done().clamp(1, self.sequence.len());
        let gap = gap_value(&self.sequence.game(t), &self.policy, self.kind)?;
        Ok(Some(gap <= self.threshold))
    }
}

impl TesterFactory for ExactTester {
    fn start(&mut self, policy: &Arc<JointPolicy>, level: u32, eps: f64, rng: SimRng) -> Box<dyn TestRunner> {
        Box::new(ExactRun {
            policy: Arc::clone(policy),
            sequence: Arc::clone(&self.sequence),
            kind: self.kind,
            threshold: 1.5 * eps,
            needed: 1 << level,
            played: 0,
            rng,
            cursor: PolicyCursor::default(),
        })
    }
}

/// Smallest `n` whose block holds a whole learning phase at accuracy
/// `2^(-n/4)`.
pub fn first_block(profile: &OracleProfile) -> u32 {
    (1..63)
        .find(|&n| (1u64 << n) >= profile.learn_budget(block_eps(n)))
        .expect("learning budget grows slower than the block")
}

/// Learning accuracy of block `n`.
pub fn block_eps(n: u32) -> f64 {
    2f64.powf(-(n as f64) / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockEnd {
    Completed,
    Restarted,
    StreamEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub n: u32,
    /// First episode of the block, 1-based.
    pub start: usize,
    /// Last episode played in it.
    pub end: usize,
    pub learn_len: u64,
    pub ended: BlockEnd,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MultiscaleReport {
    pub first_block: u32,
    pub blocks: Vec<BlockRecord>,
    pub tests: Vec<TestRecord>,
}

impl MultiscaleReport {
    pub fn restarts(&self) -> usize {
        self.blocks.iter().filter(|b| b.ended == BlockEnd::Restarted).count()
    }
}

/// Runs blocks `n = N, N+1, ...` until the stream ends. Any failed test
/// restarts from block `N` right after its last episode; aborted or
/// truncated tests never do.
pub fn run_multiscale<R: Rng>(
    env: &mut dyn MultiAgentEnv,
    profile: &OracleProfile,
    tester: &mut dyn TesterFactory,
    rng: &mut R,
) -> Result<MultiscaleReport> {
    let n0 = first_block(profile);
    let mut report = MultiscaleReport {
        first_block: n0,
        ..Default::default()
    };
    let mut n = n0;
    loop {
        let block_len = 1u64 << n;
        let learn_len = profile.learn_budget(block_eps(n));
        let base = env.episodes_done();
        env.set_label(Label::new(Some(n), Phase::Learn, None));
        let learned = learn_eq(&mut Capped::new(env, learn_len as usize), profile, block_eps(n), rng)?;
        if learned.truncated {
            report.blocks.push(BlockRecord {
                n,
                start: base + 1,
                end: env.episodes_done(),
                learn_len,
                ended: BlockEnd::StreamEnd,
            });
            return Ok(report);
        }
        let policy = learned.policy;
        let params = compute_block_params(n, profile.c2, profile.delta);
        let mut schedule = BlockSchedule::new(params, block_len, learn_len);
        let mut commit = PolicyController::new(Arc::clone(&policy), SimRng::from_rng(&mut *rng));
        let mut runs: Vec<Option<Box<dyn TestRunner>>> = Vec::new();
        let mut verdicts: Vec<Option<bool>> = Vec::new();
        let mut ended = BlockEnd::Completed;

        let record = |env: &mut dyn MultiAgentEnv,
                      report: &mut MultiscaleReport,
                      schedule: &BlockSchedule,
                      verdicts: &[Option<bool>],
                      ids: &[usize]| {
            for &id in ids {
                let t = &schedule.tests()[id];
                let outcome = match (t.state, verdicts[id]) {
                    (TestState::Done, Some(true)) => TestOutcome::Passed,
                    (TestState::Done, Some(false)) => TestOutcome::Failed,
                    (TestState::Aborted, _) => TestOutcome::Aborted,
                    _ => TestOutcome::Truncated,
                };
                let rec = TestRecord {
                    block_n: n,
                    level: t.level,
                    spawned_at: base + t.start as usize + 1,
                    closed_at: base + t.closed_at.unwrap_or(t.start) as usize + 1,
                    active_episodes: t.active_episodes as usize,
                    outcome,
                };
                env.record_test(rec.clone());
                report.tests.push(rec);
            }
        };

        while !schedule.is_finished() {
            let action = schedule.plan(&mut RandomSpawns(&mut *rng));
            while runs.len() < schedule.tests().len() {
                let t = &schedule.tests()[runs.len()];
                let eps = schedule.params().eps(t.level);
                runs.push(Some(tester.start(&policy, t.level, eps, SimRng::from_rng(&mut *rng))));
                verdicts.push(None);
            }
            let outcome = match action {
                ScheduleAction::Commit => {
                    env.set_label(Label::new(Some(n), Phase::Commit, None));
                    env.run_episode(&mut commit).map(|_| None)
                }
                ScheduleAction::RunTest { id, level } => {
                    env.set_label(Label::new(Some(n), Phase::Test, Some(level)));
                    let run = runs[id].as_mut().expect("open tests keep their runner");
                    run.step(env).map(|v| v.map(|pass| (id, pass)))
                }
            };
            let finished = match outcome {
                Ok(v) => v,
                Err(e) if e.is_exhausted() => {
                    let closed = schedule.truncate_open();
                    record(env, &mut report, &schedule, &verdicts, &closed);
                    ended = BlockEnd::StreamEnd;
                    break;
                }
                Err(e) => return Err(e),
            };
            if let Some((id, pass)) = finished {
                verdicts[id] = Some(pass);
            }
            let closed = schedule.finish_episode(finished.is_some());
            for &id in &closed {
                runs[id] = None;
            }
            record(env, &mut report, &schedule, &verdicts, &closed);
            if let Some((_, false)) = finished {
                env.mark_restart();
                let rest = schedule.truncate_open();
                record(env, &mut report, &schedule, &verdicts, &rest);
                ended = BlockEnd::Restarted;
                break;
            }
        }
        report.blocks.push(BlockRecord {
            n,
            start: base + 1,
            end: env.episodes_done(),
            learn_len,
            ended,
        });
        match ended {
            BlockEnd::StreamEnd => return Ok(report),
            BlockEnd::Restarted => n = n0,
            BlockEnd::Completed => n += 1,
        }
    }
}

/// Learns once at accuracy `eps` and commits to the result until the
/// stream ends.
pub fn run_oblivious<R: Rng>(
    env: &mut dyn MultiAgentEnv,
    profile: &OracleProfile,
    eps: f64,
    rng: &mut R,
) -> Result<()> {
    env.set_label(Label::new(None, Phase::Learn, None));
    let learned = learn_eq(env, profile, eps, rng)?;
    if learned.truncated {
        return Ok(());
    }
    env.set_label(Label::new(None, Phase::Commit, None));
    let mut commit = PolicyController::new(learned.policy, SimRng::from_rng(&mut *rng));
    loop {
        match env.run_episode(&mut commit) {
            Ok(_) => {}
            Err(e) if e.is_exhausted() => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GameStream;
    use crate::game::families;
    use crate::oracles::{profile_for, ProfileKind};
    use rand::SeedableRng;

    #[test]
    fn first_block_with_unit_constant() {
        let g = families::matching_pennies();
        let mut p = profile_for(ProfileKind::NeZeroSum, g.shape(), 0.1).unwrap();
        p.c1 = 4.0;
        assert_eq!(first_block(&p), 4);
    }

    #[test]
    fn blocks_double_on_a_stationary_stream() {
        let g = families::matching_pennies();
        let p = profile_for(ProfileKind::NeZeroSum, g.shape(), 0.1).unwrap();
        let n0 = first_block(&p);
        let len = (1usize << n0) * 3 + 10;
        let seq = Arc::new(GameSequence::stationary(g, len));
        let mut env = GameStream::new(Arc::clone(&seq), EqKind::Ne, 1);
        let mut tester = OracleTester { profile: p.clone() };
        let report = run_multiscale(&mut env, &p, &mut tester, &mut SimRng::seed_from_u64(2)).unwrap();
        let ns: Vec<u32> = report.blocks.iter().map(|b| b.n).collect();
        assert_eq!(ns, vec![n0, n0 + 1, n0 + 2]);
        assert_eq!(report.blocks[1].start, (1 << n0) + 1);
        assert_eq!(report.blocks[2].ended, BlockEnd::StreamEnd);
        let trace = env.into_trace();
        assert_eq!(trace.rows.len(), len);
        let learn = trace
            .rows
            .iter()
            .filter(|r| r.block_n == Some(n0) && r.phase == Phase::Learn)
            .count();
        assert_eq!(learn as u64, p.learn_budget(block_eps(n0)));
    }

    #[test]
    fn exact_tester_restarts_after_a_switch() {
        let (a, b) = families::dominance_flip_pair();
        let mut p = profile_for(ProfileKind::NeZeroSum, a.shape(), 0.1).unwrap();
        p.c2 = 0.01;
        let n0 = first_block(&p);
        let switch = (1usize << n0) / 2 + (1 << n0);
        let seq = Arc::new(GameSequence::switching(vec![a, b], vec![switch], 4 << n0).unwrap());
        let mut env = GameStream::new(Arc::clone(&seq), EqKind::Ne, 3);
        let mut tester = ExactTester {
            sequence: Arc::clone(&seq),
            kind: EqKind::Ne,
        };
        let report = run_multiscale(&mut env, &p, &mut tester, &mut SimRng::seed_from_u64(4)).unwrap();
        let restart = report
            .blocks
            .iter()
            .find(|b| b.ended == BlockEnd::Restarted && b.end >= switch)
            .expect("the switch is detected");
        assert!(restart.end < 4 << n0);
        assert!(report.tests.iter().any(|t| t.outcome == TestOutcome::Failed));
        let trace = env.into_trace();
        for row in trace.rows.iter().filter(|r| r.restart) {
            assert!(report
                .tests
                .iter()
                .any(|t| t.outcome == TestOutcome::Failed && t.closed_at == row.episode));
        }
    }
}
