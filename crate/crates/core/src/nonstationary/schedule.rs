//! Randomized multi-scale test schedule inside one block.

use std::fmt;

use rand::Rng;

/// Test parameters of a block of length `2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub n: u32,
    pub c2: f64,
    /// Window exponent offset: a level-`q` test must finish within `2^(c+q)`.
    pub c: u32,
    /// Highest test level.
    pub q_max: u32,
}

/// `c = ceil(1 + log2 max(5 sqrt(c2), 2 ln(1/delta)))` and
/// `Q = max(0, min(floor(log2(c2 2^(n/2 - 1))), n - c))`.
pub fn compute_block_params(n: u32, c2: f64, delta: f64) -> BlockParams {
    let c = (1.0 + (5.0 * c2.sqrt()).max(2.0 * (1.0 / delta).ln()).log2())
        .ceil()
        .max(0.0) as u32;
    let by_gap = (c2 * 2f64.powf(n as f64 / 2.0 - 1.0)).log2().floor();
    let q = by_gap.min(n as f64 - c as f64).max(0.0);
    BlockParams {
        n,
        c2,
        c,
        q_max: q as u32,
    }
}

impl BlockParams {
    /// Parameters given directly rather than derived.
    pub fn explicit(n: u32, c2: f64, c: u32, q_max: u32) -> Self {
        Self { n, c2, c, q_max }
    }

    /// Gap tested at level `q`: `sqrt(c2 / 2^q)`.
    pub fn eps(&self, q: u32) -> f64 {
        (self.c2 / 2f64.powi(q as i32)).sqrt()
    }

    /// Spawn probability `1 / (eps(q) 2^(n/2))`, clipped to 1.
    pub fn spawn_prob(&self, q: u32) -> f64 {
        (1.0 / (self.eps(q) * 2f64.powf(self.n as f64 / 2.0))).min(1.0)
    }

    /// Active episodes a level-`q` test needs.
    pub fn length(&self, q: u32) -> u64 {
        1 << q
    }

    /// Longest span of a level-`q` test; also its spawn period.
    pub fn window(&self, q: u32) -> u64 {
        1 << (self.c + q)
    }
}

/// Decides whether a test is spawned at an eligible point.
pub trait SpawnSource {
    fn spawn(&mut self, tau: u64, level: u32, prob: f64) -> bool;
}

/// Independent coin flips.
pub struct RandomSpawns<'r, R: Rng + ?Sized>(pub &'r mut R);

impl<R: Rng + ?Sized> SpawnSource for RandomSpawns<'_, R> {
    fn spawn(&mut self, _tau: u64, _level: u32, prob: f64) -> bool {
        prob >= 1.0 || self.0.random::<f64>() < prob
    }
}

/// Spawns exactly the listed `(tau, level)` pairs that are eligible.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSpawns(pub Vec<(u64, u32)>);

impl SpawnSource for ScriptedSpawns {
    fn spawn(&mut self, tau: u64, level: u32, _prob: f64) -> bool {
        self.0.contains(&(tau, level))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestState {
    /// Spawned but not yet run.
    Pending,
    Active,
    Paused,
    Done,
    Aborted,
    /// Cut off by the end of the block.
    Truncated,
}

impl TestState {
    pub fn is_open(self) -> bool {
        matches!(self, TestState::Pending | TestState::Active | TestState::Paused)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledTest {
    pub id: usize,
    pub level: u32,
    pub start: u64,
    pub active_episodes: u64,
    pub state: TestState,
    /// Last episode of the test's life, once closed.
    pub closed_at: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleAction {
    Commit,
    RunTest { id: usize, level: u32 },
}

/// What one episode of the block looked like.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeRecord {
    pub tau: u64,
    /// Tests whose state was active during the episode.
    pub active: Vec<usize>,
}

/// The committing-phase scheduler of one block. `tau` counts episodes from
/// the start of the block, starting at 0; tests spawn only at
/// `tau >= learn_len`.
#[derive(Debug, Clone)]
pub struct BlockSchedule {
    params: BlockParams,
    block_len: u64,
    learn_len: u64,
    tau: u64,
    tests: Vec<ScheduledTest>,
    running: Option<usize>,
    history: Option<Vec<EpisodeRecord>>,
}

impl BlockSchedule {
    pub fn new(params: BlockParams, block_len: u64, learn_len: u64) -> Self {
        Self {
            params,
            block_len,
            learn_len,
            tau: learn_len,
            tests: Vec::new(),
            running: None,
            history: None,
        }
    }

    /// Keeps a per-episode record for [`check_legality`].
    pub fn with_history(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn params(&self) -> &BlockParams {
        &self.params
    }

    pub fn block_len(&self) -> u64 {
        self.block_len
    }

    pub fn learn_len(&self) -> u64 {
        self.learn_len
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn is_finished(&self) -> bool {
        self.tau >= self.block_len
    }

    pub fn tests(&self) -> &[ScheduledTest] {
        &self.tests
    }

    pub fn history(&self) -> Option<&[EpisodeRecord]> {
        self.history.as_deref()
    }

    /// Spawns the tests due at the current episode and picks what to run.
    pub fn plan(&mut self, spawns: &mut dyn SpawnSource) -> ScheduleAction {
        assert!(!self.is_finished(), "block already finished");
        assert!(self.running.is_none(), "previous episode not finished");
        let tau = self.tau;
        for q in 0..=self.params.q_max {
            if tau.is_multiple_of(self.params.window(q)) && spawns.spawn(tau, q, self.params.spawn_prob(q)) {
                let id = self.tests.len();
                self.tests.push(ScheduledTest {
                    id,
                    level: q,
                    start: tau,
                    active_episodes: 0,
                    state: TestState::Pending,
                    closed_at: None,
                });
            }
        }
        let chosen = self
            .tests
            .iter()
            .filter(|t| t.state.is_open())
            .min_by_key(|t| (t.level, t.start))
            .map(|t| t.id);
        for t in self.tests.iter_mut().filter(|t| t.state.is_open()) {
            t.state = if Some(t.id) == chosen {
                TestState::Active
            } else if t.state == TestState::Active {
                TestState::Paused
            } else {
                t.state
            };
        }
        if let Some(h) = self.history.as_mut() {
            h.push(EpisodeRecord {
                tau,
                active: self
                    .tests
                    .iter()
                    .filter(|t| t.state == TestState::Active)
                    .map(|t| t.id)
                    .collect(),
            });
        }
        self.running = chosen;
        match chosen {
            Some(id) => ScheduleAction::RunTest {
                id,
                level: self.tests[id].level,
            },
            None => ScheduleAction::Commit,
        }
    }

    /// Closes the current episode. `completed` says whether the running
    /// test produced its verdict in it; a test that reaches its length is
    /// complete regardless. Returns the tests closed by this episode.
    pub fn finish_episode(&mut self, completed: bool) -> Vec<usize> {
        let tau = self.tau;
        let mut closed = Vec::new();
        if let Some(id) = self.running.take() {
            let length = self.params.length(self.tests[id].level);
            let t = &mut self.tests[id];
            t.active_episodes += 1;
            if completed || t.active_episodes >= length {
                t.state = TestState::Done;
                t.closed_at = Some(tau);
                closed.push(id);
            }
        }
        for t in self.tests.iter_mut().filter(|t| t.state.is_open()) {
            if tau + 1 - t.start >= self.params.window(t.level) {
                t.state = TestState::Aborted;
                t.closed_at = Some(tau);
                closed.push(t.id);
            }
        }
        self.tau += 1;
        if self.is_finished() {
            closed.extend(self.truncate_open());
        }
        closed
    }

    /// Closes every open test as truncated, e.g. when the stream ends.
    pub fn truncate_open(&mut self) -> Vec<usize> {
        let last = self.tau.saturating_sub(1);
        let mut closed = Vec::new();
        for t in self.tests.iter_mut().filter(|t| t.state.is_open()) {
            t.state = TestState::Truncated;
            t.closed_at = Some(last);
            closed.push(t.id);
        }
        closed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LegalityViolation {
    SeveralActive { tau: u64 },
    NotHighestPriority { tau: u64, active: usize, preferred: usize },
    Idle { tau: u64, waiting: usize },
    MisalignedStart { test: usize },
    TooManyEpisodes { test: usize },
    /// Aborted even though it finished within its window, or survived past it.
    WrongAbort { test: usize },
}

impl fmt::Display for LegalityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LegalityViolation::SeveralActive { tau } => write!(f, "more than one active test at tau {tau}"),
            LegalityViolation::NotHighestPriority {
                tau,
                active,
                preferred,
            } => write!(f, "test {active} ran at tau {tau} while test {preferred} had a lower level"),
            LegalityViolation::Idle { tau, waiting } => write!(f, "committed at tau {tau} while test {waiting} was open"),
            LegalityViolation::MisalignedStart { test } => write!(f, "test {test} started off its grid"),
            LegalityViolation::TooManyEpisodes { test } => write!(f, "test {test} ran longer than its length"),
            LegalityViolation::WrongAbort { test } => write!(f, "test {test} has an inconsistent abort state"),
        }
    }
}

/// Audits a finished schedule recorded with [`BlockSchedule::with_history`]
/// against the scheduling rules, from the history alone.
pub fn check_legality(schedule: &BlockSchedule) -> Vec<LegalityViolation> {
    let params = schedule.params();
    let history = schedule.history().expect("schedule was built with a history");
    let tests = schedule.tests();
    let mut out = Vec::new();
    let mut ran = vec![0u64; tests.len()];
    for rec in history {
        if rec.active.len() > 1 {
            out.push(LegalityViolation::SeveralActive { tau: rec.tau });
        }
        let open_at = |t: &ScheduledTest| t.start <= rec.tau && t.closed_at.is_none_or(|c| c >= rec.tau);
        let preferred = tests
            .iter()
            .filter(|t| open_at(t) && ran[t.id] < params.length(t.level))
            .min_by_key(|t| (t.level, t.start));
        match (rec.active.first(), preferred) {
            (Some(&a), Some(p)) if tests[a].level > p.level => out.push(LegalityViolation::NotHighestPriority {
                tau: rec.tau,
                active: a,
                preferred: p.id,
            }),
            (None, Some(p)) => out.push(LegalityViolation::Idle {
                tau: rec.tau,
                waiting: p.id,
            }),
            _ => {}
        }
        for &a in &rec.active {
            ran[a] += 1;
        }
    }
    for t in tests {
        if t.start % params.window(t.level) != 0 || t.start < schedule.learn_len() {
            out.push(LegalityViolation::MisalignedStart { test: t.id });
        }
        if ran[t.id] > params.length(t.level) || ran[t.id] != t.active_episodes {
            out.push(LegalityViolation::TooManyEpisodes { test: t.id });
        }
        let span = t.closed_at.map(|c| c + 1 - t.start);
        let window = params.window(t.level);
        let consistent = match t.state {
            TestState::Aborted => span == Some(window) && ran[t.id] < params.length(t.level),
            TestState::Done | TestState::Truncated => span.is_some_and(|s| s <= window),
            _ => false,
        };
        if !consistent {
            out.push(LegalityViolation::WrongAbort { test: t.id });
        }
    }
    out
}
