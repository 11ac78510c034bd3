//! Per-episode run records.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Learn,
    Commit,
    Test,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Learn => "learn",
            Phase::Commit => "commit",
            Phase::Test => "test",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "learn" => Some(Phase::Learn),
            "commit" => Some(Phase::Commit),
            "test" => Some(Phase::Test),
            _ => None,
        }
    }
}

/// What the algorithm says the next episodes are for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label {
    pub block_n: Option<u32>,
    pub phase: Phase,
    pub test_level: Option<u32>,
}

impl Label {
    pub const LEARN: Label = Label {
        block_n: None,
        phase: Phase::Learn,
        test_level: None,
    };

    pub fn new(block_n: Option<u32>, phase: Phase, test_level: Option<u32>) -> Self {
        Self {
            block_n,
            phase,
            test_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Starts at 1.
    pub episode: usize,
    pub block_n: Option<u32>,
    pub phase: Phase,
    pub test_level: Option<u32>,
    pub policy_id: u64,
    pub exact_gap: f64,
    pub cum_regret: f64,
    pub restart: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestOutcome {
    Passed,
    Failed,
    /// Its window closed before it collected enough episodes.
    Aborted,
    /// Cut off by the end of its block or of the stream.
    Truncated,
}

impl TestOutcome {
    pub fn name(self) -> &'static str {
        match self {
            TestOutcome::Passed => "passed",
            TestOutcome::Failed => "failed",
            TestOutcome::Aborted => "aborted",
            TestOutcome::Truncated => "truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub block_n: u32,
    pub level: u32,
    /// Episode at which the test was scheduled.
    pub spawned_at: usize,
    /// Episode at which it reached its outcome.
    pub closed_at: usize,
    pub active_episodes: usize,
    pub outcome: TestOutcome,
}

/// Maximal run of episodes between consecutive restarts, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub tests: Vec<TestRecord>,
    pub segments: Vec<Segment>,
}

impl RunTrace {
    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn restart_count(&self) -> usize {
        self.rows.iter().filter(|r| r.restart).count()
    }

    pub fn count_tests(&self, outcome: TestOutcome) -> usize {
        self.tests.iter().filter(|t| t.outcome == outcome).count()
    }

    /// Closes segments at every restart row and at the final row.
    pub fn rebuild_segments(&mut self) {
        self.segments.clear();
        let mut start = 1;
        for row in &self.rows {
            if row.restart {
                self.segments.push(Segment {
                    start,
                    end: row.episode,
                });
                start = row.episode + 1;
            }
        }
        if let Some(last) = self.rows.last() {
            if start <= last.episode {
                self.segments.push(Segment {
                    start,
                    end: last.episode,
                });
            }
        }
    }
}
