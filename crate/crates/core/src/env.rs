//! Multi-agent episode streams.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;

use crate::dp::{gap_value, EqKind};
use crate::episode::{sample_episode, Controller, Trajectory};
use crate::error::{Error, Result};
use crate::game::{Game, Shape};
use crate::policy::JointPolicy;
use crate::sequence::GameSequence;
use crate::trace::{Label, RunTrace, TestRecord, TraceRow};
use crate::SimRng;

/// A stream of episodes the algorithms interact with.
pub trait MultiAgentEnv {
    fn shape(&self) -> &Shape;

    /// Episodes left, or `None` for an unbounded stream.
    fn remaining(&self) -> Option<usize>;

    /// Plays one episode; [`Error::Exhausted`] once the stream has ended.
    fn run_episode(&mut self, controller: &mut dyn Controller) -> Result<Trajectory>;

    /// Tags the following episodes in the trace, if the stream keeps one.
    fn set_label(&mut self, _label: Label) {}

    /// Flags the most recent episode as a restart point.
    fn mark_restart(&mut self) {}

    /// Stores the outcome of a scheduled test, if the stream keeps a trace.
    fn record_test(&mut self, _record: TestRecord) {}

    fn episodes_done(&self) -> usize;
}

/// A single game repeated, optionally for a bounded number of episodes.
#[derive(Debug, Clone)]
pub struct StationaryEnv {
    game: Game,
    rng: SimRng,
    limit: Option<usize>,
    done: usize,
}

impl StationaryEnv {
    pub fn new(game: Game, rng: SimRng) -> Self {
        Self {
            game,
            rng,
            limit: None,
            done: 0,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn game(&self) -> &Game {
        &self.game
    }
}

impl MultiAgentEnv for StationaryEnv {
    fn shape(&self) -> &Shape {
        self.game.shape()
    }

    fn remaining(&self) -> Option<usize> {
        self.limit.map(|l| l - self.done)
    }

    fn run_episode(&mut self, controller: &mut dyn Controller) -> Result<Trajectory> {
        if self.limit.is_some_and(|l| self.done >= l) {
            return Err(Error::Exhausted);
        }
        self.done += 1;
        sample_episode(&self.game, controller, &mut self.rng)
    }

    fn episodes_done(&self) -> usize {
        self.done
    }
}

const CACHE_SLOTS: usize = 64;

/// Assigns small run-local ids to policy objects by pointer identity.
///
/// Recently seen policies keep their id; one that falls out of the window
/// gets a fresh id if it comes back. Ids depend only on the order of calls,
/// so they are reproducible across runs.
#[derive(Debug, Default)]
struct PolicyIds {
    recent: VecDeque<(Arc<JointPolicy>, u64)>,
    next: u64,
}

impl PolicyIds {
    fn id_of(&mut self, policy: &Arc<JointPolicy>) -> u64 {
        if let Some(pos) = self.recent.iter().position(|(p, _)| Arc::ptr_eq(p, policy)) {
            let entry = self.recent.remove(pos).expect("position is valid");
            let id = entry.1;
            self.recent.push_front(entry);
            return id;
        }
        let id = self.next;
        self.next += 1;
        self.recent.push_front((Arc::clone(policy), id));
        self.recent.truncate(CACHE_SLOTS);
        id
    }
}

/// A [`GameSequence`] played episode by episode, recording the exact gap of
/// every executed policy under the game of that episode.
#[derive(Debug)]
pub struct GameStream {
    sequence: Arc<GameSequence>,
    kind: EqKind,
    rng: SimRng,
    done: usize,
    current: Option<(u32, Game)>,
    ids: PolicyIds,
    gaps: VecDeque<((u32, u64), f64)>,
    label: Label,
    trace: RunTrace,
}

impl GameStream {
    pub fn new(sequence: Arc<GameSequence>, kind: EqKind, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(1);
        Self {
            sequence,
            kind,
            rng,
            done: 0,
            current: None,
            ids: PolicyIds::default(),
            gaps: VecDeque::with_capacity(CACHE_SLOTS),
            label: Label::LEARN,
            trace: RunTrace::default(),
        }
    }

    pub fn sequence(&self) -> &GameSequence {
        &self.sequence
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn trace_mut(&mut self) -> &mut RunTrace {
        &mut self.trace
    }

    pub fn into_trace(mut self) -> RunTrace {
        self.trace.rebuild_segments();
        self.trace
    }

    fn gap_of(&mut self, version: u32, policy: &Arc<JointPolicy>) -> Result<(u64, f64)> {
        let id = self.ids.id_of(policy);
        let key = (version, id);
        if let Some(pos) = self.gaps.iter().position(|(k, _)| *k == key) {
            let entry = self.gaps.remove(pos).expect("position is valid");
            let gap = entry.1;
            self.gaps.push_front(entry);
            return Ok((id, gap));
        }
        let game = &self.current.as_ref().expect("game loaded before gap").1;
        let gap = gap_value(game, policy, self.kind)?;
        self.gaps.push_front((key, gap));
        self.gaps.truncate(CACHE_SLOTS);
        Ok((id, gap))
    }
}

impl MultiAgentEnv for GameStream {
    fn shape(&self) -> &Shape {
        self.sequence.shape()
    }

    fn remaining(&self) -> Option<usize> {
        Some(self.sequence.len() - self.done)
    }

    fn run_episode(&mut self, controller: &mut dyn Controller) -> Result<Trajectory> {
        if self.done >= self.sequence.len() {
            return Err(Error::Exhausted);
        }
        let t = self.done + 1;
        let version = self.sequence.version(t);
        if self.current.as_ref().is_none_or(|(v, _)| *v != version) {
            self.current = Some((version, self.sequence.game(t).into_owned()));
        }
        let game = &self.current.as_ref().expect("just loaded").1;
        let traj = sample_episode(game, controller, &mut self.rng).map_err(|e| e.at_episode(t))?;
        let policy = controller.executed_policy();
        let (policy_id, exact_gap) = self.gap_of(version, &policy).map_err(|e| e.at_episode(t))?;
        let cum_regret = self.trace.cumulative_regret() + exact_gap;
        self.trace.rows.push(TraceRow {
            episode: t,
            block_n: self.label.block_n,
            phase: self.label.phase,
            test_level: self.label.test_level,
            policy_id,
            exact_gap,
            cum_regret,
            restart: false,
        });
        self.done = t;
        Ok(traj)
    }

    fn set_label(&mut self, label: Label) {
        self.label = label;
    }

    fn mark_restart(&mut self) {
        if let Some(row) = self.trace.rows.last_mut() {
            row.restart = true;
        }
    }

    fn record_test(&mut self, record: TestRecord) {
        self.trace.tests.push(record);
    }

    fn episodes_done(&self) -> usize {
        self.done
    }
}
