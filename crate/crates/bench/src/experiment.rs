//! Building and running one configured experiment.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use neq_core::env::GameStream;
use neq_core::game::{families, parse_game, Game};
use neq_core::nonstationary::{run_multiscale, run_oblivious, run_restart_etc, tune_etc, OracleTester};
use neq_core::oracles::{profile_for, OracleProfile};
use neq_core::sequence::GameSequence;
use neq_core::trace::RunTrace;
use neq_core::SimRng;
use rand::SeedableRng;

use crate::config::{AlgorithmName, ExperimentConfig, Family, ScheduleKind};
use crate::output::{write_tests, write_trace};
use crate::summary::SummaryStats;

fn draw(cfg: &ExperimentConfig, rng: &mut SimRng) -> anyhow::Result<Game> {
    let g = &cfg.game;
    let actions = g.actions.clone().unwrap_or_else(|| vec![2, 2]);
    Ok(match g.family {
        Family::MatchingPennies => families::matching_pennies(),
        Family::PrisonersDilemma => families::prisoners_dilemma(),
        Family::Chicken => families::chicken(),
        Family::Coordination => families::coordination(),
        Family::DominanceFlip => families::dominance_flip_pair().0,
        Family::RandomZeroSum => families::random_zero_sum(actions[0], actions[1], rng),
        Family::RandomMatrix => families::random_matrix(&actions, rng),
        Family::File => {
            let path = g.path.as_deref().expect("validated");
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_game(&text).with_context(|| format!("parsing {}", path.display()))?
        }
    })
}

/// `count` base games: alternating between the two dominance-flip games,
/// or independent draws of a random family.
fn bases(cfg: &ExperimentConfig, count: usize, rng: &mut SimRng) -> anyhow::Result<Vec<Game>> {
    if cfg.game.family == Family::DominanceFlip {
        let (a, b) = families::dominance_flip_pair();
        return Ok((0..count).map(|k| if k % 2 == 0 { a.clone() } else { b.clone() }).collect());
    }
    (0..count).map(|_| draw(cfg, rng)).collect()
}

/// The game sequence of a run of `horizon` episodes.
pub fn build_sequence(cfg: &ExperimentConfig, seed: u64, horizon: usize) -> anyhow::Result<GameSequence> {
    let mut rng = SimRng::seed_from_u64(cfg.game.seed.unwrap_or(seed));
    let noise = cfg.game.noise.into();
    let s = &cfg.schedule;
    let seq = match s.kind {
        ScheduleKind::Stationary => GameSequence::stationary(draw(cfg, &mut rng)?.with_noise(noise), horizon),
        ScheduleKind::Switching => {
            let times = s.switch_times_for(horizon);
            let games = bases(cfg, times.len() + 1, &mut rng)?;
            GameSequence::switching(games.into_iter().map(|g| g.with_noise(noise)).collect(), times, horizon)?
        }
        ScheduleKind::Drift => {
            let mut pair = bases(cfg, 2, &mut rng)?.into_iter().map(|g| g.with_noise(noise));
            let (g0, g1) = (pair.next().expect("two games"), pair.next().expect("two games"));
            GameSequence::drift(g0, g1, s.budget.expect("validated"), horizon, s.drift_profile())?
        }
    };
    Ok(seq)
}

pub fn build_profile(cfg: &ExperimentConfig, sequence: &GameSequence) -> anyhow::Result<OracleProfile> {
    let mut profile = profile_for(cfg.algorithm.kind.into(), sequence.shape(), cfg.algorithm.delta)?;
    if let Some(c2) = cfg.algorithm.test_constant {
        profile.c2 = c2;
    }
    Ok(profile)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub summary: SummaryStats,
}

/// Runs the configured algorithm for `cfg.run.T` episodes with the given
/// seed. Reward noise is seeded from `seed`, the algorithm's randomness
/// from an independent stream of the same seed.
pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<RunOutput> {
    let horizon = cfg.run.horizon;
    let sequence = Arc::new(build_sequence(cfg, seed, horizon)?);
    let profile = build_profile(cfg, &sequence)?;
    // Drift paths interpolate between their endpoints, which keeps zero-sum games zero-sum.
    let probes = match cfg.schedule.kind {
        ScheduleKind::Drift => vec![1, horizon],
        _ => std::iter::once(1).chain(sequence.change_points()).collect(),
    };
    for t in probes {
        profile
            .check_game(&sequence.game(t))
            .with_context(|| format!("game at episode {t}"))?;
    }
    let kind = profile.kind.eq_kind();
    let mut env = GameStream::new(Arc::clone(&sequence), kind, seed);
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(2);
    let a = &cfg.algorithm;
    match a.name {
        AlgorithmName::RestartEtc => {
            let etc = tune_etc(horizon as u64, a.budget.expect("validated"), &profile);
            log::debug!("restart-etc: eps {:.4}, learn {}, commit {}", etc.eps, etc.learn_len, etc.commit_len);
            run_restart_etc(&mut env, &etc, &profile, &mut rng)?;
        }
        AlgorithmName::Multiscale => {
            let mut tester = OracleTester { profile: profile.clone() };
            let report = run_multiscale(&mut env, &profile, &mut tester, &mut rng)?;
            log::debug!(
                "multiscale: first block {}, {} blocks, {} tests",
                report.first_block,
                report.blocks.len(),
                report.tests.len()
            );
        }
        AlgorithmName::ObliviousBaseline => run_oblivious(&mut env, &profile, a.baseline_epsilon, &mut rng)?,
    }
    let trace = env.into_trace();
    if trace.rows.len() != horizon {
        bail!("algorithm stopped after {} of {horizon} episodes", trace.rows.len());
    }
    let summary = SummaryStats::from_rows(seed, &trace.rows, &trace.tests);
    Ok(RunOutput { trace, summary })
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

pub fn tests_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("tests_seed{seed}.csv"))
}

pub fn summary_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("summary_seed{seed}.json"))
}

/// Writes `trace_seed{k}.csv`, `tests_seed{k}.csv` and `summary_seed{k}.json` into `dir`.
pub fn persist(dir: &Path, out: &RunOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let seed = out.summary.seed;
    let path = trace_path(dir, seed);
    write_trace(&out.trace.rows, BufWriter::new(File::create(&path)?)).with_context(|| format!("writing {}", path.display()))?;
    let path = tests_path(dir, seed);
    write_tests(&out.trace.tests, BufWriter::new(File::create(&path)?)).with_context(|| format!("writing {}", path.display()))?;
    let path = summary_path(dir, seed);
    let mut f = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, &out.summary)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Simulates and writes the outputs of one seed.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> anyhow::Result<SummaryStats> {
    let out = simulate(cfg, seed).with_context(|| format!("seed {seed}"))?;
    persist(dir, &out)?;
    Ok(out.summary)
}
