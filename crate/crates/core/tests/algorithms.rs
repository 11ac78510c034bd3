use std::sync::Arc;

use neq_core::dp::EqKind;
use neq_core::env::GameStream;
use neq_core::game::families;
use neq_core::nonstationary::{
    compute_block_params, first_block, run_multiscale, run_restart_etc, tune_etc, BlockEnd, EtcConfig, ExactTester,
    OracleTester,
};
use neq_core::oracles::{profile_for, OracleProfile, ProfileKind};
use neq_core::sequence::GameSequence;
use neq_core::trace::{Phase, RunTrace, TestOutcome};
use neq_core::SimRng;
use rand::SeedableRng;

fn ne_profile() -> OracleProfile {
    profile_for(ProfileKind::NeZeroSum, families::matching_pennies().shape(), 0.1).unwrap()
}

fn algo_rng(seed: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

fn phase_runs(trace: &RunTrace) -> Vec<(Phase, u64)> {
    let mut runs: Vec<(Phase, u64)> = Vec::new();
    for row in &trace.rows {
        match runs.last_mut() {
            Some((p, k)) if *p == row.phase => *k += 1,
            _ => runs.push((row.phase, 1)),
        }
    }
    runs
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn etc_alternates_fixed_phase_lengths() {
    let p = ne_profile();
    let cfg = EtcConfig {
        horizon_t: 0,
        budget: 1.0,
        eps: 0.5,
        learn_len: p.learn_budget(0.5),
        commit_len: 700,
    };
    let t = 2 * (cfg.learn_len + cfg.commit_len) + cfg.learn_len + 100;
    let cfg = EtcConfig { horizon_t: t, ..cfg };
    let seq = Arc::new(GameSequence::stationary(families::matching_pennies(), t as usize));
    let mut env = GameStream::new(seq, EqKind::Ne, 1);
    let report = run_restart_etc(&mut env, &cfg, &p, &mut algo_rng(1)).unwrap();
    let (l, c) = (cfg.learn_len, cfg.commit_len);
    let expected = vec![
        (Phase::Learn, l),
        (Phase::Commit, c),
        (Phase::Learn, l),
        (Phase::Commit, c),
        (Phase::Learn, l),
        (Phase::Commit, 100),
    ];
    assert_eq!(report.phases, expected);
    assert_eq!(phase_runs(&env.into_trace()), expected);
}

#[test]
fn etc_shorter_than_one_learning_phase() {
    let p = ne_profile();
    let cfg = tune_etc(1000, 1.0, &p);
    let cfg = EtcConfig {
        eps: 0.1,
        learn_len: p.learn_budget(0.1),
        ..cfg
    };
    assert!(cfg.learn_len > 1000);
    let seq = Arc::new(GameSequence::stationary(families::matching_pennies(), 1000));
    let mut env = GameStream::new(seq, EqKind::Ne, 2);
    let report = run_restart_etc(&mut env, &cfg, &p, &mut algo_rng(2)).unwrap();
    assert_eq!(report.phases, vec![(Phase::Learn, 1000)]);
    assert!(env.into_trace().rows.iter().all(|r| r.phase == Phase::Learn));
}

#[test]
fn etc_commits_to_accurate_policies_on_a_stationary_game() {
    let p = ne_profile();
    let eps = 0.1;
    let learn_len = p.learn_budget(eps);
    let cfg = EtcConfig {
        horizon_t: learn_len + 2000,
        budget: 0.0,
        eps,
        learn_len,
        commit_len: 2000,
    };
    let mut good = 0;
    for seed in 0..20 {
        let seq = Arc::new(GameSequence::stationary(families::matching_pennies(), cfg.horizon_t as usize));
        let mut env = GameStream::new(seq, EqKind::Ne, seed);
        run_restart_etc(&mut env, &cfg, &p, &mut algo_rng(seed)).unwrap();
        let trace = env.into_trace();
        let commit: Vec<f64> = trace
            .rows
            .iter()
            .filter(|r| r.phase == Phase::Commit)
            .map(|r| r.exact_gap)
            .collect();
        assert_eq!(commit.len(), 2000);
        if commit.iter().sum::<f64>() / commit.len() as f64 <= eps {
            good += 1;
        }
    }
    assert!(good >= 18, "{good} of 20 seeds");
}

#[test]
fn multiscale_rarely_restarts_on_a_stationary_game() {
    let p = ne_profile();
    let mut quiet = 0;
    for seed in 0..20 {
        let seq = Arc::new(GameSequence::stationary(families::matching_pennies(), 1 << 14));
        let mut env = GameStream::new(seq, EqKind::Ne, seed);
        let mut tester = OracleTester { profile: p.clone() };
        let report = run_multiscale(&mut env, &p, &mut tester, &mut algo_rng(seed)).unwrap();
        let trace = env.into_trace();
        assert_eq!(trace.rows.len(), 1 << 14);
        assert_eq!(trace.restart_count(), report.restarts());
        if report.restarts() == 0 {
            quiet += 1;
        }
    }
    assert!(quiet >= 18, "{quiet} of 20 seeds without restarts");
}

#[test]
fn multiscale_is_deterministic_per_seed() {
    let p = ne_profile();
    let (a, b) = families::dominance_flip_pair();
    let seq = Arc::new(GameSequence::switching(vec![a, b], vec![6000], 1 << 14).unwrap());
    let run = || {
        let mut env = GameStream::new(Arc::clone(&seq), EqKind::Ne, 9);
        let mut tester = OracleTester { profile: p.clone() };
        run_multiscale(&mut env, &p, &mut tester, &mut algo_rng(9)).unwrap();
        env.into_trace()
    };
    assert_eq!(run(), run());
}

/// Switch to a game in which the committed policy has gap 0.5 during the
/// commit phase of block `N + 1`, with tests at `eps(0) = 0.1`.
#[test]
fn exact_tests_detect_a_switch_quickly() {
    let (a, b) = families::dominance_flip_pair();
    let mut p = profile_for(ProfileKind::NeZeroSum, a.shape(), 0.1).unwrap();
    p.c2 = 0.01;
    let n0 = first_block(&p);
    let block = 1usize << (n0 + 1);
    let switch = (1 << n0) + block - block / 8;
    let params = compute_block_params(n0 + 1, p.c2, p.delta);
    assert!(2.0 * params.eps(0) <= 0.5);
    let bound = 4.0 * params.window(0) as f64 / params.spawn_prob(0);

    let mut delays = Vec::new();
    for seed in 0..20 {
        let seq = Arc::new(GameSequence::switching(vec![a.clone(), b.clone()], vec![switch], switch + 4 * block).unwrap());
        let mut env = GameStream::new(Arc::clone(&seq), EqKind::Ne, seed);
        let mut tester = ExactTester {
            sequence: Arc::clone(&seq),
            kind: EqKind::Ne,
        };
        let report = run_multiscale(&mut env, &p, &mut tester, &mut algo_rng(seed)).unwrap();
        let trace = env.into_trace();
        for row in trace.rows.iter().filter(|r| r.restart) {
            assert!(trace
                .tests
                .iter()
                .any(|t| t.outcome == TestOutcome::Failed && t.closed_at == row.episode));
        }
        let detected = report
            .blocks
            .iter()
            .find(|b| b.ended == BlockEnd::Restarted && b.end >= switch)
            .map_or(f64::INFINITY, |b| (b.end - switch) as f64);
        delays.push(detected);
    }
    let med = median(delays);
    assert!(med <= bound, "median delay {med} above {bound}");
}
