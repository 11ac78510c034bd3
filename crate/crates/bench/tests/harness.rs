use std::path::PathBuf;
use std::process::Command;

use neq_bench::config::{
    AlgorithmName, ConfigError, EqChoice, ExperimentConfig, Family, Noise, ScheduleKind,
};
use neq_bench::experiment::{build_sequence, persist, simulate, trace_path};
use neq_bench::output::{read_trace, write_trace};
use neq_bench::summary::{trace_violations, SummaryStats};
use neq_core::trace::Phase;

const MINIMAL: &str = r#"
[game]
family = "matching-pennies"

[algorithm]
name = "multiscale"
kind = "ne"

[run]
T = 1000
"#;

fn switching(algorithm: &str, horizon: usize, switches: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        r#"
[game]
family = "dominance-flip"

[schedule]
kind = "switching"
{switches}

[algorithm]
name = "{algorithm}"
kind = "ne"

[run]
T = {horizon}
seeds = [0, 1, 2]
"#
    ))
    .unwrap()
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
    assert_eq!(cfg.game.family, Family::MatchingPennies);
    assert_eq!(cfg.game.noise, Noise::Bernoulli);
    assert_eq!(cfg.game.seed, None);
    assert_eq!(cfg.schedule.kind, ScheduleKind::Stationary);
    assert_eq!(cfg.algorithm.name, AlgorithmName::Multiscale);
    assert_eq!(cfg.algorithm.kind, EqChoice::Ne);
    assert_eq!(cfg.algorithm.delta, 0.1);
    assert_eq!(cfg.algorithm.budget, None);
    assert_eq!(cfg.run.horizon, 1000);
    assert_eq!(cfg.run.seeds, vec![0]);
    assert_eq!(cfg.run.out, PathBuf::from("out"));
}

#[test]
fn restart_etc_without_budget_names_the_key() {
    let text = MINIMAL.replace("multiscale", "restart-etc");
    let err = ExperimentConfig::parse(&text).unwrap_err();
    assert!(matches!(err, ConfigError::Invalid(_)));
    assert!(err.to_string().contains("algorithm.budget"), "{err}");
    let fixed = text.replace("kind = \"ne\"", "kind = \"ne\"\nbudget = 1.0");
    assert!(ExperimentConfig::parse(&fixed).is_ok());
}

#[test]
fn unknown_keys_are_named() {
    let text = MINIMAL.replace("T = 1000", "T = 1000\nrepeats = 3");
    let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
    assert!(err.contains("repeats"), "{err}");
    let text = MINIMAL.replace("[run]", "[extra]\nx = 1\n\n[run]");
    let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
    assert!(err.contains("extra"), "{err}");
}

#[test]
fn parse_errors_carry_a_position() {
    let err = ExperimentConfig::parse("[game]\nfamily = \n").unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn configs_round_trip() {
    let texts = [
        MINIMAL.to_string(),
        r#"
[game]
family = "random-matrix"
actions = [2, 3]
seed = 4
noise = "deterministic"

[schedule]
kind = "drift"
budget = 0.5
profile = "bursts"
bursts = 2

[algorithm]
name = "restart-etc"
kind = "ce"
delta = 0.05
budget = 0.5

[run]
T = 5000
seeds = [3, 1, 2]
out = "runs/drift"
"#
        .to_string(),
        switching("oblivious-baseline", 4096, "switch_times = [100, 2000]").to_toml(),
    ];
    for text in texts {
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }
}

#[test]
fn sequences_follow_the_schedule() {
    let cfg = switching("multiscale", 1 << 14, "switches = 3");
    let seq = build_sequence(&cfg, 0, 1 << 14).unwrap();
    assert_eq!(seq.change_points(), vec![4097, 8193, 12289]);
    let (a, b) = neq_core::game::families::dominance_flip_pair();
    assert_eq!(*seq.game(1), a);
    assert_eq!(*seq.game(4097), b);
    assert_eq!(*seq.game(8193), a);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = switching("multiscale", 12000, "switches = 1");
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(&cfg, 5).unwrap();
    let b = simulate(&cfg, 5).unwrap();
    persist(&dir.path().join("a"), &a).unwrap();
    persist(&dir.path().join("b"), &b).unwrap();
    for name in ["trace_seed5.csv", "tests_seed5.csv", "summary_seed5.json"] {
        let x = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn traces_are_conserved_and_summaries_reconcile() {
    for name in ["multiscale", "oblivious-baseline"] {
        let cfg = switching(name, 9000, "switches = 2");
        let out = simulate(&cfg, 1).unwrap();
        let rows = &out.trace.rows;
        assert!(trace_violations(rows, 1e-9).is_empty());
        let s = &out.summary;
        assert_eq!(s.episodes, 9000);
        assert_eq!(s.restarts, out.trace.restart_count());
        assert_eq!(s.tests, out.trace.tests.len());
        assert_eq!(s.phases.values().map(|p| p.episodes).sum::<usize>(), 9000);

        let mut buf = Vec::new();
        write_trace(rows, &mut buf).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        assert!(trace_violations(&back, 1e-8).is_empty());
        let again = SummaryStats::from_rows(1, &back, &out.trace.tests);
        assert_eq!(again.restarts, s.restarts);
        assert_eq!(again.phases.keys().collect::<Vec<_>>(), s.phases.keys().collect::<Vec<_>>());
        assert!((again.cumulative_regret - s.cumulative_regret).abs() <= 1e-8 * s.cumulative_regret.max(1.0));
    }
}

/// After the switch the baseline keeps its policy, so regret grows at the
/// policy's exact gap in the new game.
#[test]
fn baseline_regret_grows_linearly_after_a_switch() {
    let horizon = 1 << 14;
    let cfg = switching("oblivious-baseline", horizon, "switch_times = [8193]");
    for seed in 0..3 {
        let out = simulate(&cfg, seed).unwrap();
        let rows = &out.trace.rows;
        let last = rows.last().unwrap();
        assert_eq!(last.phase, Phase::Commit);
        assert!(rows[8192..].iter().all(|r| r.policy_id == last.policy_id));
        let window = 4096;
        let late = (last.cum_regret - rows[horizon - 1 - window].cum_regret) / window as f64;
        let new_gap = last.exact_gap;
        assert!(new_gap >= 0.4, "committed policy has gap {new_gap} after the switch");
        assert!(late >= 0.5 * new_gap);
        assert!((late - new_gap).abs() < 1e-9);
        assert!(rows[..8192].iter().rev().take(100).all(|r| r.exact_gap < 0.1));
    }
}

#[test]
fn multiscale_is_quiet_on_a_stationary_game() {
    let cfg = ExperimentConfig::parse(&MINIMAL.replace("T = 1000", "T = 16384\nseeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]")).unwrap();
    let quiet = cfg
        .run
        .seeds
        .iter()
        .filter(|&&s| simulate(&cfg, s).unwrap().summary.restarts == 0)
        .count();
    assert!(quiet >= 9, "{quiet} of 10 seeds without restarts");
}

#[test]
fn cli_runs_and_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    let out = dir.path().join("out");
    std::fs::write(&config, MINIMAL.replace("T = 1000", "T = 2000\nseeds = [0, 1]")).unwrap();
    let bin = env!("CARGO_BIN_EXE_neq-bench");
    let status = Command::new(bin)
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .env("NEQ_BENCH_THREADS", "2")
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(trace_path(&out, 0).exists() && trace_path(&out, 1).exists());

    let sweep = dir.path().join("sweep");
    let status = Command::new(bin)
        .args(["sweep", "--config"])
        .arg(&config)
        .args(["--T", "2^9,2^10,1500", "--out"])
        .arg(&sweep)
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(sweep.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["horizons"], serde_json::json!([512, 1024, 1500]));

    let output = Command::new(bin).args(["summarize", "--in"]).arg(&sweep).output().unwrap();
    assert!(output.status.success());
    let again: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(again["horizons"], summary["horizons"]);
    assert_eq!(again["seeds"].as_array().unwrap().len(), 2);

    let bad = Command::new(bin).args(["run", "--config"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!bad.status.success());
}
