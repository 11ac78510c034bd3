//! Summary statistics of run traces.

use std::collections::BTreeMap;

use neq_core::trace::{Phase, TestOutcome, TestRecord, TraceRow};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub episodes: usize,
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub seed: u64,
    pub episodes: usize,
    pub cumulative_regret: f64,
    /// Keyed by phase name; phases that never occur are left out.
    pub phases: BTreeMap<String, PhaseStats>,
    pub restarts: usize,
    pub tests: usize,
    pub failed_tests: usize,
    pub aborted_tests: usize,
    /// Mean exact gap over the last quarter of the episodes.
    pub final_quarter_gap: f64,
}

impl SummaryStats {
    pub fn from_rows(seed: u64, rows: &[TraceRow], tests: &[TestRecord]) -> Self {
        let mut phases: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        for r in rows {
            let e = phases.entry(r.phase.name().to_string()).or_default();
            e.0 += 1;
            e.1 += r.exact_gap;
        }
        let phases = phases
            .into_iter()
            .map(|(k, (n, sum))| {
                (
                    k,
                    PhaseStats {
                        episodes: n,
                        mean_gap: sum / n as f64,
                    },
                )
            })
            .collect();
        let tail = &rows[rows.len() - (rows.len() / 4).max(1).min(rows.len())..];
        let final_quarter_gap = if tail.is_empty() {
            0.0
        } else {
            tail.iter().map(|r| r.exact_gap).sum::<f64>() / tail.len() as f64
        };
        let count = |o| tests.iter().filter(|t| t.outcome == o).count();
        Self {
            seed,
            episodes: rows.len(),
            cumulative_regret: rows.last().map_or(0.0, |r| r.cum_regret),
            phases,
            restarts: rows.iter().filter(|r| r.restart).count(),
            tests: tests.len(),
            failed_tests: count(TestOutcome::Failed),
            aborted_tests: count(TestOutcome::Aborted),
            final_quarter_gap,
        }
    }

    pub fn phase(&self, phase: Phase) -> Option<&PhaseStats> {
        self.phases.get(phase.name())
    }
}

/// Consistency problems of a trace: missing or repeated episodes, and a
/// final cumulative regret that differs from the summed gaps by more than
/// `tol` relative to the total.
pub fn trace_violations(rows: &[TraceRow], tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if r.episode != i + 1 {
            out.push(format!("row {} has episode {}", i + 1, r.episode));
            break;
        }
    }
    let total: f64 = rows.iter().map(|r| r.exact_gap).sum();
    let last = rows.last().map_or(0.0, |r| r.cum_regret);
    if (total - last).abs() > tol * total.abs().max(1.0) {
        out.push(format!("final cumulative regret {last} but the gaps sum to {total}"));
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum SlopeError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point ({0}, {1}) is not positive")]
    Nonpositive(f64, f64),
    #[error("all T values are equal")]
    Degenerate,
}

/// Least-squares slope of `log(regret)` against `log(T)`, together with the
/// largest absolute residual of the fit in log space.
pub fn slope_estimate(points: &[(f64, f64)]) -> Result<(f64, f64), SlopeError> {
    if points.len() < 3 {
        return Err(SlopeError::TooFewPoints(points.len()));
    }
    if let Some(&(t, r)) = points.iter().find(|(t, r)| !(*t > 0.0 && *r > 0.0)) {
        return Err(SlopeError::Nonpositive(t, r));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(t, r)| (t.ln(), r.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SlopeError::Degenerate);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = logs
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok((slope, residual))
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSlope {
    pub seed: u64,
    /// Cumulative regret at each horizon, in the order of `SweepSummary::horizons`.
    pub regrets: Vec<f64>,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub horizons: Vec<usize>,
    pub seeds: Vec<SeedSlope>,
    pub median_slope: Option<f64>,
    /// Mean over seeds of the final-quarter gap, per horizon.
    pub final_quarter_gap: Vec<f64>,
}

impl SweepSummary {
    /// `runs[k][j]` is the summary for horizon `k` and seed `j`.
    pub fn new(horizons: Vec<usize>, runs: &[Vec<SummaryStats>]) -> Self {
        let n_seeds = runs.first().map_or(0, Vec::len);
        let seeds: Vec<SeedSlope> = (0..n_seeds)
            .map(|j| {
                let regrets: Vec<f64> = runs.iter().map(|r| r[j].cumulative_regret).collect();
                let points: Vec<(f64, f64)> = horizons.iter().map(|&t| t as f64).zip(regrets.iter().copied()).collect();
                let fit = slope_estimate(&points).ok();
                SeedSlope {
                    seed: runs[0][j].seed,
                    regrets,
                    slope: fit.map(|f| f.0),
                    residual: fit.map(|f| f.1),
                }
            })
            .collect();
        let slopes: Vec<f64> = seeds.iter().filter_map(|s| s.slope).collect();
        let final_quarter_gap = runs
            .iter()
            .map(|r| r.iter().map(|s| s.final_quarter_gap).sum::<f64>() / r.len().max(1) as f64)
            .collect();
        Self {
            horizons,
            median_slope: if slopes.len() == seeds.len() { median(&slopes) } else { None },
            seeds,
            final_quarter_gap,
        }
    }
}
