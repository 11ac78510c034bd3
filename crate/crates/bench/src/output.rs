//! CSV persistence of run traces.

use std::io::{Read, Write};

use neq_core::trace::{Phase, TestOutcome, TestRecord, TraceRow};
use thiserror::Error;

pub const TRACE_HEADER: [&str; 8] = [
    "episode",
    "block_n",
    "phase",
    "test_level",
    "policy_id",
    "exact_gap",
    "cum_regret",
    "restart",
];

pub const TESTS_HEADER: [&str; 6] = ["block_n", "level", "spawned_at", "closed_at", "active_episodes", "outcome"];

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header {found:?} differs from the expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("line {line}: bad {column} value {value:?}")]
    Field {
        line: u64,
        column: &'static str,
        value: String,
    },
}

/// `printf("%.9g")`: nine significant digits, trailing zeros dropped,
/// exponent notation outside `1e-4 <= |x| < 1e9`.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (8 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            opt(r.block_n),
            r.phase.name().to_string(),
            opt(r.test_level),
            r.policy_id.to_string(),
            format_float(r.exact_gap),
            format_float(r.cum_regret),
            u8::from(r.restart).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tests<W: Write>(tests: &[TestRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TESTS_HEADER)?;
    for t in tests {
        w.write_record([
            t.block_n.to_string(),
            t.level.to_string(),
            t.spawned_at.to_string(),
            t.closed_at.to_string(),
            t.active_episodes.to_string(),
            t.outcome.name().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn check_header<R: Read>(r: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), TraceFileError> {
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != expected {
        return Err(TraceFileError::Header {
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, column: &'static str) -> Result<T, TraceFileError> {
    let value = rec.get(i).unwrap_or_default();
    value.parse().map_err(|_| TraceFileError::Field {
        line: rec.position().map_or(0, |p| p.line()),
        column,
        value: value.to_string(),
    })
}

fn opt_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    column: &'static str,
) -> Result<Option<T>, TraceFileError> {
    if rec.get(i).unwrap_or_default().is_empty() {
        Ok(None)
    } else {
        field(rec, i, column).map(Some)
    }
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, TraceFileError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &TRACE_HEADER)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let phase_name: String = field(&rec, 2, "phase")?;
        let phase = Phase::from_name(&phase_name).ok_or_else(|| TraceFileError::Field {
            line: rec.position().map_or(0, |p| p.line()),
            column: "phase",
            value: phase_name.clone(),
        })?;
        let restart: u8 = field(&rec, 7, "restart")?;
        rows.push(TraceRow {
            episode: field(&rec, 0, "episode")?,
            block_n: opt_field(&rec, 1, "block_n")?,
            phase,
            test_level: opt_field(&rec, 3, "test_level")?,
            policy_id: field(&rec, 4, "policy_id")?,
            exact_gap: field(&rec, 5, "exact_gap")?,
            cum_regret: field(&rec, 6, "cum_regret")?,
            restart: restart != 0,
        });
    }
    Ok(rows)
}

pub fn read_tests<R: Read>(input: R) -> Result<Vec<TestRecord>, TraceFileError> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &TESTS_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let name: String = field(&rec, 5, "outcome")?;
        let outcome = match name.as_str() {
            "passed" => TestOutcome::Passed,
            "failed" => TestOutcome::Failed,
            "aborted" => TestOutcome::Aborted,
            "truncated" => TestOutcome::Truncated,
            _ => {
                return Err(TraceFileError::Field {
                    line: rec.position().map_or(0, |p| p.line()),
                    column: "outcome",
                    value: name,
                })
            }
        };
        out.push(TestRecord {
            block_n: field(&rec, 0, "block_n")?,
            level: field(&rec, 1, "level")?,
            spawned_at: field(&rec, 2, "spawned_at")?,
            closed_at: field(&rec, 3, "closed_at")?,
            active_episodes: field(&rec, 4, "active_episodes")?,
            outcome,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_nine_significant_digits() {
        for (x, s) in [
            (0.0, "0"),
            (0.5, "0.5"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0, "0.666666667"),
            (5330.123456789, "5330.12346"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-0.25, "-0.25"),
            (9.9999999999, "10"),
        ] {
            assert_eq!(format_float(x), s, "{x}");
        }
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let rows = vec![
            TraceRow {
                episode: 1,
                block_n: None,
                phase: Phase::Learn,
                test_level: None,
                policy_id: 0,
                exact_gap: 0.25,
                cum_regret: 0.25,
                restart: false,
            },
            TraceRow {
                episode: 2,
                block_n: Some(12),
                phase: Phase::Test,
                test_level: Some(3),
                policy_id: 7,
                exact_gap: 0.125,
                cum_regret: 0.375,
                restart: true,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("episode,block_n,phase,test_level,policy_id,exact_gap,cum_regret,restart\n1,,learn,,0,"));
        assert_eq!(read_trace(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "episode,phase\n1,learn\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(TraceFileError::Header { .. })));
    }
}
