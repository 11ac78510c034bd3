//! Flat text serialization.
//!
//! ```text
//! neq-game 1
//! players 2
//! horizon 1
//! states 1
//! actions 2 2
//! noise bernoulli
//! transitions
//! 1            # one row of S numbers per (h, s, joint), row-major
//! ...
//! rewards
//! 1 0          # one row of m numbers per (h, s, joint)
//! ...
//! ```
//!
//! Blank lines and `#` comments are ignored. Numbers are written in shortest
//! round-trip form, so `parse_game(&write_game(g)) == g`.

use std::fmt::Write as _;

use super::{Game, GameError, RewardNoise, Shape};

const MAGIC: &str = "neq-game 1";

pub fn write_game(game: &Game) -> String {
    let shape = game.shape();
    let mut out = String::new();
    let actions: Vec<String> = shape.actions().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "players {}", shape.players());
    let _ = writeln!(out, "horizon {}", shape.horizon());
    let _ = writeln!(out, "states {}", shape.states());
    let _ = writeln!(out, "actions {}", actions.join(" "));
    let _ = writeln!(out, "noise {}", game.noise().name());
    out.push_str("transitions\n");
    write_rows(&mut out, game.transition_table(), shape.states());
    out.push_str("rewards\n");
    write_rows(&mut out, game.reward_table(), shape.players());
    out
}

fn write_rows(out: &mut String, table: &[f64], width: usize) {
    for row in table.chunks_exact(width) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (idx, raw) in self.inner.by_ref() {
            let line = raw.split('#').next().unwrap_or("").trim();
            self.last = idx + 1;
            if !line.is_empty() {
                return Some((idx + 1, line));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), GameError> {
        self.next().ok_or_else(|| GameError::Parse {
            line: self.last + 1,
            message: format!("unexpected end of input, expected {what}"),
        })
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), GameError> {
        let (line, text) = self.expect(key)?;
        let mut words = text.split_whitespace();
        if words.next() != Some(key) {
            return Err(GameError::Parse {
                line,
                message: format!("expected `{key}`, found `{text}`"),
            });
        }
        Ok((line, words.collect()))
    }
}

fn parse_count(line: usize, word: &str) -> Result<usize, GameError> {
    word.parse().map_err(|_| GameError::Parse {
        line,
        message: format!("`{word}` is not a non-negative integer"),
    })
}

fn single_count(lines: &mut Lines<'_>, key: &str) -> Result<usize, GameError> {
    let (line, words) = lines.keyed(key)?;
    match words.as_slice() {
        [w] => parse_count(line, w),
        _ => Err(GameError::Parse {
            line,
            message: format!("`{key}` takes exactly one value"),
        }),
    }
}

fn read_table(lines: &mut Lines<'_>, rows: usize, width: usize, out: &mut Vec<f64>) -> Result<(), GameError> {
    for _ in 0..rows {
        let (line, text) = lines.expect("a table row")?;
        let before = out.len();
        for word in text.split_whitespace() {
            let v: f64 = word.parse().map_err(|_| GameError::Parse {
                line,
                message: format!("`{word}` is not a number"),
            })?;
            out.push(v);
        }
        if out.len() - before != width {
            return Err(GameError::Parse {
                line,
                message: format!("expected {width} values, found {}", out.len() - before),
            });
        }
    }
    Ok(())
}

/// Parses the text format and validates the resulting game.
pub fn parse_game(text: &str) -> Result<Game, GameError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (line, head) = lines.expect("header")?;
    if head != MAGIC {
        return Err(GameError::Parse {
            line,
            message: format!("expected header `{MAGIC}`"),
        });
    }
    let players = single_count(&mut lines, "players")?;
    let horizon = single_count(&mut lines, "horizon")?;
    let states = single_count(&mut lines, "states")?;
    let (line, words) = lines.keyed("actions")?;
    if words.len() != players {
        return Err(GameError::Parse {
            line,
            message: format!("expected {players} action counts, found {}", words.len()),
        });
    }
    let actions = words
        .iter()
        .map(|w| parse_count(line, w))
        .collect::<Result<Vec<_>, _>>()?;
    let (line, words) = lines.keyed("noise")?;
    let noise = match words.as_slice() {
        [w] => RewardNoise::from_name(w),
        _ => None,
    }
    .ok_or_else(|| GameError::Parse {
        line,
        message: "noise must be `bernoulli` or `deterministic`".into(),
    })?;
    let shape = Shape::new(horizon, states, actions).map_err(|e| GameError::Parse {
        line,
        message: e.to_string(),
    })?;
    let rows = horizon * states * shape.joint_actions();

    let mut transitions = Vec::with_capacity(rows * states);
    lines.keyed("transitions")?;
    read_table(&mut lines, rows, states, &mut transitions)?;
    let mut rewards = Vec::with_capacity(rows * players);
    lines.keyed("rewards")?;
    read_table(&mut lines, rows, players, &mut rewards)?;
    if let Some((line, _)) = lines.next() {
        return Err(GameError::Parse {
            line,
            message: "trailing content after rewards table".into(),
        });
    }
    Game::new(shape, transitions, rewards, noise)
}
