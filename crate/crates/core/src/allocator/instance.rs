//! Plain-text allocation instances.
//!
//! ```text
//! # comments start with '#'
//! channels 2
//! rates 2e6 5.5e6 11e6          # shared by every channel
//! p_max 1.0
//! cap 2 0.8                      # optional, 1-based channel, watts
//! power 0.2 0.5 0.9              # one line per channel, in order
//! power 0.3 0.6 1.2
//! ```
//!
//! Instead of one `rates` line, an instance may give one `rate_row` line per
//! channel. Powers may be `inf` for unusable items. Keywords may appear in
//! any order, but `power` and `rate_row` lines are taken in channel order.

use std::fmt::Write;

use super::AllocationProblem;
use crate::error::{Error, Result};

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let content = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    text: &content[s..i],
                    column: s + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &content[s..],
            column: s + 1,
        });
    }
    out
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn number(tok: &Token<'_>, line: usize) -> Result<f64> {
    let v: f64 = match tok.text {
        "inf" | "+inf" | "infinity" => f64::INFINITY,
        t => t
            .parse()
            .map_err(|_| err(line, tok.column, format!("expected a number, found `{t}`")))?,
    };
    if v.is_nan() {
        return Err(err(line, tok.column, "NaN is not allowed"));
    }
    Ok(v)
}

fn numbers(toks: &[Token<'_>], line: usize) -> Result<Vec<f64>> {
    toks.iter().map(|t| number(t, line)).collect()
}

fn single<'a>(toks: &'a [Token<'a>], line: usize, key: &Token<'_>) -> Result<&'a Token<'a>> {
    match toks {
        [one] => Ok(one),
        [] => Err(err(
            line,
            key.column,
            format!("`{}` needs a value", key.text),
        )),
        [_, extra, ..] => Err(err(line, extra.column, "unexpected extra value")),
    }
}

/// Parse an instance. Errors carry 1-based line and column.
pub fn parse_problem(text: &str) -> Result<AllocationProblem> {
    let mut channels: Option<(usize, usize)> = None;
    let mut shared_rates: Option<(Vec<f64>, usize)> = None;
    let mut rate_rows: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut power_rows: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut p_max: Option<f64> = None;
    let mut caps: Vec<(usize, f64, usize, usize)> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let toks = tokens(raw);
        let Some((key, rest)) = toks.split_first() else {
            continue;
        };
        match key.text {
            "channels" => {
                let t = single(rest, line, key)?;
                let m: usize = t.text.parse().map_err(|_| {
                    err(
                        line,
                        t.column,
                        format!("expected a channel count, found `{}`", t.text),
                    )
                })?;
                if m == 0 {
                    return Err(err(line, t.column, "channel count must be at least 1"));
                }
                if channels.is_some() {
                    return Err(err(line, key.column, "duplicate `channels`"));
                }
                channels = Some((m, line));
            }
            "rates" => {
                if rest.is_empty() {
                    return Err(err(line, key.column, "`rates` needs at least one value"));
                }
                if shared_rates.is_some() {
                    return Err(err(line, key.column, "duplicate `rates`"));
                }
                shared_rates = Some((numbers(rest, line)?, line));
            }
            "rate_row" => {
                if rest.is_empty() {
                    return Err(err(line, key.column, "`rate_row` needs at least one value"));
                }
                rate_rows.push((numbers(rest, line)?, line));
            }
            "power" => {
                if rest.is_empty() {
                    return Err(err(line, key.column, "`power` needs at least one value"));
                }
                power_rows.push((numbers(rest, line)?, line));
            }
            "p_max" => {
                let t = single(rest, line, key)?;
                if p_max.is_some() {
                    return Err(err(line, key.column, "duplicate `p_max`"));
                }
                p_max = Some(number(t, line)?);
            }
            "cap" => {
                if rest.len() != 2 {
                    return Err(err(
                        line,
                        key.column,
                        "`cap` takes a channel number and a power",
                    ));
                }
                let ch: usize = rest[0].text.parse().map_err(|_| {
                    err(
                        line,
                        rest[0].column,
                        format!("expected a channel number, found `{}`", rest[0].text),
                    )
                })?;
                caps.push((ch, number(&rest[1], line)?, line, rest[0].column));
            }
            other => {
                return Err(err(line, key.column, format!("unknown keyword `{other}`")));
            }
        }
    }

    let eof = last_line.max(1);
    let (m, m_line) = channels.ok_or_else(|| err(eof, 1, "missing `channels`"))?;
    let p_max = p_max.ok_or_else(|| err(eof, 1, "missing `p_max`"))?;
    if power_rows.len() != m {
        let line = power_rows.last().map_or(m_line, |r| r.1);
        return Err(err(
            line,
            1,
            format!("expected {m} `power` lines, found {}", power_rows.len()),
        ));
    }
    let rates: Vec<Vec<f64>> = match (shared_rates, rate_rows.is_empty()) {
        (Some((r, _)), true) => vec![r; m],
        (None, false) => {
            if rate_rows.len() != m {
                let line = rate_rows.last().map_or(m_line, |r| r.1);
                return Err(err(
                    line,
                    1,
                    format!("expected {m} `rate_row` lines, found {}", rate_rows.len()),
                ));
            }
            rate_rows.into_iter().map(|r| r.0).collect()
        }
        (Some((_, line)), false) => {
            return Err(err(line, 1, "use either `rates` or `rate_row`, not both"));
        }
        (None, true) => return Err(err(eof, 1, "missing `rates`")),
    };
    for (ch, (row, line)) in power_rows.iter().enumerate() {
        if row.len() != rates[ch].len() {
            return Err(err(
                *line,
                1,
                format!(
                    "channel {}: {} powers for {} rates",
                    ch + 1,
                    row.len(),
                    rates[ch].len()
                ),
            ));
        }
    }
    let mut cap_vec = vec![f64::INFINITY; m];
    for (ch, value, line, column) in caps {
        if ch == 0 || ch > m {
            return Err(err(
                line,
                column,
                format!("channel {ch} out of range 1..={m}"),
            ));
        }
        cap_vec[ch - 1] = value;
    }
    let powers = power_rows.into_iter().map(|r| r.0).collect();
    AllocationProblem::new(rates, powers, p_max, cap_vec).map_err(|e| match e {
        Error::Validation(msgs) => err(eof, 1, msgs.join("; ")),
        other => other,
    })
}

/// Serialise an instance in the format read by [`parse_problem`].
pub fn write_problem(problem: &AllocationProblem) -> String {
    let mut out = String::new();
    let m = problem.n_channels();
    let _ = writeln!(out, "channels {m}");
    let rows = problem.rate_matrix();
    if rows.iter().all(|r| r == &rows[0]) {
        let _ = writeln!(out, "rates {}", join(&rows[0]));
    } else {
        for r in rows {
            let _ = writeln!(out, "rate_row {}", join(r));
        }
    }
    let _ = writeln!(out, "p_max {:?}", problem.p_max());
    for (ch, cap) in problem.caps().iter().enumerate() {
        if cap.is_finite() {
            let _ = writeln!(out, "cap {} {:?}", ch + 1, cap);
        }
    }
    for row in problem.power_matrix() {
        let _ = writeln!(out, "power {}", join(row));
    }
    out
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| {
            if v.is_infinite() {
                "inf".to_string()
            } else {
                format!("{v:?}")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
