//! Plain-text integer tables (prototype matrices, reliability sequences).
//!
//! Format: one row per line, whitespace-separated integers, `#` starts a
//! comment that runs to the end of the line. Blank lines are ignored.

use crate::{Error, Result};

/// Parses a table, requiring every row to have the same width.
pub fn parse_int_table(name: &str, text: &str) -> Result<Vec<Vec<i32>>> {
    let mut rows: Vec<Vec<i32>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: i32 = tok.parse().map_err(|_| {
                Error::format(format!("{name}: line {}: bad integer {tok:?}", lineno + 1))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::format(format!(
                    "{name}: line {}: {} entries, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(format!("{name}: table is empty")));
    }
    Ok(rows)
}

/// Parses a table and flattens it to a single sequence, row-major.
pub fn parse_int_sequence(name: &str, text: &str) -> Result<Vec<i32>> {
    Ok(parse_int_table(name, text)?.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
