//! Reading samples from text: one number per line, or a column of a CSV
//! file with a header row. Lines starting with `#` are comments.

use std::io::Read;

use crate::error::{Result, TailError};
use crate::sample::OrderedSample;

const MIN_LEN: usize = OrderedSample::MIN_LEN;

/// Column selector for CSV input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl Column {
    /// A bare integer selects by 0-based index; anything else by name.
    pub fn parse(spec: &str) -> Self {
        spec.parse()
            .map(Column::Index)
            .unwrap_or_else(|_| Column::Name(spec.to_string()))
    }
}

/// Reads all of `reader` and parses it with [`parse_sample`].
pub fn ingest(mut reader: impl Read, column: Option<&Column>) -> Result<(OrderedSample, Vec<u8>)> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| TailError::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let sample = parse_sample(text, column)?;
    Ok((sample, bytes))
}

fn value_at(raw: &str, line: usize) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| TailError::Parse {
        line,
        message: format!("cannot parse '{}' as a number", raw.trim()),
    })?;
    if !v.is_finite() {
        return Err(TailError::Parse {
            line,
            message: format!("value '{}' is not finite", raw.trim()),
        });
    }
    if v <= 0.0 {
        return Err(TailError::domain(format!(
            "line {line}: value {v} is not positive"
        )));
    }
    Ok(v)
}

/// Parses newline-delimited numbers, or a CSV column when `column` is given.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_sample(text: &str, column: Option<&Column>) -> Result<OrderedSample> {
    let values = match column {
        None => {
            let mut out = Vec::new();
            for (i, raw) in text.lines().enumerate() {
                let t = raw.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                out.push(value_at(raw, i + 1)?);
            }
            out
        }
        Some(col) => parse_csv_column(text, col)?,
    };
    if values.len() < MIN_LEN {
        return Err(TailError::Size {
            min: MIN_LEN,
            got: values.len(),
        });
    }
    OrderedSample::new(values)
}

fn parse_csv_column(text: &str, col: &Column) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| TailError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let idx = match col {
        Column::Index(i) => *i,
        Column::Name(name) => headers.iter().position(|h| h == name).ok_or_else(|| {
            TailError::domain(format!(
                "no column '{name}' in header [{}]",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?,
    };
    if idx >= headers.len() {
        return Err(TailError::index(format!(
            "column index {idx} out of range for {} columns",
            headers.len()
        )));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| TailError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = record.get(idx).ok_or_else(|| TailError::Parse {
            line,
            message: format!("missing column {idx}"),
        })?;
        out.push(value_at(field, line)?);
    }
    Ok(out)
}
