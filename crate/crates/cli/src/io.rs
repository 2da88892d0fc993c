//! Series ingestion and output helpers.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    None,
    /// Prices to percent log returns, `100 (log P_t - log P_{t-1})`.
    LogReturns100,
}

impl FromStr for Transform {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "raw" => Ok(Transform::None),
            "logret100" | "log-returns" | "logreturns100" | "log-returns-100" => {
                Ok(Transform::LogReturns100)
            }
            other => Err(CliError::Usage(format!(
                "unknown transform '{other}' (expected none or logret100)"
            ))),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::None => "none",
            Transform::LogReturns100 => "logret100",
        })
    }
}

/// A column selector: a 0-based index or a header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

impl FromStr for Column {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(CliError::Usage("empty column selector".into()));
        }
        Ok(s.parse::<usize>()
            .map(Column::Index)
            .unwrap_or_else(|_| Column::Name(s.to_string())))
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Index(i) => write!(f, "{i}"),
            Column::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub source: String,
    pub transform: Transform,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn require_len(&self, min: usize) -> Result<()> {
        if self.values.len() < min {
            return Err(CliError::Data(format!(
                "{}: {} observations, at least {min} required",
                self.source,
                self.values.len()
            )));
        }
        Ok(())
    }
}

pub fn load_series(path: &Path, column: &Column, transform: Transform) -> Result<ReturnSeries> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_series(&text, &path.display().to_string(), column, transform)
}

/// Parses CSV text. A first row whose selected cell is not numeric is taken as
/// the header; lines starting with `#` are skipped.
pub fn parse_series(
    text: &str,
    source: &str,
    column: &Column,
    transform: Transform,
) -> Result<ReturnSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut raw: Vec<(u64, f64)> = Vec::new();
    let mut index: Option<usize> = match column {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            match column {
                Column::Name(name) => {
                    let pos = record.iter().position(|h| h == name);
                    index = Some(pos.ok_or_else(|| {
                        CliError::Data(format!(
                            "{source}: no column named '{name}' in header on line {line}"
                        ))
                    })?);
                    continue;
                }
                Column::Index(i) => {
                    if let Some(cell) = record.get(*i) {
                        if !cell.is_empty() && cell.parse::<f64>().is_err() {
                            continue;
                        }
                    }
                }
            }
        }
        let idx = index.expect("column resolved");
        let cell = record.get(idx).unwrap_or("");
        if cell.is_empty() {
            return Err(CliError::Data(format!(
                "{source}: line {line}: missing value in column {column}"
            )));
        }
        let v: f64 = cell.parse().map_err(|_| {
            CliError::Data(format!(
                "{source}: line {line}: cannot parse '{cell}' as a number"
            ))
        })?;
        if !v.is_finite() {
            return Err(CliError::Data(format!(
                "{source}: line {line}: non-finite value '{cell}'"
            )));
        }
        raw.push((line, v));
    }

    let values = match transform {
        Transform::None => raw.into_iter().map(|(_, v)| v).collect(),
        Transform::LogReturns100 => {
            if let Some((line, p)) = raw.iter().find(|(_, p)| *p <= 0.0) {
                return Err(CliError::Data(format!(
                    "{source}: line {line}: non-positive price {p} under log transform"
                )));
            }
            raw.windows(2)
                .map(|w| 100.0 * (w[1].1.ln() - w[0].1.ln()))
                .collect::<Vec<_>>()
        }
    };
    if values.is_empty() {
        return Err(CliError::Data(format!(
            "{source}: no observations in column {column}"
        )));
    }
    Ok(ReturnSeries {
        values,
        source: source.to_string(),
        transform,
    })
}

/// Shortest decimal form that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes `content` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
