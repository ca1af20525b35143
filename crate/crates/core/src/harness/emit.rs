//! Serialization of command output. CSV floats use 17 significant digits; JSON floats
//! use the shortest representation that round-trips.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::OutputFormat;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Real(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, f) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match f {
                    Field::Int(v) => write!(s, "{v}").unwrap(),
                    Field::Real(v) => s.push_str(&format_real(*v)),
                    Field::Text(v) => s.push_str(v),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Everything a command produces.
#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    /// Extra CSV tables written next to the main file as `<stem>_<suffix>.csv`.
    pub companions: Vec<(&'static str, Table)>,
    /// Full structured result for JSON output.
    pub document: serde_json::Value,
}

impl Output {
    pub fn new<T: Serialize>(table: Table, document: &T) -> Result<Self> {
        let document = serde_json::to_value(document)
            .map_err(|e| Error::numerical("emit", format!("cannot serialize result: {e}")))?;
        Ok(Self { table, companions: Vec::new(), document })
    }

    pub fn with_companion(mut self, suffix: &'static str, table: Table) -> Self {
        self.companions.push((suffix, table));
        self
    }
}

pub fn companion_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Renders `output` in `format`: the whole text for stdout, or the files written.
pub fn render(output: &Output, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&output.document)
                .map_err(|e| Error::numerical("emit", format!("cannot serialize result: {e}")))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut s = output.table.to_csv();
            for (_, t) in &output.companions {
                s.push('\n');
                s.push_str(&t.to_csv());
            }
            Ok(s)
        }
    }
}

/// Writes `output` to `path`, or to stdout when `path` is `None`. In CSV mode each
/// companion table goes to its own file beside `path`.
pub fn emit(output: &Output, format: OutputFormat, path: Option<&Path>) -> Result<()> {
    let Some(path) = path else {
        let text = render(output, format)?;
        let mut out = std::io::stdout().lock();
        return out
            .write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|source| Error::Io { path: PathBuf::from("<stdout>"), source });
    };
    match format {
        OutputFormat::Json => write_file(path, &render(output, format)?),
        OutputFormat::Csv => {
            write_file(path, &output.table.to_csv())?;
            for (suffix, t) in &output.companions {
                write_file(&companion_path(path, suffix), &t.to_csv())?;
            }
            Ok(())
        }
    }
}
