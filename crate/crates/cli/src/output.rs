//! Output destinations and tabular emission.
//!
//! Rows go to `--out` when given (relative paths resolve against the
//! `SEQMC_OUT_DIR` environment variable) and to stdout otherwise. Numbers
//! are formatted with the shortest round-trip decimal representation, so
//! repeated invocations are byte-identical.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Environment variable naming the default directory for `--out` paths.
pub const OUT_DIR_ENV: &str = "SEQMC_OUT_DIR";

/// Resolves an `--out` argument against `SEQMC_OUT_DIR` for relative paths.
pub fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Buffered writer on the resolved `--out` file, or stdout.
pub fn open_sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    match out {
        Some(path) => {
            let resolved = resolve_out_path(path);
            let file = File::create(&resolved)
                .with_context(|| format!("cannot create `{}`", resolved.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Comma-separated values with a header row.
    Csv,
    /// One JSON object per line.
    Json,
}

/// One output value; numbers keep their natural JSON type in JSON mode.
pub enum Field {
    U64(u64),
    F64(f64),
    Str(String),
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::U64(v) => v.to_string(),
            Field::F64(v) => v.to_string(),
            Field::Str(v) => v.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Field::U64(v) => (*v).into(),
            Field::F64(v) => (*v).into(),
            Field::Str(v) => v.clone().into(),
        }
    }
}

/// Emits a fixed-column table as CSV or JSON lines.
pub struct Table<'a> {
    sink: Box<dyn Write>,
    format: Format,
    columns: &'a [&'a str],
    wrote_header: bool,
}

impl<'a> Table<'a> {
    pub fn new(sink: Box<dyn Write>, format: Format, columns: &'a [&'a str]) -> Self {
        Self {
            sink,
            format,
            columns,
            wrote_header: false,
        }
    }

    pub fn row(&mut self, fields: &[Field]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns.len());
        match self.format {
            Format::Csv => {
                if !self.wrote_header {
                    writeln!(self.sink, "{}", self.columns.join(","))?;
                    self.wrote_header = true;
                }
                let cells: Vec<String> = fields.iter().map(Field::csv).collect();
                writeln!(self.sink, "{}", cells.join(","))?;
            }
            Format::Json => {
                let mut obj = serde_json::Map::new();
                for (name, field) in self.columns.iter().zip(fields) {
                    obj.insert((*name).to_string(), field.json());
                }
                writeln!(self.sink, "{}", serde_json::Value::Object(obj))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.sink.flush()?;
        Ok(())
    }
}
