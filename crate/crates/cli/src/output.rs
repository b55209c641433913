//! CSV and JSON artifact writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use trilattice::observables::{csv_header, ObservableRecord};

use crate::CliError;

pub use trilattice::observables::SCALAR_COLUMNS as SAMPLE_COLUMNS;
pub use trilattice::observables::full_precision as num;

/// `#`-prefixed provenance lines shared by every table.
pub fn preamble(params: &BTreeMap<String, String>, extra: &[(&str, String)]) -> String {
    let mut s = format!("# trilattice {}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in extra {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    for (k, v) in params {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s
}

/// Single-owner writer for one samples file.
pub struct SampleWriter {
    out: BufWriter<File>,
    pub columns: Vec<[f64; 5]>,
}

impl SampleWriter {
    pub fn create(path: &Path, preamble: &str) -> Result<Self, CliError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(preamble.as_bytes())?;
        out.write_all(csv_header().as_bytes())?;
        Ok(Self { out, columns: Vec::new() })
    }

    /// Reopen a samples file for a resumed run: keep the preamble and the rows up to
    /// `last_step`, drop anything later.
    pub fn resume(path: &Path, preamble: &str, last_step: u64) -> Result<Self, CliError> {
        if !path.exists() {
            return Self::create(path, preamble);
        }
        let mut kept = String::new();
        let mut columns = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            let first = line.split(',').next().unwrap_or("");
            match first.parse::<u64>() {
                Ok(step) => {
                    if step > last_step {
                        break;
                    }
                    columns.push(parse_row(&line).ok_or_else(|| {
                        CliError::Runtime(format!("{}: malformed row `{line}`", path.display()))
                    })?);
                }
                Err(_) => {}
            }
            kept.push_str(&line);
            kept.push('\n');
        }
        if !kept.starts_with(preamble) {
            return Err(CliError::Validation(format!(
                "{}: existing samples were written with different parameters",
                path.display()
            )));
        }
        std::fs::write(path, &kept)?;
        let out = BufWriter::new(std::fs::OpenOptions::new().append(true).open(path)?);
        Ok(Self { out, columns })
    }

    pub fn push(&mut self, r: &ObservableRecord) -> Result<(), CliError> {
        self.out.write_all(r.csv_row().as_bytes())?;
        self.columns.push(r.scalars().map(|(_, v)| v));
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<[f64; 5]>, CliError> {
        self.out.flush()?;
        Ok(self.columns)
    }
}

fn parse_row(line: &str) -> Option<[f64; 5]> {
    let vals: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().ok()).collect::<Option<_>>()?;
    vals.try_into().ok()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct WallClock {
    pub started_unix: f64,
    pub elapsed_seconds: f64,
}

pub struct Stopwatch(SystemTime);

impl Stopwatch {
    pub fn start() -> Self {
        Self(SystemTime::now())
    }

    pub fn read(&self) -> WallClock {
        WallClock {
            started_unix: self.0.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            elapsed_seconds: self.0.elapsed().map(|d| d.as_secs_f64()).unwrap_or(0.0),
        }
    }
}
