//! Long-format CSV traces.
//!
//! ```text
//! # config=<resolved config JSON>
//! experiment,algorithm,seed,iteration,metric,value
//! desk-ci,ql-eps-greedy,0,1,e_n,7.9150118540286254e0
//! ```
//!
//! Values are written with 17 significant digits so they parse back to the
//! same `f64`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

pub const HEADER: &str = "experiment,algorithm,seed,iteration,metric,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub experiment: String,
    pub algorithm: String,
    pub seed: u64,
    /// Step `n` for single-MDP runs, phase `k` for index learning.
    pub iteration: u64,
    pub metric: String,
    pub value: f64,
}

/// Lossless decimal form of `value`.
pub fn format_value(value: f64) -> String {
    format!("{value:.16e}")
}

/// Serialized sink for one CSV file.
pub struct TraceWriter<W: Write> {
    out: W,
    experiment: String,
}

impl TraceWriter<BufWriter<File>> {
    pub fn create(path: &Path, experiment: &str, config_json: &str) -> Result<Self, ExperimentError> {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        Self::new(BufWriter::new(file), experiment, config_json).map_err(|e| io_error(path, e))
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, experiment: &str, config_json: &str) -> io::Result<Self> {
        writeln!(out, "# config={config_json}")?;
        writeln!(out, "{HEADER}")?;
        Ok(Self {
            out,
            experiment: experiment.to_string(),
        })
    }

    pub fn row(&mut self, algorithm: &str, seed: u64, iteration: u64, metric: &str, value: f64) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{algorithm},{seed},{iteration},{metric},{}",
            self.experiment,
            format_value(value)
        )
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Parses a trace written by [`TraceWriter`], skipping comment lines.
pub fn read_trace(text: &str) -> Result<Vec<TraceRecord>, ExperimentError> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    match lines.next() {
        Some(HEADER) => {}
        other => {
            return Err(ExperimentError::Parse(format!(
                "expected header `{HEADER}`, found {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || ExperimentError::Parse(format!("malformed trace row {}: `{line}`", i + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(bad());
            }
            Ok(TraceRecord {
                experiment: fields[0].to_string(),
                algorithm: fields[1].to_string(),
                seed: fields[2].parse().map_err(|_| bad())?,
                iteration: fields[3].parse().map_err(|_| bad())?,
                metric: fields[4].to_string(),
                value: fields[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// The `# config=` line of a trace, if present.
pub fn embedded_config(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix("# config=")
}

pub(crate) fn io_error(path: &Path, e: io::Error) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}
