//! Result files: `trace.csv`, `buffers.csv`, `summary.json`, `timings.json`,
//! `svd.csv` and the hypernetwork checkpoint.
//!
//! Wall-clock timings live only in `timings.json`, so every other file is a
//! pure function of the configuration and seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::metrics::{svd_report, SvdReport};
use super::run::{BufferRow, RunOutcome, StepRow, Summary};
use super::HarnessError;
use crate::hypernet::save_checkpoint;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| format_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| format_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| format_err(path, e))
}

const TRACE_HEADER: [&str; 8] = [
    "t",
    "period",
    "user",
    "item",
    "reward",
    "cumulative_reward",
    "expected_reward",
    "best_expected_reward",
];

const BUFFER_HEADER: [&str; 8] = [
    "n",
    "start_step",
    "end_step",
    "epochs",
    "best_epoch",
    "train_loss",
    "validation_loss",
    "initial_validation_loss",
];

pub fn write_trace(path: &Path, rows: &[StepRow]) -> Result<(), HarnessError> {
    write_rows(path, rows, &TRACE_HEADER)
}

pub fn read_trace(path: &Path) -> Result<Vec<StepRow>, HarnessError> {
    read_rows(path)
}

pub fn write_buffers(path: &Path, rows: &[BufferRow]) -> Result<(), HarnessError> {
    write_rows(path, rows, &BUFFER_HEADER)
}

pub fn read_buffers(path: &Path) -> Result<Vec<BufferRow>, HarnessError> {
    read_rows(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<Summary, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

/// `period,s0,...` with one row of descending singular values per period.
pub fn write_svd(path: &Path, report: &SvdReport) -> Result<(), HarnessError> {
    let width = report.rows.iter().map(Vec::len).max().unwrap_or(0);
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut header = vec!["period".to_string()];
    header.extend((0..width).map(|k| format!("s{k}")));
    writeln!(w, "{}", header.join(",")).map_err(io_err(path))?;
    for (p, row) in report.rows.iter().enumerate() {
        let cells: Vec<String> = std::iter::once(p.to_string())
            .chain(row.iter().map(|v| v.to_string()))
            .collect();
        writeln!(w, "{}", cells.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Paths of the files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub trace: PathBuf,
    pub buffers: PathBuf,
    pub summary: PathBuf,
    pub timings: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub svd: Option<PathBuf>,
}

pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> Result<OutputFiles, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = OutputFiles {
        trace: dir.join("trace.csv"),
        buffers: dir.join("buffers.csv"),
        summary: dir.join("summary.json"),
        timings: dir.join("timings.json"),
        checkpoint: outcome.hypernet.as_ref().map(|_| dir.join("hypernet.ckpt")),
        svd: outcome.hypernet.as_ref().map(|_| dir.join("svd.csv")),
    };
    write_trace(&files.trace, &outcome.trace.steps)?;
    write_buffers(&files.buffers, &outcome.trace.buffers)?;
    write_json(&files.summary, &outcome.summary)?;
    write_json(&files.timings, &outcome.timings)?;
    if let (Some(net), Some(ckpt), Some(svd)) = (&outcome.hypernet, &files.checkpoint, &files.svd) {
        save_checkpoint(ckpt, net).map_err(|e| match e {
            crate::hypernet::HypernetError::Io(source) => HarnessError::Io {
                path: ckpt.clone(),
                source,
            },
            other => other.into(),
        })?;
        write_svd(svd, &svd_report(net))?;
    }
    Ok(files)
}
