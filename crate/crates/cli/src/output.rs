//! Error classes, input checks and output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// A bad invocation, reported with exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

pub fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(invalid(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

pub fn require_dir(path: &Path) -> anyhow::Result<()> {
    if !path.is_dir() {
        return Err(invalid(format!("input directory {} does not exist", path.display())));
    }
    Ok(())
}

/// Output directory of a dataset-scale command.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(path)?;
        Ok(Self(path.to_owned()))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

pub const SIDECAR_LOG: &str = "run.log";

/// Appends the wall-clock time and command line to the sidecar log, keeping
/// timestamps out of the result files.
pub fn log_run(path: &Path) -> anyhow::Result<()> {
    let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    let argv: Vec<String> = std::env::args().collect();
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{ms}\t{}\t{}", attrib_core::ENGINE_VERSION, argv.join(" "))?;
    Ok(())
}

/// Sidecar path for a single output file: `<file>.log`.
pub fn file_sidecar(file: &Path) -> PathBuf {
    let mut name = file.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

/// One span's predicted passage, shared by the method and the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub sample_id: String,
    pub span_index: usize,
    pub answer_char_start: usize,
    pub answer_len: usize,
    pub gold_passage: usize,
    pub predicted: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SpanPrediction {
    pub fn correct(&self) -> bool {
        self.predicted == Some(self.gold_passage)
    }
}

pub const PREDICTIONS_JSONL: &str = "predictions.jsonl";

/// Accuracy over span predictions; a missing prediction counts as wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanAccuracy {
    pub method: String,
    pub spans: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub failed: usize,
}

impl SpanAccuracy {
    pub fn of(method: &str, preds: &[SpanPrediction]) -> Self {
        let correct = preds.iter().filter(|p| p.correct()).count();
        Self {
            method: method.to_owned(),
            spans: preds.len(),
            correct,
            accuracy: (!preds.is_empty()).then(|| correct as f64 / preds.len() as f64),
            failed: preds.iter().filter(|p| p.predicted.is_none()).count(),
        }
    }
}
