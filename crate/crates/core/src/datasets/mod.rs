//! Annotated QA samples: QuoteSum-style bracket markup and the curation
//! pipeline that turns sentence-level citations into token-level spans.
//!
//! All character offsets in this module are UTF-8 byte offsets, matching the
//! trace format.

pub mod chardiff;
mod curate;
mod quotesum;
mod sentences;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use chardiff::{char_diff_align, CharMatchSet};
pub use curate::{curate, tokens_from_char_matches, CurationOutput, DroppedRecord, RawVerifiabilityRecord};
pub use quotesum::{parse_markup, parse_quotesum, render_markup, QuoteSumRecord};
pub use sentences::{split_sentences, ABBREVIATIONS};

pub const SAMPLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: unbalanced brackets at byte {offset}")]
    UnbalancedBrackets { line: usize, offset: usize },
    #[error("line {line}: passage number {number} out of range (1..={passages})")]
    PassageOutOfRange { line: usize, number: usize, passages: usize },
    #[error("line {line}: malformed span at byte {offset}: {reason}")]
    MalformedSpan { line: usize, offset: usize, reason: String },
    #[error("token ranges do not tile the statement: {0}")]
    NotTiling(String),
    #[error("unsupported schema_version {0}")]
    UnsupportedSchema(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_schema() -> u32 {
    SAMPLE_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub answer_char_start: usize,
    pub answer_char_end: usize,
    pub passage_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_char_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_char_end: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSample {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub sample_id: String,
    pub question: String,
    pub passages: Vec<String>,
    pub answer: String,
    pub gold_spans: Vec<GoldSpan>,
}

impl AnnotatedSample {
    pub fn span_text(&self, i: usize) -> &str {
        let s = &self.gold_spans[i];
        &self.answer[s.answer_char_start..s.answer_char_end]
    }

    /// Document text: passages joined by blank lines.
    pub fn document(&self) -> String {
        self.passages.join("\n\n")
    }

    /// Checks span bounds, passage indices and non-overlap.
    pub fn validate(&self) -> Result<(), String> {
        let mut prev_end = 0;
        for (i, s) in self.gold_spans.iter().enumerate() {
            if s.answer_char_start >= s.answer_char_end || s.answer_char_end > self.answer.len() {
                return Err(format!("span {i} out of answer bounds"));
            }
            if !self.answer.is_char_boundary(s.answer_char_start) || !self.answer.is_char_boundary(s.answer_char_end) {
                return Err(format!("span {i} splits a UTF-8 character"));
            }
            if s.passage_index >= self.passages.len() {
                return Err(format!("span {i} passage_index {} out of range", s.passage_index));
            }
            if i > 0 && s.answer_char_start < prev_end {
                return Err(format!("span {i} overlaps its predecessor"));
            }
            prev_end = s.answer_char_end;
        }
        Ok(())
    }
}

/// Reads one JSON value per non-empty line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DatasetError> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Writes one compact JSON value per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSample>, DatasetError> {
    let samples: Vec<AnnotatedSample> = read_jsonl(path)?;
    if let Some(s) = samples.iter().find(|s| s.schema_version != SAMPLE_SCHEMA_VERSION) {
        return Err(DatasetError::UnsupportedSchema(s.schema_version));
    }
    Ok(samples)
}
