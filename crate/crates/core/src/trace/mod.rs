//! On-disk hidden-state traces.
//!
//! A trace directory holds `manifest.json` (token records and shape) and
//! `states.f32`: raw little-endian `f32`, layer-major, then token, then
//! hidden dimension, no header. Layer 0 is the embedding output.

mod io;
pub mod synthetic;
mod validate;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use io::{read_trace, write_trace, TraceReader};
pub use validate::{validate_trace, Violation};

use crate::simcore::MatrixView;

/// Manifest schema version understood by this build.
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: &str = "f32";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATES_FILE: &str = "states.f32";

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("missing trace file {0}")]
    MissingFile(PathBuf),
    #[error("manifest {0} is not valid UTF-8")]
    NonUtf8Manifest(PathBuf),
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("unsupported trace format_version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("states.f32 size mismatch: manifest implies {expected} bytes, file has {actual} bytes")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("trace shape overflows addressable size")]
    ShapeOverflow,
    #[error("layer {layer} out of range (trace has {layer_count} layers)")]
    LayerOutOfRange { layer: usize, layer_count: usize },
    #[error("invalid trace: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Template,
    Document,
    Question,
    Answer,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Segment::Template => "template",
            Segment::Document => "document",
            Segment::Question => "question",
            Segment::Answer => "answer",
        })
    }
}

/// One prompt token. Offsets are half-open UTF-8 byte offsets into the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub index: usize,
    pub token_id: u32,
    pub text: String,
    pub segment: Segment,
    pub char_start: usize,
    pub char_end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub format_version: u32,
    pub model_name: String,
    pub layer_count: usize,
    pub hidden_dim: usize,
    pub token_count: usize,
    pub dtype: String,
    pub tokens: Vec<TokenRecord>,
    pub prompt_template_id: String,
}

impl TraceManifest {
    /// Expected byte size of `states.f32`.
    pub fn states_byte_len(&self) -> Option<u64> {
        (self.layer_count as u64)
            .checked_mul(self.token_count as u64)?
            .checked_mul(self.hidden_dim as u64)?
            .checked_mul(4)
    }

    /// The prompt, rebuilt by concatenating token texts.
    pub fn prompt(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Prompt-level indices of the tokens in `segment`, in order.
    pub fn indices(&self, segment: Segment) -> Vec<usize> {
        self.tokens
            .iter()
            .filter(|t| t.segment == segment)
            .map(|t| t.index)
            .collect()
    }

    pub fn tokens_in(&self, segment: Segment) -> Vec<&TokenRecord> {
        self.tokens.iter().filter(|t| t.segment == segment).collect()
    }
}

/// `(layer_count, token_count, hidden_dim)` tensor in layer-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    layer_count: usize,
    token_count: usize,
    hidden_dim: usize,
    data: Vec<f32>,
}

impl HiddenStates {
    pub fn new(
        layer_count: usize,
        token_count: usize,
        hidden_dim: usize,
        data: Vec<f32>,
    ) -> Result<Self, TraceError> {
        let expected = layer_count
            .checked_mul(token_count)
            .and_then(|n| n.checked_mul(hidden_dim))
            .ok_or(TraceError::ShapeOverflow)?;
        if expected != data.len() {
            return Err(TraceError::SizeMismatch {
                expected: expected as u64 * 4,
                actual: data.len() as u64 * 4,
            });
        }
        Ok(Self {
            layer_count,
            token_count,
            hidden_dim,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.layer_count, self.token_count, self.hidden_dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn layer_slab(&self, layer: usize) -> Option<&[f32]> {
        if layer >= self.layer_count {
            return None;
        }
        let n = self.token_count * self.hidden_dim;
        Some(&self.data[layer * n..(layer + 1) * n])
    }
}

/// A manifest plus its hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub manifest: TraceManifest,
    pub states: HiddenStates,
}

impl Trace {
    pub fn layer_count(&self) -> usize {
        self.manifest.layer_count
    }

    pub fn tokens(&self) -> &[TokenRecord] {
        &self.manifest.tokens
    }

    pub fn prompt(&self) -> String {
        self.manifest.prompt()
    }
}

/// All token vectors at `layer` as a `token_count x hidden_dim` view. No copy.
pub fn layer_view(trace: &Trace, layer: usize) -> Result<MatrixView<'_, f32>, TraceError> {
    let slab = trace
        .states
        .layer_slab(layer)
        .ok_or(TraceError::LayerOutOfRange {
            layer,
            layer_count: trace.states.layer_count,
        })?;
    MatrixView::new(trace.states.token_count, trace.states.hidden_dim, slab)
        .map_err(|_| TraceError::ShapeOverflow)
}

#[cfg(test)]
mod tests {
    use super::synthetic::TraceBuilder;
    use super::*;

    #[test]
    fn layer_view_rows_follow_constructed_values() {
        let mut b = TraceBuilder::new("toy");
        for i in 0..4 {
            b = b.token(Segment::Document, &format!("t{i}"), i);
        }
        let trace = b
            .build_with(2, 5, |_, i, _, row| {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = (i + j) as f32;
                }
            })
            .unwrap();
        let v = layer_view(&trace, 0).unwrap();
        assert_eq!(v.row(1), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        for l in 0..trace.layer_count() {
            assert_eq!(layer_view(&trace, l).unwrap().rows(), 4);
        }
        assert!(matches!(
            layer_view(&trace, 2),
            Err(TraceError::LayerOutOfRange { layer: 2, layer_count: 2 })
        ));
    }

    #[test]
    fn prompt_reconstruction() {
        let trace = TraceBuilder::new("toy")
            .token(Segment::Document, "A", 0)
            .token(Segment::Answer, " b", 1)
            .build_one_hot(1)
            .unwrap();
        assert_eq!(trace.prompt(), "A b");
        assert_eq!(trace.tokens()[1].char_start, 1);
        assert_eq!(trace.tokens()[1].char_end, 3);
    }
}
