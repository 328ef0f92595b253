//! Request and response bodies. Every response carries `schema_version`,
//! `engine_version` and, once known, the trace's `model_name`.

use attrib_core::attribution::{Anchor, BoundaryPolicy};
use serde::{Deserialize, Serialize};

use crate::session::SessionStatus;

pub const API_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub engine_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
}

impl Provenance {
    pub fn new(model_name: Option<String>) -> Self {
        Self {
            schema_version: API_SCHEMA_VERSION,
            engine_version: attrib_core::ENGINE_VERSION.to_owned(),
            model_name,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub document: String,
    #[serde(default)]
    pub question: String,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(default)]
    pub generate: bool,
    #[serde(default)]
    pub template_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub session_id: String,
    pub status: SessionStatus,
    pub document: String,
    pub question: String,
    /// Answer text as reconstructed from the trace once ready.
    pub answer: Option<String>,
    pub created_unix_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectRequest {
    pub layer: usize,
    pub theta: f64,
    /// Drop spans made only of stopwords and punctuation.
    #[serde(default)]
    pub filter: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenScore {
    pub answer_char_start: usize,
    pub answer_char_end: usize,
    pub score: f64,
    pub copied: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub token_start: usize,
    pub token_end: usize,
    pub answer_char_start: usize,
    pub answer_char_end: usize,
    pub text: String,
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectResponse {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub session_id: String,
    pub layer: usize,
    pub theta: f64,
    pub tokens: Vec<TokenScore>,
    pub spans: Vec<SpanAnnotation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeRequest {
    pub answer_char_start: usize,
    pub answer_char_end: usize,
    pub layer: usize,
    #[serde(default)]
    pub anchors: Option<usize>,
    #[serde(default)]
    pub max_window: Option<usize>,
    #[serde(default)]
    pub boundary_policy: Option<BoundaryPolicy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedSpan {
    pub token_start: usize,
    pub token_end: usize,
    pub answer_char_start: usize,
    pub answer_char_end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowView {
    pub token_start: usize,
    pub token_end: usize,
    pub document_char_start: usize,
    pub document_char_end: usize,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvidenceView {
    pub index: usize,
    pub document_char_start: usize,
    pub document_char_end: usize,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeResponse {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub session_id: String,
    pub layer: usize,
    pub span: ResolvedSpan,
    pub window: WindowView,
    pub score: f64,
    pub degenerate: bool,
    pub anchors: Vec<Anchor>,
    pub evidence: Vec<EvidenceView>,
    pub predicted_evidence: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub status: String,
    pub extractor: Option<String>,
    pub sessions: usize,
}
