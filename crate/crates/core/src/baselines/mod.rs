//! Comparison systems for paragraph attribution and span identification.

mod bm25;
mod dense;
pub mod llm;

use serde::{Deserialize, Serialize};

pub use bm25::{bm25_idf, bm25_rank, bm25_scores, bm25_tokenize, Bm25Params};
pub use dense::{dense_rank, passage_key, span_key, EmbeddingFile};
pub use llm::{
    llm_attribute_span, llm_identify_spans, paraphrase_prompt, parse_paragraph_number, superimpose, task1_prompt,
    task2_prompt, ChatClient, ChatMessage, HttpChatClient, LlmBaselineConfig, LlmSpans, LlmTask, ReplayChatClient,
    DEFAULT_TOKEN_ENV,
};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("no passages to rank")]
    EmptyPassages,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("identifier {0:?} not found in embedding file")]
    MissingId(String),
    #[error("identifier {0:?} appears twice in embedding file")]
    DuplicateId(String),
    #[error("vector {id:?} has dimension {found}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("vector {0:?} has non-finite values")]
    NonFinite(String),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unparseable completion: {0}")]
    Unparseable(String),
    #[error("no integer in completion {0:?}")]
    NoInteger(String),
    #[error("paragraph {number} out of range (1..={passages})")]
    OutOfRange { number: usize, passages: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One entry of a ranking, best first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedPassage {
    pub index: usize,
    pub score: f64,
}

/// Orders by score descending, ties to the smaller index.
pub(crate) fn rank_scores(scores: &[f64]) -> Vec<RankedPassage> {
    let mut ranked: Vec<RankedPassage> = scores
        .iter()
        .enumerate()
        .map(|(index, &score)| RankedPassage { index, score })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    ranked
}
