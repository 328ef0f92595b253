//! Training-free token attribution for contextual question answering.
//!
//! Answer tokens copied from a source document are found by comparing
//! per-layer hidden states of a single forward pass over
//! `document + question + answer`: an answer token is *copied* when some
//! document token's hidden state has cosine similarity above a threshold.
//! Copied spans are then attributed to a document window by picking anchor
//! tokens most similar to the span's mean state and ranking the windows
//! around them.
//!
//! Modules:
//!
//! - [`trace`]: the on-disk hidden-state container and synthetic fixtures.
//! - [`simcore`]: cosine, similarity matrices, prefix-sum window means.
//! - [`detection`]: copied-token scoring, thresholding, span grouping.
//! - [`attribution`]: anchor selection and window search.
//! - [`datasets`]: QuoteSum-style markup, curation of token-level annotations.
//! - [`baselines`]: BM25, dense ranking, chat-completion baselines.
//! - [`evaluation`]: metrics, sweeps and report files.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); traces
//! store `f32`.

pub mod attribution;
pub mod baselines;
pub mod datasets;
pub mod detection;
pub mod evaluation;
pub mod prompt;
mod scalar;
pub mod simcore;
pub mod text;
pub mod trace;

pub use scalar::Scalar;

/// Version string stamped into reports and service responses.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Layer view as stored in traces.
pub type LayerView<'a> = simcore::MatrixView<'a, f32>;
pub type Matrix32 = simcore::Matrix<f32>;
pub type Matrix64 = simcore::Matrix<f64>;
pub type MatrixView32<'a> = simcore::MatrixView<'a, f32>;
pub type MatrixView64<'a> = simcore::MatrixView<'a, f64>;
