//! Span-to-document attribution.
//!
//! A span's mean hidden state `h_S` selects the `K` most similar document
//! tokens as anchors. Every contiguous document window of length at most `L`
//! that contains an anchor is scored by `cosine(h_S, mean(window))` and the
//! best one is the attribution. When the document is split into evidence
//! spans, each evidence span is scored by its best window.
//!
//! Ties are broken by earliest start, then shortest window; anchors by
//! smaller position. Comparisons are exact, which makes the order total.

mod exhaustive;
mod segmentation;

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exhaustive::{exhaustive_attribute, EXHAUSTIVE_MAX_DOCUMENT};
pub use segmentation::EvidenceSegmentation;

use crate::simcore::{cosine_from_parts, dot, mean_of_rows, norm, MatrixView, PrefixSums};
use crate::trace::{layer_view, Segment, TokenRecord, Trace, TraceError};
use crate::Scalar;

pub const DEFAULT_ANCHOR_COUNT: usize = 5;
/// Default `L` is the span length plus this slack.
pub const DEFAULT_WINDOW_SLACK: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum AttributionError {
    #[error("trace has no document tokens")]
    NoDocumentTokens,
    #[error("span [{start}, {end}) is invalid for {answer_len} answer tokens")]
    InvalidSpan { start: usize, end: usize, answer_len: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed evidence segmentation: {0}")]
    Segmentation(String),
    #[error("boundary policy respect_evidence requires an evidence segmentation")]
    MissingSegmentation,
    #[error("no candidate window (anchors fall outside every evidence range)")]
    NoCandidates,
    #[error("document of {len} tokens exceeds the exhaustive-search guard of {max}")]
    DocumentTooLong { len: usize, max: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Half-open range of answer-token positions (0 = first answer token).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRef {
    pub start: usize,
    pub end: usize,
}

impl SpanRef {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    RespectEvidence,
    IgnoreEvidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub layer: usize,
    /// `K`, the number of anchor tokens.
    pub anchor_count: usize,
    /// `L`; `None` means span length + [`DEFAULT_WINDOW_SLACK`].
    pub max_window_len: Option<usize>,
    /// `None` means respect evidence boundaries whenever a segmentation is given.
    pub boundary_policy: Option<BoundaryPolicy>,
}

impl AttributionConfig {
    pub fn new(layer: usize) -> Self {
        Self {
            layer,
            anchor_count: DEFAULT_ANCHOR_COUNT,
            max_window_len: None,
            boundary_policy: None,
        }
    }

    pub fn window_len_for(&self, span: SpanRef) -> usize {
        self.max_window_len.unwrap_or(span.len() + DEFAULT_WINDOW_SLACK)
    }
}

/// Resolves the effective policy; errors when evidence must be respected but
/// no segmentation is available.
pub(crate) fn resolve_policy(
    policy: Option<BoundaryPolicy>,
    segmentation: Option<&EvidenceSegmentation>,
) -> Result<bool, AttributionError> {
    match (policy, segmentation) {
        (Some(BoundaryPolicy::RespectEvidence), None) => Err(AttributionError::MissingSegmentation),
        (Some(BoundaryPolicy::RespectEvidence), Some(_)) | (None, Some(_)) => Ok(true),
        (Some(BoundaryPolicy::IgnoreEvidence), _) | (None, None) => Ok(false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    /// Document-local position.
    pub position: usize,
    /// Prompt token index.
    pub token_index: usize,
    pub similarity: f64,
}

/// A document window `[start, end)` in document-local positions, with the
/// prompt token and byte ranges it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub char_start: usize,
    pub char_end: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub window: Window,
    pub score: f64,
    /// Anchors `D_T`, best first. Empty for exhaustive search.
    pub anchors: Vec<Anchor>,
    /// Best-window score per evidence span; `None` where no candidate fell
    /// inside it. Empty without a segmentation.
    pub evidence_scores: Vec<Option<f64>>,
    pub predicted_evidence: Option<usize>,
    /// `h_S` had zero norm; every score is 0.
    pub degenerate: bool,
}

/// One candidate window and its score.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Running best window and per-evidence best scores over candidates fed in
/// (start, end) ascending order.
pub(crate) struct Ranking {
    best: Option<Candidate>,
    evidence: Vec<Option<f64>>,
}

impl Ranking {
    pub fn new(evidence_count: usize) -> Self {
        Self {
            best: None,
            evidence: vec![None; evidence_count],
        }
    }

    pub fn offer(&mut self, c: Candidate, evidence: Range<usize>) {
        if self.best.is_none_or(|b| c.score > b.score) {
            self.best = Some(c);
        }
        for e in evidence {
            let slot = &mut self.evidence[e];
            if slot.is_none_or(|s| c.score > s) {
                *slot = Some(c.score);
            }
        }
    }

    pub fn finish(self) -> Option<(Candidate, Vec<Option<f64>>, Option<usize>)> {
        let best = self.best?;
        let mut predicted: Option<(usize, f64)> = None;
        for (i, s) in self.evidence.iter().enumerate() {
            if let Some(s) = *s {
                if predicted.is_none_or(|(_, p)| s > p) {
                    predicted = Some((i, s));
                }
            }
        }
        Some((best, self.evidence, predicted.map(|(i, _)| i)))
    }
}

/// Evidence spans a window is credited to: the one holding it when boundaries
/// are respected, every overlapped one otherwise.
pub(crate) fn credited_evidence(
    segmentation: Option<&EvidenceSegmentation>,
    start: usize,
    end: usize,
) -> Range<usize> {
    match segmentation {
        None => 0..0,
        Some(seg) => {
            let first = seg.evidence_of(start).unwrap_or(0);
            let last = seg.evidence_of(end - 1).unwrap_or(first);
            first..last + 1
        }
    }
}

/// Exclusive upper bound for window ends starting at each position.
pub(crate) fn boundary_limits(
    n: usize,
    segmentation: Option<&EvidenceSegmentation>,
    respect: bool,
) -> Vec<usize> {
    match (segmentation, respect) {
        (Some(seg), true) => {
            let mut limits = vec![n; n];
            for r in seg.ranges() {
                limits[r.clone()].iter_mut().for_each(|l| *l = r.end);
            }
            limits
        }
        _ => vec![n; n],
    }
}

/// Attribution over one layer matrix. Reuses the document prefix sums across
/// spans, so build one per (trace, layer) and query it repeatedly.
pub struct Attributor<'a, T> {
    states: MatrixView<'a, T>,
    tokens: &'a [TokenRecord],
    document: Vec<usize>,
    answer: Vec<usize>,
    prefix: PrefixSums,
}

impl<'a, T: Scalar> Attributor<'a, T> {
    pub fn new(tokens: &'a [TokenRecord], states: MatrixView<'a, T>) -> Result<Self, AttributionError> {
        let pick = |seg| tokens.iter().filter(|t| t.segment == seg).map(|t| t.index).collect::<Vec<_>>();
        let document = pick(Segment::Document);
        if document.is_empty() {
            return Err(AttributionError::NoDocumentTokens);
        }
        let prefix = PrefixSums::over_rows(states, document.iter().copied());
        Ok(Self {
            states,
            tokens,
            answer: pick(Segment::Answer),
            document,
            prefix,
        })
    }

    pub fn document_len(&self) -> usize {
        self.document.len()
    }

    pub fn answer_len(&self) -> usize {
        self.answer.len()
    }

    pub(crate) fn states(&self) -> MatrixView<'a, T> {
        self.states
    }

    pub(crate) fn document_rows(&self) -> &[usize] {
        &self.document
    }

    pub(crate) fn check_span(&self, span: SpanRef) -> Result<(), AttributionError> {
        if span.is_empty() || span.end > self.answer.len() {
            return Err(AttributionError::InvalidSpan {
                start: span.start,
                end: span.end,
                answer_len: self.answer.len(),
            });
        }
        Ok(())
    }

    /// `h_S`: mean of the span's answer-token vectors.
    pub fn span_vector(&self, span: SpanRef) -> Result<Vec<f64>, AttributionError> {
        self.check_span(span)?;
        Ok(mean_of_rows(self.states, self.answer[span.start..span.end].iter().copied()))
    }

    /// The `k` document positions most similar to `h_s`; ties by smaller position.
    pub fn select_anchors(&self, h_s: &[f64], k: usize) -> Result<Vec<Anchor>, AttributionError> {
        if k == 0 {
            return Err(AttributionError::Config("anchor count K must be >= 1".into()));
        }
        let hn = norm(h_s);
        let mut scored: Vec<Anchor> = self
            .document
            .iter()
            .enumerate()
            .map(|(position, &row)| {
                let r = self.states.row(row);
                Anchor {
                    position,
                    token_index: row,
                    similarity: cosine_from_parts(dot(h_s, r), hn, norm(r)).value,
                }
            })
            .collect();
        scored.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then(a.position.cmp(&b.position))
        });
        scored.truncate(k);
        Ok(scored)
    }

    /// Window search around the anchors.
    pub fn attribute(
        &self,
        span: SpanRef,
        config: &AttributionConfig,
        segmentation: Option<&EvidenceSegmentation>,
    ) -> Result<AttributionResult, AttributionError> {
        let h_s = self.span_vector(span)?;
        let max_len = config.window_len_for(span);
        if max_len == 0 {
            return Err(AttributionError::Config("max window length L must be >= 1".into()));
        }
        let respect = resolve_policy(config.boundary_policy, segmentation)?;
        if let Some(seg) = segmentation {
            if seg.ranges().last().map(|r| r.end) != Some(self.document.len()) {
                return Err(AttributionError::Segmentation(format!(
                    "segmentation does not cover the {} document tokens",
                    self.document.len()
                )));
            }
        }
        let anchors = self.select_anchors(&h_s, config.anchor_count)?;

        let n = self.document.len();
        let mut next_anchor = vec![n; n + 1];
        let mut is_anchor = vec![false; n];
        anchors.iter().for_each(|a| is_anchor[a.position] = true);
        for s in (0..n).rev() {
            next_anchor[s] = if is_anchor[s] { s } else { next_anchor[s + 1] };
        }
        let limits = boundary_limits(n, segmentation, respect);
        let hn = norm(&h_s);
        let dim = self.prefix.dim();

        let per_start: Vec<Vec<Candidate>> = (0..n)
            .into_par_iter()
            .map(|s| {
                let a = next_anchor[s];
                if a >= n {
                    return Vec::new();
                }
                let max_end = (s + max_len).min(limits[s]);
                let mut mean = vec![0.0; dim];
                ((a + 1)..=max_end)
                    .map(|e| {
                        self.prefix
                            .window_mean_into(s, e, &mut mean)
                            .expect("window within document");
                        let score = cosine_from_parts(dot(&h_s, &mean), hn, norm(&mean)).value;
                        Candidate { start: s, end: e, score }
                    })
                    .collect()
            })
            .collect();

        let mut ranking = Ranking::new(segmentation.map_or(0, EvidenceSegmentation::len));
        for c in per_start.into_iter().flatten() {
            ranking.offer(c, credited_evidence(segmentation, c.start, c.end));
        }
        let (best, evidence_scores, predicted_evidence) =
            ranking.finish().ok_or(AttributionError::NoCandidates)?;
        Ok(AttributionResult {
            window: self.window(best.start, best.end),
            score: best.score,
            anchors,
            evidence_scores,
            predicted_evidence,
            degenerate: hn == 0.0,
        })
    }

    pub(crate) fn window(&self, start: usize, end: usize) -> Window {
        let first = &self.tokens[self.document[start]];
        let last = &self.tokens[self.document[end - 1]];
        Window {
            start,
            end,
            token_start: first.index,
            token_end: last.index + 1,
            char_start: first.char_start,
            char_end: last.char_end,
        }
    }
}

fn attributor(trace: &Trace, layer: usize) -> Result<Attributor<'_, f32>, AttributionError> {
    Attributor::new(trace.tokens(), layer_view(trace, layer)?)
}

pub fn span_vector(trace: &Trace, layer: usize, span: SpanRef) -> Result<Vec<f64>, AttributionError> {
    attributor(trace, layer)?.span_vector(span)
}

pub fn select_anchors(h_s: &[f64], trace: &Trace, layer: usize, k: usize) -> Result<Vec<Anchor>, AttributionError> {
    attributor(trace, layer)?.select_anchors(h_s, k)
}

pub fn attribute_span(
    trace: &Trace,
    span: SpanRef,
    config: &AttributionConfig,
    segmentation: Option<&EvidenceSegmentation>,
) -> Result<AttributionResult, AttributionError> {
    attributor(trace, config.layer)?.attribute(span, config, segmentation)
}
