//! Copied-token detection.
//!
//! Each answer token is scored by its maximum cosine similarity to any
//! document token at one layer. Tokens scoring strictly above `theta` are
//! copied; maximal runs of copied tokens form spans. Question and template
//! tokens never take part on either side.

mod stoplist;

use serde::{Deserialize, Serialize};

pub use stoplist::StopList;

use crate::simcore::{similarity_matrix, Matrix, MatrixView};
use crate::trace::{layer_view, Segment, TokenRecord, Trace, TraceError};
use crate::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum DetectionError {
    #[error("trace has no document tokens")]
    NoDocumentTokens,
    #[error("trace has no answer tokens")]
    NoAnswerTokens,
    #[error("mask has {mask} entries but there are {tokens} answer tokens")]
    LengthMismatch { mask: usize, tokens: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub layer: usize,
    pub theta: f64,
}

/// A maximal run of copied answer tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedSpan {
    /// Half-open range of answer-token positions (0 = first answer token).
    pub token_start: usize,
    pub token_end: usize,
    /// Half-open prompt byte range covered by those tokens.
    pub char_start: usize,
    pub char_end: usize,
    /// Mean of the member tokens' scores; `None` when scores were not supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub layer: usize,
    pub theta: f64,
    /// Prompt indices of the answer tokens, in order.
    pub answer_tokens: Vec<usize>,
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
    pub spans: Vec<DetectedSpan>,
}

/// Row maxima of the `answer x document` cosine matrix over `states`.
pub fn score_rows<T: Scalar>(
    states: MatrixView<'_, T>,
    document_rows: &[usize],
    answer_rows: &[usize],
) -> Result<Vec<f64>, DetectionError> {
    if document_rows.is_empty() {
        return Err(DetectionError::NoDocumentTokens);
    }
    if answer_rows.is_empty() {
        return Err(DetectionError::NoAnswerTokens);
    }
    let gather = |rows: &[usize]| {
        let picked: Vec<&[T]> = rows.iter().map(|&i| states.row(i)).collect();
        Matrix::from_rows(&picked).expect("rows share the view's width")
    };
    let answer = gather(answer_rows);
    let document = gather(document_rows);
    let sims = similarity_matrix(answer.view(), document.view()).expect("same hidden_dim");
    Ok((0..sims.rows())
        .map(|i| sims.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Per-answer-token maximum similarity against all document tokens, for a
/// token list and its layer matrix.
pub fn score_tokens<T: Scalar>(tokens: &[TokenRecord], states: MatrixView<'_, T>) -> Result<Vec<f64>, DetectionError> {
    let pick = |seg| tokens.iter().filter(|t| t.segment == seg).map(|t| t.index).collect::<Vec<_>>();
    score_rows(states, &pick(Segment::Document), &pick(Segment::Answer))
}

pub fn score_answer_tokens(trace: &Trace, layer: usize) -> Result<Vec<f64>, DetectionError> {
    score_tokens(trace.tokens(), layer_view(trace, layer)?)
}

/// `mask[i] = scores[i] > theta` (strict).
pub fn apply_threshold(scores: &[f64], theta: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > theta).collect()
}

/// Groups masked answer tokens into maximal runs.
///
/// With `filter` on, runs whose text is only punctuation, stopwords and
/// whitespace are dropped.
pub fn group_spans(
    mask: &[bool],
    answer_tokens: &[&TokenRecord],
    stoplist: &StopList,
    filter: bool,
) -> Result<Vec<DetectedSpan>, DetectionError> {
    if mask.len() != answer_tokens.len() {
        return Err(DetectionError::LengthMismatch {
            mask: mask.len(),
            tokens: answer_tokens.len(),
        });
    }
    let mut spans = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        let members = &answer_tokens[start..i];
        if filter {
            let text: String = members.iter().map(|t| t.text.as_str()).collect();
            if stoplist.is_trivial(&text) {
                continue;
            }
        }
        spans.push(DetectedSpan {
            token_start: start,
            token_end: i,
            char_start: members[0].char_start,
            char_end: members[members.len() - 1].char_end,
            mean_score: None,
        });
    }
    Ok(spans)
}

/// Scoring, thresholding and grouping in one call.
pub fn detect(
    trace: &Trace,
    config: DetectionConfig,
    stoplist: &StopList,
    filter: bool,
) -> Result<ExtractionResult, DetectionError> {
    let scores = score_answer_tokens(trace, config.layer)?;
    let answer = trace.manifest.tokens_in(Segment::Answer);
    let mask = apply_threshold(&scores, config.theta);
    let mut spans = group_spans(&mask, &answer, stoplist, filter)?;
    for s in &mut spans {
        let member = &scores[s.token_start..s.token_end];
        s.mean_score = Some(member.iter().sum::<f64>() / member.len() as f64);
    }
    Ok(ExtractionResult {
        layer: config.layer,
        theta: config.theta,
        answer_tokens: answer.iter().map(|t| t.index).collect(),
        scores,
        mask,
        spans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synthetic::TraceBuilder;

    fn doc_5_6_7_answer_6_9() -> Trace {
        TraceBuilder::new("toy")
            .token(Segment::Template, "<s>", 1)
            .token(Segment::Document, " five", 5)
            .token(Segment::Document, " six", 6)
            .token(Segment::Document, " seven", 7)
            .token(Segment::Question, " nine", 9)
            .token(Segment::Answer, " six", 6)
            .token(Segment::Answer, " nine", 9)
            .build_one_hot(2)
            .unwrap()
    }

    #[test]
    fn one_hot_scores_match_brute_force() {
        // brute force: cosine of one-hot vectors is 1 iff ids equal, else 0
        let t = doc_5_6_7_answer_6_9();
        assert_eq!(score_answer_tokens(&t, 0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(score_answer_tokens(&t, 1).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn answer_identical_to_document_scores_one() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let b = TraceBuilder::new("toy")
            .token(Segment::Document, " x", 1)
            .token(Segment::Document, " y", 2)
            .token(Segment::Answer, " x", 1)
            .token(Segment::Answer, " y", 2);
        let mut t = b.build_random(2, 6, &mut rng).unwrap();
        let (_, n, d) = t.states.shape();
        for l in 0..2 {
            let data = t.states.as_mut_slice();
            for r in 0..2 {
                let (src, dst) = ((l * n + r) * d, (l * n + r + 2) * d);
                data.copy_within(src..src + d, dst);
            }
        }
        for l in 0..2 {
            for s in score_answer_tokens(&t, l).unwrap() {
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_answer_scores_zero() {
        let t = TraceBuilder::new("toy")
            .token(Segment::Document, " a", 0)
            .token(Segment::Document, " b", 1)
            .token(Segment::Answer, " c", 2)
            .build_one_hot(1)
            .unwrap();
        assert_eq!(score_answer_tokens(&t, 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn missing_segments_are_errors() {
        let t = TraceBuilder::new("toy").token(Segment::Answer, " c", 2).build_one_hot(1).unwrap();
        assert!(matches!(score_answer_tokens(&t, 0), Err(DetectionError::NoDocumentTokens)));
        let t = TraceBuilder::new("toy").token(Segment::Document, " c", 2).build_one_hot(1).unwrap();
        assert!(matches!(score_answer_tokens(&t, 0), Err(DetectionError::NoAnswerTokens)));
        assert!(matches!(score_answer_tokens(&t, 1), Err(DetectionError::Trace(_))));
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(apply_threshold(&[1.0, 0.0], 0.5), vec![true, false]);
        assert_eq!(apply_threshold(&[1.0, 1.0], 1.0), vec![false, false]);
        assert_eq!(apply_threshold(&[-1.0, -0.99, 0.3], -1.0), vec![false, true, true]);
    }

    fn answer_tokens(texts: &[&str]) -> Trace {
        let mut b = TraceBuilder::new("toy").token(Segment::Document, "d", 0);
        for (i, t) in texts.iter().enumerate() {
            b = b.token(Segment::Answer, t, i as u32 + 1);
        }
        b.build_one_hot(1).unwrap()
    }

    #[test]
    fn runs_are_grouped() {
        let t = answer_tokens(&[" a", " b", " c", " d"]);
        let toks = t.manifest.tokens_in(Segment::Answer);
        let spans = group_spans(&[true, true, false, true], &toks, &StopList::english_v1(), false).unwrap();
        let ranges: Vec<_> = spans.iter().map(|s| (s.token_start, s.token_end)).collect();
        assert_eq!(ranges, vec![(0, 2), (3, 4)]);
        assert_eq!((spans[0].char_start, spans[0].char_end), (1, 5));
        assert!(group_spans(&[false; 4], &toks, &StopList::english_v1(), true).unwrap().is_empty());
    }

    #[test]
    fn trivial_runs_filtered() {
        let t = answer_tokens(&[" the", " .", " castle", " of", " Lincoln"]);
        let toks = t.manifest.tokens_in(Segment::Answer);
        let mask = [true, true, false, true, true];
        let kept = group_spans(&mask, &toks, &StopList::english_v1(), true).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].token_start, 3);
        let all = group_spans(&mask, &toks, &StopList::english_v1(), false).unwrap();
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn detect_fills_span_means() {
        let t = doc_5_6_7_answer_6_9();
        let r = detect(&t, DetectionConfig { layer: 0, theta: 0.5 }, &StopList::english_v1(), false).unwrap();
        assert_eq!(r.mask, vec![true, false]);
        assert_eq!(r.spans.len(), 1);
        assert_eq!(r.spans[0].mean_score, Some(1.0));
        assert_eq!(r.answer_tokens, vec![5, 6]);
    }
}
