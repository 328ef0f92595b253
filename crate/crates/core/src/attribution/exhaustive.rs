//! Anchor-free reference search: every window of length `<= L`, scored with
//! directly computed means. Used as an oracle for [`Attributor::attribute`].

use super::{
    resolve_policy, AttributionError, AttributionResult, Attributor, BoundaryPolicy,
    EvidenceSegmentation, SpanRef,
};
use crate::simcore::cosine;
use crate::trace::{layer_view, Trace};
use crate::Scalar;

/// Largest document the exhaustive search accepts.
pub const EXHAUSTIVE_MAX_DOCUMENT: usize = 4096;

impl<T: Scalar> Attributor<'_, T> {
    /// Same contract and tie-breaking as [`attribute`](Self::attribute) over
    /// all windows of length `<= max_len`, no anchors. `anchors` is empty.
    pub fn exhaustive(
        &self,
        span: SpanRef,
        max_len: usize,
        segmentation: Option<&EvidenceSegmentation>,
        policy: Option<BoundaryPolicy>,
    ) -> Result<AttributionResult, AttributionError> {
        let n = self.document_len();
        if n > EXHAUSTIVE_MAX_DOCUMENT {
            return Err(AttributionError::DocumentTooLong {
                len: n,
                max: EXHAUSTIVE_MAX_DOCUMENT,
            });
        }
        if max_len == 0 {
            return Err(AttributionError::Config("max window length L must be >= 1".into()));
        }
        let respect = resolve_policy(policy, segmentation)?;
        let h_s = self.span_vector(span)?;
        let states = self.states();
        let rows = self.document_rows();
        let dim = states.cols();
        let ev_of = |pos: usize| {
            segmentation.map(|seg| {
                seg.ranges()
                    .iter()
                    .position(|r| r.start <= pos && pos < r.end)
                    .expect("segmentation covers the document")
            })
        };

        let mut best: Option<(usize, usize, f64)> = None;
        let mut evidence: Vec<Option<f64>> = vec![None; segmentation.map_or(0, |s| s.len())];
        for s in 0..n {
            for e in s + 1..=(s + max_len).min(n) {
                let (first, last) = (ev_of(s), ev_of(e - 1));
                if respect && first != last {
                    continue;
                }
                let mut mean = vec![0.0f64; dim];
                for &row in &rows[s..e] {
                    for (m, x) in mean.iter_mut().zip(states.row(row)) {
                        *m += x.widen();
                    }
                }
                let len = (e - s) as f64;
                mean.iter_mut().for_each(|m| *m /= len);
                let score = cosine(&h_s, &mean).expect("same dimension").value;

                match best {
                    Some((_, _, b)) if score <= b => {}
                    _ => best = Some((s, e, score)),
                }
                if let (Some(a), Some(b)) = (first, last) {
                    for slot in &mut evidence[a..=b] {
                        match slot {
                            Some(v) if score <= *v => {}
                            _ => *slot = Some(score),
                        }
                    }
                }
            }
        }
        let (start, end, score) = best.ok_or(AttributionError::NoCandidates)?;
        let mut predicted: Option<usize> = None;
        for (i, v) in evidence.iter().enumerate() {
            if let Some(v) = v {
                if predicted.is_none_or(|p| *v > evidence[p].unwrap_or(f64::NEG_INFINITY)) {
                    predicted = Some(i);
                }
            }
        }
        Ok(AttributionResult {
            window: self.window(start, end),
            score,
            anchors: Vec::new(),
            evidence_scores: evidence,
            predicted_evidence: predicted,
            degenerate: h_s.iter().all(|x| *x == 0.0),
        })
    }
}

pub fn exhaustive_attribute(
    trace: &Trace,
    span: SpanRef,
    layer: usize,
    max_len: usize,
    segmentation: Option<&EvidenceSegmentation>,
) -> Result<AttributionResult, AttributionError> {
    Attributor::new(trace.tokens(), layer_view(trace, layer)?)?.exhaustive(span, max_len, segmentation, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::{attribute_span, AttributionConfig};
    use crate::trace::synthetic::{random_trace, RandomTraceSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn length_one_picks_best_single_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_trace(
            &mut rng,
            RandomTraceSpec { doc_len: 12, answer_len: 3, passages: 1, hidden_dim: 6, layer_count: 1 },
        );
        let r = exhaustive_attribute(&t, SpanRef::new(0, 2), 0, 1, None).unwrap();
        assert_eq!(r.window.len(), 1);
        let h = crate::attribution::span_vector(&t, 0, SpanRef::new(0, 2)).unwrap();
        let view = layer_view(&t, 0).unwrap();
        let best = (0..12)
            .map(|i| cosine(&h, view.row(i)).unwrap().value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((r.score - best).abs() < 1e-9);
    }

    #[test]
    fn agrees_with_anchor_search_when_k_covers_document() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let spec = RandomTraceSpec {
                doc_len: rng.random_range(2..40),
                answer_len: rng.random_range(1..6),
                passages: rng.random_range(1..4),
                hidden_dim: rng.random_range(2..10),
                layer_count: 1,
            };
            let t = random_trace(&mut rng, spec);
            let seg = EvidenceSegmentation::from_tokens(t.tokens()).unwrap();
            let s = rng.random_range(0..spec.answer_len);
            let span = SpanRef::new(s, rng.random_range(s + 1..=spec.answer_len));
            let l = rng.random_range(1..12);
            let mut cfg = AttributionConfig::new(0);
            cfg.anchor_count = spec.doc_len;
            cfg.max_window_len = Some(l);
            let a = attribute_span(&t, span, &cfg, Some(&seg)).unwrap();
            let b = exhaustive_attribute(&t, span, 0, l, Some(&seg)).unwrap();
            assert_eq!(a.window, b.window);
            assert!((a.score - b.score).abs() < 1e-9);
            assert_eq!(a.predicted_evidence, b.predicted_evidence);
        }
    }

    #[test]
    fn guard_rejects_long_documents() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_trace(
            &mut rng,
            RandomTraceSpec { doc_len: EXHAUSTIVE_MAX_DOCUMENT + 1, answer_len: 1, passages: 1, hidden_dim: 1, layer_count: 1 },
        );
        assert!(matches!(
            exhaustive_attribute(&t, SpanRef::new(0, 1), 0, 2, None),
            Err(AttributionError::DocumentTooLong { .. })
        ));
    }
}
