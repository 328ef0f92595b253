use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::datasets::AnnotatedSample;

pub const BUCKET_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPosition {
    pub answer_char_start: usize,
    pub answer_len: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub correct: usize,
    /// `None` for an empty bucket.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionBucketReport {
    pub buckets: Vec<Bucket>,
}

/// Decile of `start / len`; the last decile includes 1.0.
pub fn bucket_of(start: usize, len: usize) -> Result<usize, EvalError> {
    if len == 0 {
        return Err(EvalError::ZeroLengthAnswer);
    }
    Ok(((start.min(len) as u128 * BUCKET_COUNT as u128 / len as u128) as usize).min(BUCKET_COUNT - 1))
}

pub fn position_buckets(items: &[SpanPosition]) -> Result<PositionBucketReport, EvalError> {
    let mut count = [0usize; BUCKET_COUNT];
    let mut correct = [0usize; BUCKET_COUNT];
    for it in items {
        let b = bucket_of(it.answer_char_start, it.answer_len)?;
        count[b] += 1;
        correct[b] += usize::from(it.correct);
    }
    let buckets = (0..BUCKET_COUNT)
        .map(|i| Bucket {
            index: i,
            lower: i as f64 / BUCKET_COUNT as f64,
            upper: (i + 1) as f64 / BUCKET_COUNT as f64,
            count: count[i],
            correct: correct[i],
            accuracy: (count[i] > 0).then(|| correct[i] as f64 / count[i] as f64),
        })
        .collect();
    Ok(PositionBucketReport { buckets })
}

/// A gold span whose text occurs in several passages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisambiguationItem {
    pub sample_index: usize,
    pub sample_id: String,
    pub span_index: usize,
    /// Distinct passages containing the span text.
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisambiguationReport {
    pub subset_size: usize,
    pub accuracy: Option<f64>,
    /// Mean of `1 / occurrences`; `None` for an empty subset.
    pub random_baseline: Option<f64>,
}

/// Gold spans whose surface text (case-sensitive) appears in at least two
/// distinct passages of their sample.
pub fn disambiguation_subset(samples: &[AnnotatedSample]) -> Vec<DisambiguationItem> {
    let mut out = Vec::new();
    for (si, s) in samples.iter().enumerate() {
        for j in 0..s.gold_spans.len() {
            let text = s.span_text(j);
            let occurrences = s.passages.iter().filter(|p| p.contains(text)).count();
            if occurrences >= 2 {
                out.push(DisambiguationItem {
                    sample_index: si,
                    sample_id: s.sample_id.clone(),
                    span_index: j,
                    occurrences,
                });
            }
        }
    }
    out
}

pub fn random_baseline(items: &[DisambiguationItem]) -> Option<f64> {
    (!items.is_empty()).then(|| items.iter().map(|i| 1.0 / i.occurrences as f64).sum::<f64>() / items.len() as f64)
}

/// `correct[i]` says whether the method got `items[i]` right.
pub fn disambiguation_report(items: &[DisambiguationItem], correct: &[bool]) -> Result<DisambiguationReport, EvalError> {
    if items.len() != correct.len() {
        return Err(EvalError::LengthMismatch { left: items.len(), right: correct.len() });
    }
    Ok(DisambiguationReport {
        subset_size: items.len(),
        accuracy: (!items.is_empty())
            .then(|| correct.iter().filter(|c| **c).count() as f64 / items.len() as f64),
        random_baseline: random_baseline(items),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{GoldSpan, SAMPLE_SCHEMA_VERSION};

    fn sample(id: &str, passages: &[&str], answer: &str, span: &str) -> AnnotatedSample {
        let start = answer.find(span).unwrap();
        AnnotatedSample {
            schema_version: SAMPLE_SCHEMA_VERSION,
            sample_id: id.into(),
            question: "q".into(),
            passages: passages.iter().map(|p| p.to_string()).collect(),
            answer: answer.into(),
            gold_spans: vec![GoldSpan {
                answer_char_start: start,
                answer_char_end: start + span.len(),
                passage_index: 0,
                source_char_start: None,
                source_char_end: None,
            }],
        }
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(bucket_of(0, 17).unwrap(), 0);
        assert_eq!(bucket_of(95, 100).unwrap(), 9);
        assert_eq!(bucket_of(100, 100).unwrap(), 9);
        assert_eq!(bucket_of(10, 100).unwrap(), 1);
        assert!(matches!(bucket_of(0, 0), Err(EvalError::ZeroLengthAnswer)));
    }

    #[test]
    fn hand_built_buckets() {
        let pos = |s, c| SpanPosition { answer_char_start: s, answer_len: 100, correct: c };
        let items = [
            pos(0, true),
            pos(5, false),
            pos(12, true),
            pos(19, true),
            pos(33, false),
            pos(50, true),
            pos(51, true),
            pos(59, false),
            pos(95, true),
            pos(99, true),
        ];
        let r = position_buckets(&items).unwrap();
        let acc: Vec<Option<f64>> = r.buckets.iter().map(|b| b.accuracy).collect();
        assert_eq!(
            acc,
            vec![Some(0.5), Some(1.0), None, Some(0.0), None, Some(2.0 / 3.0), None, None, None, Some(1.0)]
        );
        assert_eq!(r.buckets[9].upper, 1.0);
        assert_eq!(r.buckets.iter().map(|b| b.count).sum::<usize>(), 10);
    }

    #[test]
    fn subset_membership_and_baseline() {
        let samples = vec![
            sample("a", &["the castle stood", "x", "near the castle"], "It was the castle.", "the castle"),
            sample("b", &["unique words", "other"], "Some unique words here.", "unique words"),
            sample("c", &["ab", "ab"], "ab", "ab"),
            sample("d", &["zz q", "zz", "zz", "zz r"], "zz", "zz"),
        ];
        let sub = disambiguation_subset(&samples);
        let occ: Vec<(usize, usize)> = sub.iter().map(|i| (i.sample_index, i.occurrences)).collect();
        assert_eq!(occ, vec![(0, 2), (2, 2), (3, 4)]);
        assert_eq!(random_baseline(&sub), Some(5.0 / 12.0));
        let r = disambiguation_report(&sub, &[true, false, true]).unwrap();
        assert_eq!(r.subset_size, 3);
        assert!((r.accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(random_baseline(&[]), None);
    }
}
