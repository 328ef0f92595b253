use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{pr_curve_pooled, Counts, PrPoint};
use super::{overlap_mask, EvalError, TraceSource};
use crate::attribution::{AttributionConfig, Attributor, EvidenceSegmentation, SpanRef};
use crate::datasets::AnnotatedSample;
use crate::detection::{apply_threshold, score_tokens};
use crate::trace::{Segment, TraceManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub sample_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub layer: usize,
    pub theta: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl GridCell {
    fn new(layer: usize, theta: f64, c: Counts) -> Self {
        Self {
            layer,
            theta,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask1Sweep {
    pub evaluated: usize,
    pub skipped: Vec<SkippedSample>,
    /// Layer-major, thetas in the given order.
    pub grid: Vec<GridCell>,
    /// Highest F1; ties go to the earlier grid cell.
    pub best: GridCell,
    /// Pooled curve at the best layer.
    pub pr_curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerAccuracy {
    pub layer: usize,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
}

/// Result of one gold span at every swept layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanOutcome {
    pub sample_id: String,
    pub span_index: usize,
    pub answer_char_start: usize,
    pub answer_len: usize,
    pub gold_passage: usize,
    /// Predicted passage per swept layer, in layer order.
    pub predicted: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask2Sweep {
    pub evaluated: usize,
    pub skipped: Vec<SkippedSample>,
    pub layers: Vec<LayerAccuracy>,
    /// Highest accuracy; ties go to the earlier layer.
    pub best_layer: usize,
    pub best_accuracy: f64,
    pub spans: Vec<SpanOutcome>,
}

/// Answer-token byte ranges relative to `answer`, which must be a suffix of
/// the trace prompt.
pub fn answer_token_ranges(manifest: &TraceManifest, answer: &str) -> Result<Vec<Range<usize>>, String> {
    let prompt = manifest.prompt();
    if !prompt.ends_with(answer) {
        return Err("trace prompt does not end with the sample answer".into());
    }
    let offset = prompt.len() - answer.len();
    manifest
        .tokens_in(Segment::Answer)
        .iter()
        .map(|t| {
            if t.char_start < offset {
                Err(format!("answer token {} starts before the answer text", t.index))
            } else {
                Ok(t.char_start - offset..t.char_end - offset)
            }
        })
        .collect()
}

fn check_grid(layers: &[usize]) -> Result<(), EvalError> {
    if layers.is_empty() {
        return Err(EvalError::Config("no layers to sweep".into()));
    }
    Ok(())
}

struct Sub1 {
    counts: Vec<Counts>,
    scores: Vec<Vec<f64>>,
    gold: Vec<bool>,
}

/// Layer x theta grid of pooled token metrics. Each layer is scored once per
/// sample and all thresholds reuse the scores.
pub fn sweep_subtask1(
    samples: &[AnnotatedSample],
    traces: &dyn TraceSource,
    layers: &[usize],
    thetas: &[f64],
) -> Result<Subtask1Sweep, EvalError> {
    check_grid(layers)?;
    if thetas.is_empty() {
        return Err(EvalError::Config("no thresholds to sweep".into()));
    }
    let per_sample: Vec<Result<Sub1, SkippedSample>> = samples
        .par_iter()
        .map(|s| {
            let skip = |reason: String| SkippedSample { sample_id: s.sample_id.clone(), reason };
            let trace = traces.open(&s.sample_id).map_err(|e| skip(e.to_string()))?;
            let manifest = trace.manifest();
            let ranges = answer_token_ranges(manifest, &s.answer).map_err(skip)?;
            let gold_ranges: Vec<Range<usize>> =
                s.gold_spans.iter().map(|g| g.answer_char_start..g.answer_char_end).collect();
            let gold = overlap_mask(&ranges, &gold_ranges);
            let mut counts = Vec::with_capacity(layers.len() * thetas.len());
            let mut scores = Vec::with_capacity(layers.len());
            for &layer in layers {
                let sc = trace
                    .with_layer(layer, |view| score_tokens(&manifest.tokens, view))
                    .map_err(|e| skip(e.to_string()))?
                    .map_err(|e| skip(e.to_string()))?;
                for &theta in thetas {
                    let pred = apply_threshold(&sc, theta);
                    counts.push(super::token_counts(&pred, &gold).map_err(|e| skip(e.to_string()))?);
                }
                scores.push(sc);
            }
            Ok(Sub1 { counts, scores, gold })
        })
        .collect();

    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for r in per_sample {
        match r {
            Ok(s) => ok.push(s),
            Err(s) => skipped.push(s),
        }
    }
    if ok.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut grid = Vec::with_capacity(layers.len() * thetas.len());
    for (li, &layer) in layers.iter().enumerate() {
        for (ti, &theta) in thetas.iter().enumerate() {
            let c: Counts = ok.iter().map(|s| s.counts[li * thetas.len() + ti]).sum();
            grid.push(GridCell::new(layer, theta, c));
        }
    }
    let (best_idx, best) = grid
        .iter()
        .enumerate()
        .fold(None::<(usize, GridCell)>, |acc, (i, c)| match acc {
            Some((_, b)) if c.f1 <= b.f1 => acc,
            _ => Some((i, *c)),
        })
        .expect("grid is non-empty");
    let best_layer_idx = best_idx / thetas.len();
    let pooled: Vec<(&[f64], &[bool])> = ok
        .iter()
        .map(|s| (s.scores[best_layer_idx].as_slice(), s.gold.as_slice()))
        .collect();
    Ok(Subtask1Sweep {
        evaluated: ok.len(),
        skipped,
        grid,
        best,
        pr_curve: pr_curve_pooled(&pooled)?,
    })
}

/// Answer-token span overlapping `range` (answer-relative bytes).
pub fn token_span(ranges: &[Range<usize>], range: Range<usize>) -> Option<SpanRef> {
    let hits: Vec<usize> = ranges
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < range.end && range.start < t.end)
        .map(|(i, _)| i)
        .collect();
    Some(SpanRef::new(*hits.first()?, hits.last()? + 1))
}

/// Paragraph accuracy of span attribution at every layer. `base` supplies
/// everything but the layer.
pub fn sweep_subtask2(
    samples: &[AnnotatedSample],
    traces: &dyn TraceSource,
    layers: &[usize],
    base: &AttributionConfig,
) -> Result<Subtask2Sweep, EvalError> {
    check_grid(layers)?;
    let per_sample: Vec<Result<Vec<SpanOutcome>, SkippedSample>> = samples
        .par_iter()
        .map(|s| {
            let skip = |reason: String| SkippedSample { sample_id: s.sample_id.clone(), reason };
            let trace = traces.open(&s.sample_id).map_err(|e| skip(e.to_string()))?;
            let manifest = trace.manifest();
            let seg = EvidenceSegmentation::from_tokens(&manifest.tokens)
                .ok_or_else(|| skip("document tokens carry no passage indices".into()))?;
            let ranges = answer_token_ranges(manifest, &s.answer).map_err(skip)?;
            let mut spans = Vec::with_capacity(s.gold_spans.len());
            for (j, g) in s.gold_spans.iter().enumerate() {
                let span = token_span(&ranges, g.answer_char_start..g.answer_char_end)
                    .ok_or_else(|| skip(format!("gold span {j} aligns to no answer tokens")))?;
                spans.push(span);
            }
            let mut outcomes: Vec<SpanOutcome> = s
                .gold_spans
                .iter()
                .enumerate()
                .map(|(j, g)| SpanOutcome {
                    sample_id: s.sample_id.clone(),
                    span_index: j,
                    answer_char_start: g.answer_char_start,
                    answer_len: s.answer.len(),
                    gold_passage: g.passage_index,
                    predicted: Vec::with_capacity(layers.len()),
                })
                .collect();
            for &layer in layers {
                let mut cfg = *base;
                cfg.layer = layer;
                let preds = trace
                    .with_layer(layer, |view| -> Result<Vec<Option<usize>>, String> {
                        let att = Attributor::new(&manifest.tokens, view).map_err(|e| e.to_string())?;
                        spans
                            .iter()
                            .map(|&sp| {
                                att.attribute(sp, &cfg, Some(&seg))
                                    .map(|r| r.predicted_evidence)
                                    .map_err(|e| e.to_string())
                            })
                            .collect()
                    })
                    .map_err(|e| skip(e.to_string()))?
                    .map_err(skip)?;
                for (o, p) in outcomes.iter_mut().zip(preds) {
                    o.predicted.push(p);
                }
            }
            Ok(outcomes)
        })
        .collect();

    let mut spans = Vec::new();
    let mut skipped = Vec::new();
    let mut evaluated = 0;
    for r in per_sample {
        match r {
            Ok(o) => {
                evaluated += 1;
                spans.extend(o);
            }
            Err(s) => skipped.push(s),
        }
    }
    if spans.is_empty() {
        return Err(EvalError::Empty);
    }
    let layer_acc: Vec<LayerAccuracy> = layers
        .iter()
        .enumerate()
        .map(|(li, &layer)| {
            let correct = spans.iter().filter(|o| o.predicted[li] == Some(o.gold_passage)).count();
            LayerAccuracy { layer, accuracy: correct as f64 / spans.len() as f64, correct, total: spans.len() }
        })
        .collect();
    let best = layer_acc
        .iter()
        .fold(None::<LayerAccuracy>, |acc, c| match acc {
            Some(b) if c.accuracy <= b.accuracy => acc,
            _ => Some(*c),
        })
        .expect("layers are non-empty");
    Ok(Subtask2Sweep {
        evaluated,
        skipped,
        layers: layer_acc,
        best_layer: best.layer,
        best_accuracy: best.accuracy,
        spans,
    })
}
