use std::ops::{Add, AddAssign, Range};

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Token-level confusion counts. Corpus metrics sum these across samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    /// Empty prediction gives 1 when gold is empty too, else 0.
    pub fn precision(&self) -> f64 {
        match self.tp + self.fp {
            0 if self.fn_ == 0 => 1.0,
            0 => 0.0,
            d => self.tp as f64 / d as f64,
        }
    }

    /// Empty gold gives 1 when the prediction is empty too, else 0.
    pub fn recall(&self) -> f64 {
        match self.tp + self.fn_ {
            0 if self.fp == 0 => 1.0,
            0 => 0.0,
            d => self.tp as f64 / d as f64,
        }
    }

    pub fn f1(&self) -> f64 {
        f1_of(self.precision(), self.recall())
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

pub fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub theta: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub sample_id: String,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pr_curve: Option<Vec<PrPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_sample: Vec<SampleMetrics>,
}

impl MetricsReport {
    pub fn from_counts(counts: Counts) -> Self {
        Self {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            counts,
            pr_curve: None,
            accuracy: None,
            per_sample: Vec::new(),
        }
    }
}

pub fn token_counts(pred: &[bool], gold: &[bool]) -> Result<Counts, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch { left: pred.len(), right: gold.len() });
    }
    let mut c = Counts::default();
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

pub fn token_prf(pred: &[bool], gold: &[bool]) -> Result<MetricsReport, EvalError> {
    Ok(MetricsReport::from_counts(token_counts(pred, gold)?))
}

/// Precision and recall of `{i : score_i > theta}` for theta = -1 and every
/// distinct score, ascending. Thresholds that predict nothing are omitted.
/// Scores and labels are pooled over all `samples`.
pub fn pr_curve_pooled(samples: &[(&[f64], &[bool])]) -> Result<Vec<PrPoint>, EvalError> {
    let mut all: Vec<(f64, bool)> = Vec::new();
    for (s, g) in samples {
        if s.len() != g.len() {
            return Err(EvalError::LengthMismatch { left: s.len(), right: g.len() });
        }
        all.extend(s.iter().copied().zip(g.iter().copied()));
    }
    // descending by score
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let gold_total = all.iter().filter(|x| x.1).count();
    let mut thresholds: Vec<f64> = all.iter().map(|x| x.0).collect();
    thresholds.push(-1.0);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut points = Vec::with_capacity(thresholds.len());
    // walk thresholds from high to low, growing the predicted prefix
    let mut k = 0;
    let mut tp = 0;
    for &theta in thresholds.iter().rev() {
        while k < all.len() && all[k].0 > theta {
            tp += usize::from(all[k].1);
            k += 1;
        }
        if k == 0 {
            continue;
        }
        let c = Counts { tp, fp: k - tp, fn_: gold_total - tp };
        points.push(PrPoint { theta, precision: c.precision(), recall: c.recall() });
    }
    points.reverse();
    Ok(points)
}

pub fn pr_curve(scores: &[f64], gold: &[bool]) -> Result<Vec<PrPoint>, EvalError> {
    pr_curve_pooled(&[(scores, gold)])
}

/// Fraction of exact matches.
pub fn paragraph_accuracy(predictions: &[usize], golds: &[usize]) -> Result<f64, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch { left: predictions.len(), right: golds.len() });
    }
    if golds.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = predictions.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / golds.len() as f64)
}

/// Marks every token whose byte range overlaps any of `spans`.
pub fn overlap_mask(tokens: &[Range<usize>], spans: &[Range<usize>]) -> Vec<bool> {
    tokens
        .iter()
        .map(|t| spans.iter().any(|s| t.start < s.end && s.start < t.end))
        .collect()
}
