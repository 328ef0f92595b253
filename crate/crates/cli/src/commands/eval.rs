//! `eval ...` and `sweep`.

use std::collections::{HashMap, HashSet};

use anyhow::Result;
use attrib_core::attribution::AttributionConfig;
use attrib_core::datasets::{read_jsonl, read_samples, write_jsonl, AnnotatedSample};
use attrib_core::evaluation::{
    disambiguation_report, disambiguation_subset, position_buckets, sweep_subtask1, sweep_subtask2, write_buckets_csv,
    write_grid_csv, write_layers_csv, write_pr_csv, write_report_json, DisambiguationReport, PositionBucketReport,
    SpanPosition, Subtask1Sweep, Subtask2Sweep, TraceDirectory, BUCKETS_CSV, GRID_CSV, LAYERS_CSV, PR_CURVE_CSV,
    REPORT_JSON,
};
use serde::Serialize;

use super::single::attribution_config;
use crate::args::{AnalysisArgs, DatasetTraces, Subtask1Args, Subtask2Args, SweepArgs};
use crate::output::{
    invalid, log_run, require_dir, require_file, OutDir, SpanPrediction, PREDICTIONS_JSONL, SIDECAR_LOG,
};
use crate::parse::{parse_layers, parse_sweep, parse_thetas};

pub fn load_dataset(path: &std::path::Path) -> Result<Vec<AnnotatedSample>> {
    require_file(path)?;
    let samples = read_samples(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut seen = HashSet::new();
    for s in &samples {
        s.validate().map_err(|e| invalid(format!("sample {}: {e}", s.sample_id)))?;
        if !seen.insert(s.sample_id.as_str()) {
            return Err(invalid(format!("duplicate sample id {}", s.sample_id)));
        }
    }
    Ok(samples)
}

fn open_inputs(input: &DatasetTraces) -> Result<(Vec<AnnotatedSample>, TraceDirectory)> {
    let samples = load_dataset(&input.dataset)?;
    require_dir(&input.traces)?;
    Ok((samples, TraceDirectory::new(&input.traces)))
}

/// Predictions of the span outcomes at sweep position `at`.
fn predictions_at(sweep: &Subtask2Sweep, at: usize) -> Vec<SpanPrediction> {
    sweep
        .spans
        .iter()
        .map(|o| SpanPrediction {
            sample_id: o.sample_id.clone(),
            span_index: o.span_index,
            answer_char_start: o.answer_char_start,
            answer_len: o.answer_len,
            gold_passage: o.gold_passage,
            predicted: o.predicted[at],
            error: None,
        })
        .collect()
}

fn write_subtask1(out: &OutDir, r: &Subtask1Sweep) -> Result<()> {
    write_report_json(out.file(REPORT_JSON), "subtask1", r)?;
    write_grid_csv(out.file(GRID_CSV), &r.grid)?;
    write_pr_csv(out.file(PR_CURVE_CSV), &r.pr_curve)?;
    Ok(())
}

fn write_subtask2(out: &OutDir, r: &Subtask2Sweep, layers: &[usize]) -> Result<()> {
    write_report_json(out.file(REPORT_JSON), "subtask2", r)?;
    write_layers_csv(out.file(LAYERS_CSV), &r.layers)?;
    let at = layers.iter().position(|&l| l == r.best_layer).unwrap_or(0);
    write_jsonl(out.file(PREDICTIONS_JSONL), &predictions_at(r, at))?;
    Ok(())
}

fn warn_skipped(skipped: &[attrib_core::evaluation::SkippedSample]) {
    for s in skipped {
        log::warn!("skipped {}: {}", s.sample_id, s.reason);
    }
}

pub fn run_subtask1(a: &Subtask1Args) -> Result<()> {
    let spec = parse_sweep(&a.sweep).map_err(invalid)?;
    let layers = spec.layers.ok_or_else(|| invalid("--sweep needs layers=..."))?;
    let thetas = match spec.thetas {
        Some(t) => t,
        None => parse_thetas("0.30:0.95:0.05").map_err(invalid)?,
    };
    let (samples, traces) = open_inputs(&a.input)?;
    let r = sweep_subtask1(&samples, &traces, &layers, &thetas)?;
    warn_skipped(&r.skipped);
    let out = OutDir::create(&a.out)?;
    write_subtask1(&out, &r)?;
    println!("{}", serde_json::to_string(&r.best)?);
    log_run(&out.file(SIDECAR_LOG))
}

pub fn run_subtask2(a: &Subtask2Args) -> Result<()> {
    let spec = parse_sweep(&a.sweep).map_err(invalid)?;
    if spec.thetas.is_some() {
        return Err(invalid("subtask2 has no threshold; drop thetas= from --sweep"));
    }
    let layers = spec.layers.ok_or_else(|| invalid("--sweep needs layers=..."))?;
    let base = attribution_config(layers[0], &a.attribution)?;
    let (samples, traces) = open_inputs(&a.input)?;
    let r = sweep_subtask2(&samples, &traces, &layers, &base)?;
    warn_skipped(&r.skipped);
    let out = OutDir::create(&a.out)?;
    write_subtask2(&out, &r, &layers)?;
    println!("{}", serde_json::json!({"best_layer": r.best_layer, "best_accuracy": r.best_accuracy}));
    log_run(&out.file(SIDECAR_LOG))
}

#[derive(Serialize)]
struct SweepReport<'a> {
    subtask1: &'a Subtask1Sweep,
    subtask2: &'a Subtask2Sweep,
}

pub fn run_sweep(a: &SweepArgs) -> Result<()> {
    let layers = parse_layers(&a.layers).map_err(invalid)?;
    let thetas = parse_thetas(&a.thetas).map_err(invalid)?;
    let base = attribution_config(layers[0], &a.attribution)?;
    let (samples, traces) = open_inputs(&a.input)?;
    let s1 = sweep_subtask1(&samples, &traces, &layers, &thetas)?;
    let s2 = sweep_subtask2(&samples, &traces, &layers, &base)?;
    warn_skipped(&s1.skipped);
    warn_skipped(&s2.skipped);
    let out = OutDir::create(&a.out)?;
    write_report_json(out.file(REPORT_JSON), "sweep", &SweepReport { subtask1: &s1, subtask2: &s2 })?;
    write_grid_csv(out.file(GRID_CSV), &s1.grid)?;
    write_pr_csv(out.file(PR_CURVE_CSV), &s1.pr_curve)?;
    write_layers_csv(out.file(LAYERS_CSV), &s2.layers)?;
    println!(
        "{}",
        serde_json::json!({"subtask1_best": s1.best, "subtask2_best_layer": s2.best_layer, "subtask2_best_accuracy": s2.best_accuracy})
    );
    log_run(&out.file(SIDECAR_LOG))
}

/// Span predictions from a file or from the method at one layer.
fn analysis_predictions(a: &AnalysisArgs, samples: &[AnnotatedSample]) -> Result<(String, Vec<SpanPrediction>)> {
    if let Some(path) = &a.predictions {
        require_file(path)?;
        let preds: Vec<SpanPrediction> = read_jsonl(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let known: HashMap<&str, usize> = samples.iter().map(|s| (s.sample_id.as_str(), s.gold_spans.len())).collect();
        for p in &preds {
            match known.get(p.sample_id.as_str()) {
                Some(&n) if p.span_index < n => {}
                _ => {
                    return Err(invalid(format!(
                        "prediction for {} span {} is not in the dataset",
                        p.sample_id, p.span_index
                    )))
                }
            }
        }
        return Ok((path.display().to_string(), preds));
    }
    let traces = a.traces.as_ref().ok_or_else(|| invalid("give --predictions or --traces"))?;
    require_dir(traces)?;
    let layer = a.layer.ok_or_else(|| invalid("--traces needs --layer"))?;
    let cfg: AttributionConfig = attribution_config(layer, &a.attribution)?;
    let r = sweep_subtask2(samples, &TraceDirectory::new(traces), &[layer], &cfg)?;
    warn_skipped(&r.skipped);
    Ok((format!("method@layer{layer}"), predictions_at(&r, 0)))
}

#[derive(Serialize)]
struct PositionsOutput<'a> {
    source: &'a str,
    spans: usize,
    #[serde(flatten)]
    report: &'a PositionBucketReport,
}

pub fn run_positions(a: &AnalysisArgs) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    let (source, preds) = analysis_predictions(a, &samples)?;
    let items: Vec<SpanPosition> = preds
        .iter()
        .map(|p| SpanPosition { answer_char_start: p.answer_char_start, answer_len: p.answer_len, correct: p.correct() })
        .collect();
    let report = position_buckets(&items).map_err(|e| invalid(e.to_string()))?;
    let out = OutDir::create(&a.out)?;
    write_report_json(out.file(REPORT_JSON), "positions", &PositionsOutput { source: &source, spans: items.len(), report: &report })?;
    write_buckets_csv(out.file(BUCKETS_CSV), &report)?;
    log_run(&out.file(SIDECAR_LOG))
}

#[derive(Serialize)]
struct DisambigOutput<'a> {
    source: &'a str,
    /// Subset spans with no prediction (their sample was skipped).
    unpredicted: usize,
    #[serde(flatten)]
    report: &'a DisambiguationReport,
}

pub fn run_disambig(a: &AnalysisArgs) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    let (source, preds) = analysis_predictions(a, &samples)?;
    let by_key: HashMap<(&str, usize), &SpanPrediction> =
        preds.iter().map(|p| ((p.sample_id.as_str(), p.span_index), p)).collect();
    let subset = disambiguation_subset(&samples);
    let mut items = Vec::new();
    let mut correct = Vec::new();
    for it in &subset {
        if let Some(p) = by_key.get(&(it.sample_id.as_str(), it.span_index)) {
            items.push(it.clone());
            correct.push(p.correct());
        }
    }
    let report = disambiguation_report(&items, &correct)?;
    let out = OutDir::create(&a.out)?;
    let body = DisambigOutput { source: &source, unpredicted: subset.len() - items.len(), report: &report };
    write_report_json(out.file(REPORT_JSON), "disambig", &body)?;
    log_run(&out.file(SIDECAR_LOG))
}
