//! `baseline bm25|dense|llm-spans|llm-attr`.

use anyhow::Result;
use attrib_core::baselines::{
    bm25_rank, dense_rank, llm_attribute_span, llm_identify_spans, passage_key, span_key, BaselineError, Bm25Params,
    ChatClient, EmbeddingFile, HttpChatClient, LlmBaselineConfig, LlmTask, RankedPassage, ReplayChatClient,
};
use attrib_core::datasets::{write_jsonl, AnnotatedSample, GoldSpan};
use attrib_core::evaluation::{overlap_mask, token_counts, write_report_json, Counts, SkippedSample, REPORT_JSON};
use attrib_core::text::pretokenize;
use rayon::prelude::*;
use serde::Serialize;

use super::eval::load_dataset;
use crate::args::{Bm25Args, DenseArgs, LlmArgs};
use crate::output::{
    invalid, log_run, require_file, OutDir, SpanAccuracy, SpanPrediction, PREDICTIONS_JSONL, SIDECAR_LOG,
};

/// Errors that abort the run instead of being recorded per span.
fn is_fatal(e: &BaselineError) -> bool {
    matches!(e, BaselineError::Transport(_) | BaselineError::Http { .. } | BaselineError::Io(_))
}

fn predict_spans<F>(samples: &[AnnotatedSample], predict: F) -> Result<Vec<SpanPrediction>, BaselineError>
where
    F: Fn(&AnnotatedSample, usize) -> Result<usize, BaselineError> + Sync,
{
    let per_sample: Vec<Result<Vec<SpanPrediction>, BaselineError>> = samples
        .par_iter()
        .map(|s| {
            s.gold_spans
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    let (predicted, error) = match predict(s, j) {
                        Ok(p) => (Some(p), None),
                        Err(e) if is_fatal(&e) => return Err(e),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    Ok(SpanPrediction {
                        sample_id: s.sample_id.clone(),
                        span_index: j,
                        answer_char_start: g.answer_char_start,
                        answer_len: s.answer.len(),
                        gold_passage: g.passage_index,
                        predicted,
                        error,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_sample {
        out.extend(r?);
    }
    Ok(out)
}

fn top(ranked: Vec<RankedPassage>) -> Result<usize, BaselineError> {
    ranked.first().map(|r| r.index).ok_or(BaselineError::EmptyPassages)
}

fn write_span_outputs(out: &OutDir, kind: &str, preds: &[SpanPrediction]) -> Result<()> {
    let acc = SpanAccuracy::of(kind, preds);
    write_report_json(out.file(REPORT_JSON), kind, &acc)?;
    write_jsonl(out.file(PREDICTIONS_JSONL), preds)?;
    println!("{}", serde_json::to_string(&acc)?);
    log_run(&out.file(SIDECAR_LOG))
}

pub fn run_bm25(a: &Bm25Args) -> Result<()> {
    let params = Bm25Params { k1: a.k1, b: a.b };
    params.validate().map_err(|e| invalid(e.to_string()))?;
    let samples = load_dataset(&a.dataset)?;
    let preds = predict_spans(&samples, |s, j| top(bm25_rank(s.span_text(j), &s.passages, params)?))?;
    let out = OutDir::create(&a.out)?;
    write_span_outputs(&out, "bm25", &preds)
}

pub fn run_dense(a: &DenseArgs) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    require_file(&a.embeddings)?;
    let emb = EmbeddingFile::read(&a.embeddings).map_err(|e| invalid(format!("{}: {e}", a.embeddings.display())))?;
    let preds = predict_spans(&samples, |s, j| {
        let ids: Vec<String> = (0..s.passages.len()).map(|i| passage_key(&s.sample_id, i)).collect();
        top(dense_rank(&span_key(&s.sample_id, j), &ids, &emb)?)
    })?;
    if let Some(p) = preds.iter().find(|p| p.predicted.is_none()) {
        return Err(invalid(format!("{}: {}", a.embeddings.display(), p.error.as_deref().unwrap_or("missing vector"))));
    }
    let out = OutDir::create(&a.out)?;
    write_span_outputs(&out, "dense", &preds)
}

fn chat_client(a: &LlmArgs, task: LlmTask) -> Result<Box<dyn ChatClient>> {
    if let Some(path) = &a.replay {
        require_file(path)?;
        return Ok(Box::new(ReplayChatClient::from_transcript(path)?));
    }
    let endpoint = a.endpoint.as_deref().ok_or_else(|| invalid("--endpoint or --replay is required"))?;
    let mut cfg = LlmBaselineConfig::new(endpoint, &a.model, task);
    cfg.timeout_secs = a.timeout;
    cfg.retries = a.retries;
    cfg.max_in_flight = a.max_in_flight;
    cfg.token_env = a.token_env.clone();
    cfg.transcript = a.transcript.clone();
    cfg.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(Box::new(HttpChatClient::new(cfg)?))
}

pub fn run_llm_attr(a: &LlmArgs) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    let client = chat_client(a, LlmTask::Task2)?;
    let client: &dyn ChatClient = client.as_ref();
    let preds = predict_spans(&samples, |s, j| {
        let g = &s.gold_spans[j];
        llm_attribute_span(client, &s.passages, &s.question, &s.answer, g.answer_char_start..g.answer_char_end)
    })?;
    let out = OutDir::create(&a.out)?;
    write_span_outputs(&out, "llm-attr", &preds)
}

#[derive(Serialize)]
struct SpanMarking<'a> {
    sample_id: &'a str,
    completion: String,
    spans: Vec<GoldSpan>,
}

#[derive(Serialize)]
struct LlmSpansReport {
    evaluated: usize,
    skipped: Vec<SkippedSample>,
    precision: f64,
    recall: f64,
    f1: f64,
    #[serde(flatten)]
    counts: Counts,
}

fn answer_mask(answer: &str, spans: &[GoldSpan]) -> Vec<bool> {
    let ranges: Vec<_> = spans.iter().map(|g| g.answer_char_start..g.answer_char_end).collect();
    overlap_mask(&pretokenize(answer), &ranges)
}

/// Token-level metrics over pretokenized answers; a completion that cannot be
/// parsed skips its sample.
pub fn run_llm_spans(a: &LlmArgs) -> Result<()> {
    let samples = load_dataset(&a.dataset)?;
    let client = chat_client(a, LlmTask::Task1)?;
    let client: &dyn ChatClient = client.as_ref();
    let results: Vec<Result<SpanMarking, BaselineError>> = samples
        .par_iter()
        .map(|s| {
            llm_identify_spans(client, &s.passages, &s.question, &s.answer).map(|r| SpanMarking {
                sample_id: &s.sample_id,
                completion: r.completion,
                spans: r.spans,
            })
        })
        .collect();
    let mut counts = Counts::default();
    let mut skipped = Vec::new();
    let mut markings = Vec::new();
    for (s, r) in samples.iter().zip(results) {
        match r {
            Ok(m) => {
                counts += token_counts(&answer_mask(&s.answer, &m.spans), &answer_mask(&s.answer, &s.gold_spans))?;
                markings.push(m);
            }
            Err(e) if is_fatal(&e) => return Err(e.into()),
            Err(e) => skipped.push(SkippedSample { sample_id: s.sample_id.clone(), reason: e.to_string() }),
        }
    }
    for s in &skipped {
        log::warn!("skipped {}: {}", s.sample_id, s.reason);
    }
    let report = LlmSpansReport {
        evaluated: markings.len(),
        skipped,
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        counts,
    };
    let out = OutDir::create(&a.out)?;
    write_report_json(out.file(REPORT_JSON), "llm-spans", &report)?;
    write_jsonl(out.file(PREDICTIONS_JSONL), &markings)?;
    println!("{}", serde_json::json!({"precision": report.precision, "recall": report.recall, "f1": report.f1}));
    log_run(&out.file(SIDECAR_LOG))
}
