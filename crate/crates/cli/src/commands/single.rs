//! `detect` and `attribute` over one trace directory.

use std::fs;

use anyhow::Result;
use attrib_core::attribution::{
    attribute_span, AttributionConfig, AttributionError, AttributionResult, EvidenceSegmentation, SpanRef,
};
use attrib_core::detection::{detect, DetectionConfig, ExtractionResult, StopList};
use attrib_core::evaluation::{answer_token_ranges, token_span, write_report_json};
use attrib_core::trace::{read_trace, Segment, Trace};
use serde::Serialize;

use crate::args::{AttributeArgs, AttributionFlags, DetectArgs};
use crate::output::{file_sidecar, invalid, log_run, require_dir};
use crate::parse::parse_span;

pub fn check_layer(trace: &Trace, layer: usize) -> Result<()> {
    if layer >= trace.layer_count() {
        return Err(invalid(format!("layer {layer} out of range for {} layers", trace.layer_count())));
    }
    Ok(())
}

pub fn attribution_config(layer: usize, flags: &AttributionFlags) -> Result<AttributionConfig> {
    let mut cfg = AttributionConfig::new(layer);
    if let Some(k) = flags.anchors {
        if k == 0 {
            return Err(invalid("-K must be at least 1"));
        }
        cfg.anchor_count = k;
    }
    if let Some(l) = flags.max_window {
        if l == 0 {
            return Err(invalid("-L must be at least 1"));
        }
        cfg.max_window_len = Some(l);
    }
    cfg.boundary_policy = flags.boundary_policy.map(Into::into);
    Ok(cfg)
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    model_name: &'a str,
    #[serde(flatten)]
    result: &'a ExtractionResult,
    span_text: Vec<&'a str>,
}

pub fn run_detect(a: &DetectArgs) -> Result<()> {
    require_dir(&a.trace)?;
    if !a.theta.is_finite() {
        return Err(invalid("theta must be finite"));
    }
    let trace = read_trace(&a.trace)?;
    check_layer(&trace, a.layer)?;
    let r = detect(&trace, DetectionConfig { layer: a.layer, theta: a.theta }, &StopList::english_v1(), a.filter)?;
    let prompt = trace.prompt();
    let body = DetectOutput {
        model_name: &trace.manifest.model_name,
        result: &r,
        span_text: r.spans.iter().map(|s| &prompt[s.char_start..s.char_end]).collect(),
    };
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_report_json(&a.out, "detect", &body)?;
    log_run(&file_sidecar(&a.out))
}

#[derive(Serialize)]
struct AttributeOutput<'a> {
    model_name: &'a str,
    layer: usize,
    span: SpanRef,
    span_text: String,
    window_text: &'a str,
    #[serde(flatten)]
    result: &'a AttributionResult,
}

fn resolve_span(trace: &Trace, a: &AttributeArgs) -> Result<SpanRef> {
    let answer_len = trace.manifest.indices(Segment::Answer).len();
    if let Some(s) = &a.span {
        let r = parse_span(s).map_err(invalid)?;
        if r.end > answer_len {
            return Err(invalid(format!("span {s} exceeds the {answer_len} answer tokens")));
        }
        return Ok(SpanRef::new(r.start, r.end));
    }
    let s = a.span_chars.as_deref().unwrap_or_default();
    let r = parse_span(s).map_err(invalid)?;
    let answer: String = trace.manifest.tokens_in(Segment::Answer).iter().map(|t| t.text.as_str()).collect();
    if r.end > answer.len() {
        return Err(invalid(format!("char span {s} exceeds the answer length {}", answer.len())));
    }
    let ranges = answer_token_ranges(&trace.manifest, &answer).map_err(anyhow::Error::msg)?;
    token_span(&ranges, r).ok_or_else(|| invalid(format!("char span {s} resolves to zero answer tokens")))
}

pub fn run_attribute(a: &AttributeArgs) -> Result<()> {
    require_dir(&a.trace)?;
    let trace = read_trace(&a.trace)?;
    check_layer(&trace, a.layer)?;
    let span = resolve_span(&trace, a)?;
    let cfg = attribution_config(a.layer, &a.attribution)?;
    let seg = EvidenceSegmentation::from_tokens(trace.tokens());
    let r = attribute_span(&trace, span, &cfg, seg.as_ref()).map_err(|e| match e {
        AttributionError::InvalidSpan { .. } | AttributionError::Config(_) | AttributionError::MissingSegmentation => {
            invalid(e.to_string())
        }
        other => other.into(),
    })?;
    let prompt = trace.prompt();
    let answer = trace.manifest.tokens_in(Segment::Answer);
    let body = AttributeOutput {
        model_name: &trace.manifest.model_name,
        layer: a.layer,
        span,
        span_text: answer[span.start..span.end].iter().map(|t| t.text.as_str()).collect(),
        window_text: &prompt[r.window.char_start..r.window.char_end],
        result: &r,
    };
    match &a.out {
        Some(path) => {
            write_report_json(path, "attribute", &body)?;
            log_run(&file_sidecar(path))
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&body)?);
            Ok(())
        }
    }
}
