use std::collections::BTreeSet;
use std::fmt;

use super::{Segment, Trace, DTYPE_F32, FORMAT_VERSION};

/// One broken trace invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Short invariant name, e.g. `"finite"` or `"char-order"`.
    pub invariant: &'static str,
    pub detail: String,
}

impl Violation {
    fn new(invariant: &'static str, detail: impl Into<String>) -> Self {
        Self {
            invariant,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.invariant, self.detail)
    }
}

/// Checks every manifest and state invariant. Empty iff the trace is well formed.
pub fn validate_trace(trace: &Trace) -> Vec<Violation> {
    let m = &trace.manifest;
    let mut out = Vec::new();

    if m.format_version != FORMAT_VERSION {
        out.push(Violation::new(
            "format-version",
            format!("format_version {} (expected {FORMAT_VERSION})", m.format_version),
        ));
    }
    if m.dtype != DTYPE_F32 {
        out.push(Violation::new("dtype", format!("dtype {:?} (expected \"f32\")", m.dtype)));
    }
    if m.layer_count == 0 {
        out.push(Violation::new("layer-count", "layer_count must be >= 1"));
    }
    if m.hidden_dim == 0 {
        out.push(Violation::new("hidden-dim", "hidden_dim must be >= 1"));
    }
    if m.token_count == 0 {
        out.push(Violation::new("token-count", "token_count must be >= 1"));
    }
    if m.token_count != m.tokens.len() {
        out.push(Violation::new(
            "token-count",
            format!("token_count {} but {} token records", m.token_count, m.tokens.len()),
        ));
    }
    if trace.states.shape() != (m.layer_count, m.token_count, m.hidden_dim) {
        let (l, t, d) = trace.states.shape();
        out.push(Violation::new(
            "shape",
            format!(
                "states shape ({l},{t},{d}) does not match manifest ({},{},{})",
                m.layer_count, m.token_count, m.hidden_dim
            ),
        ));
    }

    check_tokens(trace, &mut out);
    check_passages(trace, &mut out);
    check_finite(trace, &mut out);
    out
}

fn check_tokens(trace: &Trace, out: &mut Vec<Violation>) {
    let mut offset = 0usize;
    let mut prev: Option<(usize, usize)> = None;
    for (pos, t) in trace.manifest.tokens.iter().enumerate() {
        if t.index != pos {
            out.push(Violation::new(
                "token-index",
                format!("token at position {pos} has index {}", t.index),
            ));
        }
        if t.char_end < t.char_start {
            out.push(Violation::new(
                "char-range",
                format!("token {} has reversed range [{}, {})", t.index, t.char_start, t.char_end),
            ));
        }
        if let Some((pidx, pend)) = prev {
            if t.char_start < pend {
                out.push(Violation::new(
                    "char-order",
                    format!(
                        "tokens {pidx} and {} overlap or are out of order ([.., {pend}) then [{}, ..))",
                        t.index, t.char_start
                    ),
                ));
            }
        }
        if t.char_start != offset || t.char_end != offset + t.text.len() {
            out.push(Violation::new(
                "prompt-reconstruction",
                format!(
                    "token {} spans [{}, {}) but its text occupies [{offset}, {})",
                    t.index,
                    t.char_start,
                    t.char_end,
                    offset + t.text.len()
                ),
            ));
        }
        offset += t.text.len();
        prev = Some((t.index, t.char_end));
    }
}

fn check_passages(trace: &Trace, out: &mut Vec<Violation>) {
    let mut expected_next = 0usize;
    let mut seen_doc_with = false;
    let mut seen_doc_without = false;
    for t in &trace.manifest.tokens {
        match (t.segment, t.passage_index) {
            (Segment::Document, Some(p)) => {
                seen_doc_with = true;
                // contiguous from 0: each token stays in the current passage or opens the next
                if p != expected_next.saturating_sub(1) && p != expected_next {
                    out.push(Violation::new(
                        "passage-index",
                        format!(
                            "token {} has passage_index {p}; expected {} or {expected_next}",
                            t.index,
                            expected_next.saturating_sub(1)
                        ),
                    ));
                } else if p == expected_next {
                    expected_next += 1;
                }
            }
            (Segment::Document, None) => seen_doc_without = true,
            (seg, Some(p)) => out.push(Violation::new(
                "passage-index",
                format!("{seg} token {} carries passage_index {p}", t.index),
            )),
            _ => {}
        }
    }
    if seen_doc_with && seen_doc_without {
        out.push(Violation::new(
            "passage-index",
            "passage_index must be present on all document tokens or none",
        ));
    }
}

fn check_finite(trace: &Trace, out: &mut Vec<Violation>) {
    let (layers, tokens, dim) = trace.states.shape();
    if dim == 0 {
        return;
    }
    let mut bad = BTreeSet::new();
    for (i, x) in trace.states.as_slice().iter().enumerate() {
        if !x.is_finite() {
            let token = (i / dim) % tokens.max(1);
            let layer = i / (dim * tokens.max(1));
            bad.insert((layer.min(layers), token));
        }
    }
    for (layer, token) in bad {
        out.push(Violation::new("finite", format!("non-finite value at ({layer},{token},·)")));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synthetic::TraceBuilder;

    fn small() -> Trace {
        TraceBuilder::new("toy")
            .token(Segment::Document, "The", 1)
            .token(Segment::Document, " cat", 2)
            .token(Segment::Answer, " cat", 2)
            .build_one_hot(2)
            .unwrap()
    }

    #[test]
    fn well_formed_trace_has_no_violations() {
        assert_eq!(validate_trace(&small()), vec![]);
    }

    #[test]
    fn nan_is_reported_with_coordinates() {
        let mut t = small();
        let dim = t.manifest.hidden_dim;
        let idx = (t.manifest.token_count + 2) * dim; // layer 1, token 2
        t.states.as_mut_slice()[idx] = f32::NAN;
        let v = validate_trace(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].detail, "non-finite value at (1,2,·)");
    }

    #[test]
    fn overlapping_ranges_name_both_tokens() {
        let mut t = small();
        t.manifest.tokens[2].char_start = 5;
        let v = validate_trace(&t);
        let order: Vec<_> = v.iter().filter(|v| v.invariant == "char-order").collect();
        assert_eq!(order.len(), 1);
        assert!(order[0].detail.contains("tokens 1 and 2"));
    }

    #[test]
    fn zero_tokens_is_a_violation() {
        let mut t = small();
        t.manifest.token_count = 0;
        assert!(validate_trace(&t).iter().any(|v| v.invariant == "token-count"));
    }

    #[test]
    fn passage_indices_must_be_contiguous() {
        let mut t = TraceBuilder::new("toy")
            .passage_token("a", 1, 0)
            .passage_token(" b", 2, 1)
            .token(Segment::Answer, " b", 2)
            .build_one_hot(1)
            .unwrap();
        assert!(validate_trace(&t).is_empty());
        t.manifest.tokens[1].passage_index = Some(2);
        assert!(validate_trace(&t).iter().any(|v| v.invariant == "passage-index"));
        t.manifest.tokens[1].passage_index = None;
        assert!(validate_trace(&t).iter().any(|v| v.invariant == "passage-index"));
    }

    #[test]
    fn passage_index_on_answer_token_rejected() {
        let mut t = small();
        t.manifest.tokens[2].passage_index = Some(0);
        assert!(validate_trace(&t).iter().any(|v| v.invariant == "passage-index"));
    }
}
