//! Synthetic traces for tests and fixtures: hand-built token lists, one-hot
//! token-id embeddings, random states, and a toy whole-prompt tokenizer.

use std::collections::HashMap;
use std::ops::Range;

use rand::Rng;

use super::{
    validate_trace, HiddenStates, Segment, TokenRecord, Trace, TraceError, TraceManifest, DTYPE_F32,
    FORMAT_VERSION,
};
use crate::prompt::{render_prompt, PromptParts, RenderedPrompt, UnknownTemplate};
use crate::text::{pretokenize, split_passages};

#[derive(Debug, Clone)]
struct Pending {
    segment: Segment,
    text: String,
    token_id: u32,
    passage: Option<usize>,
}

/// Builds a [`Trace`] token by token; offsets are derived from the texts.
#[derive(Debug, Clone)]
pub struct TraceBuilder {
    model_name: String,
    template_id: String,
    tokens: Vec<Pending>,
}

impl TraceBuilder {
    pub fn new(model_name: &str) -> Self {
        Self {
            model_name: model_name.to_owned(),
            template_id: "synthetic".to_owned(),
            tokens: Vec::new(),
        }
    }

    pub fn template_id(mut self, id: &str) -> Self {
        self.template_id = id.to_owned();
        self
    }

    pub fn token(mut self, segment: Segment, text: &str, token_id: u32) -> Self {
        self.tokens.push(Pending {
            segment,
            text: text.to_owned(),
            token_id,
            passage: None,
        });
        self
    }

    /// A document token inside evidence span `passage`.
    pub fn passage_token(mut self, text: &str, token_id: u32, passage: usize) -> Self {
        self.tokens.push(Pending {
            segment: Segment::Document,
            text: text.to_owned(),
            token_id,
            passage: Some(passage),
        });
        self
    }

    fn manifest(&self, layer_count: usize, hidden_dim: usize) -> TraceManifest {
        let mut offset = 0;
        let tokens = self
            .tokens
            .iter()
            .enumerate()
            .map(|(index, p)| {
                let start = offset;
                offset += p.text.len();
                TokenRecord {
                    index,
                    token_id: p.token_id,
                    text: p.text.clone(),
                    segment: p.segment,
                    char_start: start,
                    char_end: offset,
                    passage_index: p.passage,
                }
            })
            .collect::<Vec<_>>();
        TraceManifest {
            format_version: FORMAT_VERSION,
            model_name: self.model_name.clone(),
            layer_count,
            hidden_dim,
            token_count: tokens.len(),
            dtype: DTYPE_F32.to_owned(),
            tokens,
            prompt_template_id: self.template_id.clone(),
        }
    }

    /// States filled by `fill(layer, token_index, record, row)`; rows start zeroed.
    pub fn build_with<F>(&self, layer_count: usize, hidden_dim: usize, mut fill: F) -> Result<Trace, TraceError>
    where
        F: FnMut(usize, usize, &TokenRecord, &mut [f32]),
    {
        let manifest = self.manifest(layer_count, hidden_dim);
        let n = manifest.token_count;
        let mut data = vec![0.0f32; layer_count * n * hidden_dim];
        if hidden_dim > 0 {
            for (k, row) in data.chunks_mut(hidden_dim).enumerate() {
                let (layer, i) = (k / n.max(1), k % n.max(1));
                fill(layer, i, &manifest.tokens[i], row);
            }
        }
        let states = HiddenStates::new(layer_count, n, hidden_dim, data)?;
        let trace = Trace { manifest, states };
        let v = validate_trace(&trace);
        if v.is_empty() {
            Ok(trace)
        } else {
            Err(TraceError::Invalid(v))
        }
    }

    /// Every layer holds `onehot(token_id)`; the dimension is `max id + 1`.
    pub fn build_one_hot(&self, layer_count: usize) -> Result<Trace, TraceError> {
        let dim = self.tokens.iter().map(|t| t.token_id as usize + 1).max().unwrap_or(1);
        self.build_with(layer_count, dim, |_, _, tok, row| row[tok.token_id as usize] = 1.0)
    }

    /// Independent uniform values in `[-1, 1)`.
    pub fn build_random<R: Rng>(&self, layer_count: usize, hidden_dim: usize, rng: &mut R) -> Result<Trace, TraceError> {
        self.build_with(layer_count, hidden_dim, |_, _, _, row| {
            row.iter_mut().for_each(|x| *x = rng.random_range(-1.0f32..1.0))
        })
    }
}

/// Shape of a random trace from [`random_trace`].
#[derive(Debug, Clone, Copy)]
pub struct RandomTraceSpec {
    pub doc_len: usize,
    pub answer_len: usize,
    pub passages: usize,
    pub hidden_dim: usize,
    pub layer_count: usize,
}

/// A document of `doc_len` tokens split into `passages` contiguous evidence
/// spans at random cut points, followed by `answer_len` answer tokens.
pub fn random_trace<R: Rng>(rng: &mut R, spec: RandomTraceSpec) -> Trace {
    let passages = spec.passages.clamp(1, spec.doc_len.max(1));
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < passages - 1 {
        let c = rng.random_range(1..spec.doc_len);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut b = TraceBuilder::new("random");
    for i in 0..spec.doc_len {
        let p = cuts.iter().filter(|&&c| c <= i).count();
        b = b.passage_token(&format!(" d{i}"), i as u32, p);
    }
    for i in 0..spec.answer_len {
        b = b.token(Segment::Answer, &format!(" a{i}"), (spec.doc_len + i) as u32);
    }
    b.build_random(spec.layer_count, spec.hidden_dim, rng)
        .expect("random trace is well formed")
}

/// Toy tokenizer over a rendered prompt with one-hot token-id embeddings.
///
/// Each prompt part is pretokenized separately, so no token crosses a part
/// boundary. Token ids are assigned by first appearance of the
/// whitespace-trimmed token text. Document tokens carry the index of their
/// blank-line separated passage.
pub fn one_hot_prompt_trace(parts: &PromptParts, layer_count: usize) -> Result<(Trace, RenderedPrompt), SyntheticError> {
    let rendered = render_prompt(parts)?;
    let text = &rendered.text;
    let regions: [(Range<usize>, Segment); 7] = [
        (0..rendered.document.start, Segment::Template),
        (rendered.document.clone(), Segment::Document),
        (rendered.document.end..rendered.question.start, Segment::Template),
        (rendered.question.clone(), Segment::Question),
        (rendered.question.end..rendered.answer.start, Segment::Template),
        (rendered.answer.clone(), Segment::Answer),
        (rendered.answer.end..text.len(), Segment::Template),
    ];
    let doc_passages = split_passages(&parts.document);

    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut b = TraceBuilder::new("one-hot").template_id(&parts.template_id);
    let mut last_passage = 0usize;
    for (region, segment) in regions {
        for r in pretokenize(&text[region.clone()]) {
            let piece = &text[region.start + r.start..region.start + r.end];
            let key = piece.trim().to_owned();
            let next = vocab.len() as u32;
            let id = *vocab.entry(key).or_insert(next);
            if segment == Segment::Document {
                let local = r.start + (piece.len() - piece.trim_start().len());
                if piece.trim().is_empty() {
                    // whitespace-only: stays with the previous passage
                } else {
                    last_passage = doc_passages
                        .iter()
                        .rposition(|p| p.start <= local)
                        .unwrap_or(0)
                        .max(last_passage);
                }
                b = b.passage_token(piece, id, last_passage);
            } else {
                b = b.token(segment, piece, id);
            }
        }
    }
    let trace = b.build_one_hot(layer_count)?;
    Ok((trace, rendered))
}

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error(transparent)]
    Template(#[from] UnknownTemplate),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_hot_prompt_trace_is_valid_and_segmented() {
        let parts = PromptParts::new("Lincoln Castle is old.\n\nIt was built in 1068.", "When?", "It was built in 1068.");
        let (trace, rendered) = one_hot_prompt_trace(&parts, 3).unwrap();
        assert!(validate_trace(&trace).is_empty());
        assert_eq!(trace.prompt(), rendered.text);
        let answer: String = trace.manifest.tokens_in(Segment::Answer).iter().map(|t| t.text.as_str()).collect();
        assert_eq!(answer, "It was built in 1068.");
        let passages: Vec<usize> = trace
            .manifest
            .tokens_in(Segment::Document)
            .iter()
            .map(|t| t.passage_index.unwrap())
            .collect();
        assert_eq!(passages.first(), Some(&0));
        assert_eq!(passages.last(), Some(&1));
    }

    #[test]
    fn random_trace_respects_spec() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_trace(
            &mut rng,
            RandomTraceSpec {
                doc_len: 20,
                answer_len: 4,
                passages: 3,
                hidden_dim: 8,
                layer_count: 2,
            },
        );
        assert!(validate_trace(&t).is_empty());
        assert_eq!(t.manifest.indices(Segment::Document).len(), 20);
        assert_eq!(t.manifest.tokens.last().unwrap().passage_index, None);
        assert_eq!(
            t.manifest.tokens_in(Segment::Document).last().unwrap().passage_index,
            Some(2)
        );
    }
}
