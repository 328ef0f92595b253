use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{char_diff_align, split_sentences, AnnotatedSample, CharMatchSet, DatasetError, GoldSpan, SAMPLE_SCHEMA_VERSION};
use crate::detection::StopList;
use crate::text::{pretokenize, split_passages};

/// Sentence-level verifiability annotation: a statement inside a response,
/// citing one or more sentences of the source text. Sentence indices count
/// across all passages of `source_text` in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawVerifiabilityRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub query: String,
    pub response: String,
    pub statement: String,
    pub source_text: String,
    pub citation_sentences: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub record_index: usize,
    pub sample_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationOutput {
    pub samples: Vec<AnnotatedSample>,
    pub dropped: Vec<DroppedRecord>,
}

/// Marks each token whose non-whitespace characters are all matched.
/// Whitespace-only tokens are marked. `tokens` must tile `0..matches.len()`.
pub fn tokens_from_char_matches(
    statement: &str,
    tokens: &[Range<usize>],
    matches: &CharMatchSet,
) -> Result<Vec<bool>, DatasetError> {
    let mut expect = 0;
    for r in tokens {
        if r.start != expect || r.end <= r.start {
            return Err(DatasetError::NotTiling(format!("token {r:?} does not start at {expect}")));
        }
        expect = r.end;
    }
    if expect != matches.len() || expect != statement.len() {
        return Err(DatasetError::NotTiling(format!(
            "tokens cover {expect} of {} bytes",
            statement.len()
        )));
    }
    Ok(tokens
        .iter()
        .map(|r| {
            statement[r.clone()]
                .char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .all(|(i, _)| matches.is_matched(r.start + i))
        })
        .collect())
}

struct Sentence {
    passage: usize,
    /// Range in the passage text.
    range: Range<usize>,
}

/// Runs the curation pipeline over `records` in order. Records that cannot
/// be mapped to token-level spans are reported in `dropped`.
pub fn curate(records: &[RawVerifiabilityRecord], stoplist: &StopList) -> CurationOutput {
    let results: Vec<Result<AnnotatedSample, DroppedRecord>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let id = r.id.clone().unwrap_or_else(|| format!("rec-{i:05}"));
            curate_one(r, id.clone(), stoplist).map_err(|reason| DroppedRecord {
                record_index: i,
                sample_id: id,
                reason,
            })
        })
        .collect();
    let mut out = CurationOutput::default();
    for r in results {
        match r {
            Ok(s) => out.samples.push(s),
            Err(d) => out.dropped.push(d),
        }
    }
    out
}

fn curate_one(r: &RawVerifiabilityRecord, sample_id: String, stoplist: &StopList) -> Result<AnnotatedSample, String> {
    if r.statement.trim().is_empty() {
        return Err("empty statement".into());
    }
    let passage_ranges = split_passages(&r.source_text);
    if passage_ranges.is_empty() {
        return Err("empty source text".into());
    }
    let passages: Vec<String> = passage_ranges.iter().map(|p| r.source_text[p.clone()].to_string()).collect();
    let sentences: Vec<Sentence> = passages
        .iter()
        .enumerate()
        .flat_map(|(p, text)| split_sentences(text).into_iter().map(move |range| Sentence { passage: p, range }))
        .collect();

    let mut cited = r.citation_sentences.clone();
    cited.sort_unstable();
    cited.dedup();
    let sentence = match cited.as_slice() {
        [] => return Err("no sentence mapping".into()),
        [one] => sentences
            .get(*one)
            .ok_or_else(|| format!("citation sentence {one} out of range ({} sentences)", sentences.len()))?,
        many => return Err(format!("multi-sentence mapping ({} sentences)", many.len())),
    };
    let offset = r
        .response
        .find(&r.statement)
        .ok_or_else(|| "statement not found in response".to_string())?;

    let source = &passages[sentence.passage][sentence.range.clone()];
    let matches = char_diff_align(&r.statement, source);
    let tokens = pretokenize(&r.statement);
    let marked = tokens_from_char_matches(&r.statement, &tokens, &matches).map_err(|e| e.to_string())?;

    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !marked[i] || r.statement[tokens[i].clone()].trim().is_empty() {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < tokens.len() && marked[j + 1] {
            j += 1;
        }
        let raw = tokens[i].start..tokens[j].end;
        i = j + 1;
        let text = &r.statement[raw.clone()];
        let lead = text.len() - text.trim_start().len();
        let range = raw.start + lead..raw.start + text.trim_end().len();
        if stoplist.is_trivial(&r.statement[range.clone()]) {
            continue;
        }
        let last_char = r.statement[range.clone()].chars().next_back().map_or(1, char::len_utf8);
        let src_start = matches.source_of(range.start);
        let src_end = matches.source_of(range.end - last_char).map(|s| {
            s + source[s..].chars().next().map_or(1, char::len_utf8)
        });
        spans.push(GoldSpan {
            answer_char_start: offset + range.start,
            answer_char_end: offset + range.end,
            passage_index: sentence.passage,
            source_char_start: src_start.map(|s| s + sentence.range.start),
            source_char_end: src_end.map(|s| s + sentence.range.start),
        });
    }
    if spans.is_empty() {
        return Err("no token-level spans after filtering".into());
    }
    Ok(AnnotatedSample {
        schema_version: SAMPLE_SCHEMA_VERSION,
        sample_id,
        question: r.query.clone(),
        passages,
        answer: r.response.clone(),
        gold_spans: spans,
    })
}

#[cfg(test)]
#[allow(clippy::single_range_in_vec_init)]
mod tests {
    use super::*;

    fn rec(statement: &str, source: &str, cites: Vec<usize>) -> RawVerifiabilityRecord {
        RawVerifiabilityRecord {
            id: Some("r".into()),
            query: "When was it built?".into(),
            response: format!("Well. {statement} Thanks."),
            statement: statement.into(),
            source_text: source.into(),
            citation_sentences: cites,
        }
    }

    #[test]
    fn verbatim_statement_gives_one_span() {
        let src = "Intro here.\n\nThe castle was built in 1068. It fell later.";
        let out = curate(&[rec("The castle was built in 1068.", src, vec![1])], &StopList::english_v1());
        assert!(out.dropped.is_empty(), "{:?}", out.dropped);
        let s = &out.samples[0];
        assert_eq!(s.gold_spans.len(), 1);
        assert_eq!(s.span_text(0), "The castle was built in 1068.");
        let g = &s.gold_spans[0];
        assert_eq!(g.passage_index, 1);
        assert_eq!(&s.passages[1][g.source_char_start.unwrap()..g.source_char_end.unwrap()], "The castle was built in 1068.");
    }

    #[test]
    fn paraphrase_keeps_copied_runs() {
        let src = "The castle was built in 1068 by William.";
        let out = curate(&[rec("It was built in 1068 by the king.", src, vec![0])], &StopList::english_v1());
        let s = &out.samples[0];
        let texts: Vec<&str> = (0..s.gold_spans.len()).map(|i| s.span_text(i)).collect();
        assert_eq!(texts, vec!["was built in 1068 by"]);
    }

    #[test]
    fn drop_reasons() {
        let sl = StopList::english_v1();
        let out = curate(
            &[
                rec("A b.", "A b.", vec![]),
                rec("A b.", "A b. C d.", vec![0, 1]),
                rec("A b.", "A b.", vec![3]),
                rec("of the", "of the", vec![0]),
            ],
            &sl,
        );
        let reasons: Vec<&str> = out.dropped.iter().map(|d| d.reason.as_str()).collect();
        assert_eq!(reasons[0], "no sentence mapping");
        assert!(reasons[1].starts_with("multi-sentence mapping"));
        assert!(reasons[2].starts_with("citation sentence 3 out of range"));
        assert_eq!(reasons[3], "no token-level spans after filtering");
    }

    #[test]
    fn tiling_is_checked() {
        let m = char_diff_align("ab", "ab");
        assert!(tokens_from_char_matches("ab", &[0..1], &m).is_err());
        assert!(tokens_from_char_matches("ab", &[0..1, 0..2], &m).is_err());
        assert_eq!(tokens_from_char_matches("ab", &[0..1, 1..2], &m).unwrap(), vec![true, true]);
    }
}
