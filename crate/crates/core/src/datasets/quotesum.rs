//! QuoteSum-style answers mark copied spans as `[<passage number> <text>]`
//! with 1-based passage numbers, e.g. `Built in [ 1 the 11th century ] by`.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{AnnotatedSample, DatasetError, GoldSpan, SAMPLE_SCHEMA_VERSION};

/// One input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteSumRecord {
    #[serde(alias = "qid")]
    pub id: String,
    pub question: String,
    #[serde(alias = "sources")]
    pub passages: Vec<String>,
    /// Answer with bracket markup.
    pub answer: String,
}

/// Strips markup from `marked`. Returns the clean answer and its spans
/// (offsets into the clean answer, 0-based passage indices). `line` is only
/// used in error messages.
pub fn parse_markup(marked: &str, passages: usize, line: usize) -> Result<(String, Vec<GoldSpan>), DatasetError> {
    let mut clean = String::with_capacity(marked.len());
    let mut spans = Vec::new();
    let mut it = marked.char_indices().peekable();
    while let Some((i, c)) = it.next() {
        match c {
            ']' => return Err(DatasetError::UnbalancedBrackets { line, offset: i }),
            '[' => {
                let open = i;
                while matches!(it.peek(), Some((_, c)) if c.is_whitespace()) {
                    it.next();
                }
                let mut digits = String::new();
                while let Some(&(_, d)) = it.peek().filter(|(_, d)| d.is_ascii_digit()) {
                    digits.push(d);
                    it.next();
                }
                if digits.is_empty() {
                    return Err(DatasetError::MalformedSpan {
                        line,
                        offset: open,
                        reason: "expected a passage number after '['".into(),
                    });
                }
                if !matches!(it.peek(), Some((_, c)) if c.is_whitespace()) {
                    return Err(DatasetError::MalformedSpan {
                        line,
                        offset: open,
                        reason: "expected whitespace after the passage number".into(),
                    });
                }
                while matches!(it.peek(), Some((_, c)) if c.is_whitespace()) {
                    it.next();
                }
                let mut body = String::new();
                loop {
                    match it.next() {
                        None => return Err(DatasetError::UnbalancedBrackets { line, offset: open }),
                        Some((j, '[')) => return Err(DatasetError::UnbalancedBrackets { line, offset: j }),
                        Some((_, ']')) => break,
                        Some((_, c)) => body.push(c),
                    }
                }
                let body = body.trim_end();
                if body.is_empty() {
                    return Err(DatasetError::MalformedSpan {
                        line,
                        offset: open,
                        reason: "empty span".into(),
                    });
                }
                let number: usize = digits.parse().map_err(|_| DatasetError::MalformedSpan {
                    line,
                    offset: open,
                    reason: format!("passage number {digits} too large"),
                })?;
                if number == 0 || number > passages {
                    return Err(DatasetError::PassageOutOfRange { line, number, passages });
                }
                let start = clean.len();
                clean.push_str(body);
                spans.push(GoldSpan {
                    answer_char_start: start,
                    answer_char_end: clean.len(),
                    passage_index: number - 1,
                    source_char_start: None,
                    source_char_end: None,
                });
            }
            c => clean.push(c),
        }
    }
    Ok((clean, spans))
}

/// Canonical markup (`[N text]`) for a sample's answer.
pub fn render_markup(sample: &AnnotatedSample) -> String {
    let mut out = String::with_capacity(sample.answer.len() + 8 * sample.gold_spans.len());
    let mut pos = 0;
    for s in &sample.gold_spans {
        out.push_str(&sample.answer[pos..s.answer_char_start]);
        out.push('[');
        out.push_str(&(s.passage_index + 1).to_string());
        out.push(' ');
        out.push_str(&sample.answer[s.answer_char_start..s.answer_char_end]);
        out.push(']');
        pos = s.answer_char_end;
    }
    out.push_str(&sample.answer[pos..]);
    out
}

/// Parses QuoteSum JSON lines into samples. Source offsets are filled from
/// the first occurrence of the span text in its passage, when present.
pub fn parse_quotesum<R: BufRead>(reader: R) -> Result<Vec<AnnotatedSample>, DatasetError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QuoteSumRecord = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedHeader {
            line: line_no,
            reason: e.to_string(),
        })?;
        let (answer, mut spans) = parse_markup(&rec.answer, rec.passages.len(), line_no)?;
        for s in &mut spans {
            let text = &answer[s.answer_char_start..s.answer_char_end];
            if let Some(at) = rec.passages[s.passage_index].find(text) {
                s.source_char_start = Some(at);
                s.source_char_end = Some(at + text.len());
            }
        }
        out.push(AnnotatedSample {
            schema_version: SAMPLE_SCHEMA_VERSION,
            sample_id: rec.id,
            question: rec.question,
            passages: rec.passages,
            answer,
            gold_spans: spans,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_span_with_spaces() {
        let (clean, spans) = parse_markup("Built in [ 1 the 11th century ] by…", 2, 1).unwrap();
        assert_eq!(clean, "Built in the 11th century by…");
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].passage_index, 0);
        assert_eq!(&clean[spans[0].answer_char_start..spans[0].answer_char_end], "the 11th century");
    }

    #[test]
    fn no_brackets_no_spans() {
        let (clean, spans) = parse_markup("plain text.", 2, 1).unwrap();
        assert_eq!(clean, "plain text.");
        assert!(spans.is_empty());
    }

    #[test]
    fn passage_out_of_range() {
        assert!(matches!(
            parse_markup("[ 3 x ]", 2, 4),
            Err(DatasetError::PassageOutOfRange { line: 4, number: 3, passages: 2 })
        ));
        assert!(matches!(parse_markup("[0 x]", 2, 1), Err(DatasetError::PassageOutOfRange { .. })));
    }

    #[test]
    fn unbalanced_and_malformed() {
        assert!(matches!(parse_markup("a ] b", 1, 1), Err(DatasetError::UnbalancedBrackets { .. })));
        assert!(matches!(parse_markup("[1 a", 1, 1), Err(DatasetError::UnbalancedBrackets { .. })));
        assert!(matches!(parse_markup("[1 a [1 b]]", 1, 1), Err(DatasetError::UnbalancedBrackets { .. })));
        assert!(matches!(parse_markup("[x]", 1, 1), Err(DatasetError::MalformedSpan { .. })));
        assert!(matches!(parse_markup("[1x]", 1, 1), Err(DatasetError::MalformedSpan { .. })));
        assert!(matches!(parse_markup("[1  ]", 1, 1), Err(DatasetError::MalformedSpan { .. })));
    }

    #[test]
    fn file_parsing_and_header_errors() {
        let data = concat!(
            r#"{"id":"q1","question":"When?","passages":["Castle built in the 11th century.","Other."],"answer":"It was [1 built in the 11th century]."}"#,
            "\n\n",
            r#"{"qid":"q2","question":"Q","sources":["x"],"answer":"none"}"#,
            "\n"
        );
        let s = parse_quotesum(data.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].answer, "It was built in the 11th century.");
        assert_eq!(s[0].gold_spans[0].source_char_start, Some(7));
        assert_eq!(s[0].gold_spans[0].source_char_end, Some(32));
        assert_eq!(s[1].sample_id, "q2");
        let bad = r#"{"id":"q1","passages":[]}"#;
        assert!(matches!(parse_quotesum(bad.as_bytes()), Err(DatasetError::MalformedHeader { line: 1, .. })));
    }

    fn piece() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9,.' ]{0,12}"
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(
            parts in proptest::collection::vec((piece(), "[a-zA-Z0-9][a-zA-Z0-9 ,.]{0,10}[a-zA-Z0-9.]", 0usize..3), 0..5),
            tail in piece(),
        ) {
            let mut answer = String::new();
            let mut spans = Vec::new();
            for (glue, span, p) in &parts {
                answer.push_str(glue);
                let start = answer.len();
                answer.push_str(span);
                spans.push(GoldSpan { answer_char_start: start, answer_char_end: answer.len(), passage_index: *p, source_char_start: None, source_char_end: None });
                answer.push(' ');
            }
            answer.push_str(&tail);
            let sample = AnnotatedSample {
                schema_version: SAMPLE_SCHEMA_VERSION,
                sample_id: "s".into(),
                question: "q".into(),
                passages: vec!["a".into(), "b".into(), "c".into()],
                answer,
                gold_spans: spans,
            };
            let (clean, parsed) = parse_markup(&render_markup(&sample), 3, 1).unwrap();
            prop_assert_eq!(clean, sample.answer.clone());
            prop_assert_eq!(parsed, sample.gold_spans.clone());
        }
    }
}
