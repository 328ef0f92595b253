//! Small text helpers shared by curation, baselines and the synthetic tokenizer.

use std::ops::Range;

use unicode_general_category::{get_general_category, GeneralCategory};

/// Unicode `P*` categories plus ASCII punctuation/symbols.
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii_punctuation() {
        return true;
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Word-level pretokenizer whose ranges tile `text`.
///
/// Each token is a (possibly empty) run of leading whitespace followed by either
/// an alphanumeric run or a single other character. Trailing whitespace forms
/// its own token. Offsets are UTF-8 byte offsets.
pub fn pretokenize(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(start, _)) = it.peek() {
        while matches!(it.peek(), Some((_, c)) if c.is_whitespace()) {
            it.next();
        }
        match it.peek().copied() {
            Some((_, c)) if c.is_alphanumeric() => {
                while matches!(it.peek(), Some((_, c)) if c.is_alphanumeric()) {
                    it.next();
                }
            }
            Some(_) => {
                it.next();
            }
            None => {}
        }
        let end = it.peek().map_or(text.len(), |&(i, _)| i);
        out.push(start..end);
    }
    out
}

/// Splits `text` into passages separated by blank lines. Ranges are trimmed.
pub fn split_passages(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0usize;
    let bytes = text.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        if bytes[i] == b'\n' {
            // look for another newline separated only by whitespace
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] != b'\n' && (bytes[j] as char).is_ascii_whitespace() {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'\n' {
                push_trimmed(text, start..i, &mut out);
                let mut k = j + 1;
                while k < bytes.len() && (bytes[k] as char).is_ascii_whitespace() {
                    k += 1;
                }
                start = k;
                i = k;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(text, start..text.len(), &mut out);
    out
}

fn push_trimmed(text: &str, r: Range<usize>, out: &mut Vec<Range<usize>>) {
    if let Some(t) = trim_range(text, r) {
        out.push(t);
    }
}

/// Shrinks `r` to exclude leading and trailing whitespace; `None` if nothing remains.
pub fn trim_range(text: &str, r: Range<usize>) -> Option<Range<usize>> {
    let s = &text[r.clone()];
    let lead = s.len() - s.trim_start().len();
    let trail = s.len() - s.trim_end().len();
    if lead == s.len() {
        return None;
    }
    Some(r.start + lead..r.end - trail)
}
