use std::collections::HashSet;

use crate::text::is_punctuation;

const ENGLISH_V1: &str = include_str!("../../data/stopwords_en_v1.txt");

/// Lowercase stopwords plus the punctuation classes of [`is_punctuation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    version: String,
    words: HashSet<String>,
}

impl StopList {
    /// The pinned 179-word English list, version `en-v1`.
    pub fn english_v1() -> Self {
        Self::new("en-v1", ENGLISH_V1.lines().map(str::trim).filter(|w| !w.is_empty()))
    }

    pub fn new<I, S>(version: &str, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            version: version.to_owned(),
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    /// True when `text` has nothing but whitespace, punctuation and stopwords.
    ///
    /// Whitespace-separated chunks are stripped of surrounding punctuation;
    /// a chunk is trivial when nothing is left or the rest is a stopword.
    pub fn is_trivial(&self, text: &str) -> bool {
        text.split_whitespace().all(|chunk| {
            let core = chunk.trim_matches(is_punctuation);
            core.is_empty() || self.contains(core)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_list_has_179_words() {
        let s = StopList::english_v1();
        assert_eq!(s.len(), 179);
        assert!(s.contains("The"));
        assert!(s.contains("don't"));
        assert!(!s.contains("castle"));
    }

    #[test]
    fn trivial_text() {
        let s = StopList::english_v1();
        assert!(s.is_trivial("the ."));
        assert!(s.is_trivial(" the ,"));
        assert!(s.is_trivial("(of the)"));
        assert!(s.is_trivial(""));
        assert!(!s.is_trivial("the castle"));
        assert!(!s.is_trivial("1068"));
    }
}
