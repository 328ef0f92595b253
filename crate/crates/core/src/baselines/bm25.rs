use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{rank_scores, BaselineError, RankedPassage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(BaselineError::InvalidParams(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(BaselineError::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Lowercased alphanumeric runs.
pub fn bm25_tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn bm25_idf(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Score of every passage for `query`. Repeated query terms count once per
/// occurrence.
pub fn bm25_scores<S: AsRef<str>>(query: &str, passages: &[S], params: Bm25Params) -> Result<Vec<f64>, BaselineError> {
    if passages.is_empty() {
        return Err(BaselineError::EmptyPassages);
    }
    params.validate()?;
    let docs: Vec<Vec<String>> = passages.iter().map(|p| bm25_tokenize(p.as_ref())).collect();
    let n = docs.len();
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n as f64;
    let tfs: Vec<HashMap<&str, usize>> = docs
        .iter()
        .map(|d| {
            let mut m = HashMap::new();
            for t in d {
                *m.entry(t.as_str()).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let query = bm25_tokenize(query);
    let mut scores = vec![0.0; n];
    for term in &query {
        let df = tfs.iter().filter(|m| m.contains_key(term.as_str())).count();
        if df == 0 {
            continue;
        }
        let idf = bm25_idf(n, df);
        for (i, m) in tfs.iter().enumerate() {
            let Some(&tf) = m.get(term.as_str()) else { continue };
            let tf = tf as f64;
            let norm = 1.0 - params.b + params.b * docs[i].len() as f64 / avgdl;
            scores[i] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
    }
    Ok(scores)
}

pub fn bm25_rank<S: AsRef<str>>(query: &str, passages: &[S], params: Bm25Params) -> Result<Vec<RankedPassage>, BaselineError> {
    Ok(rank_scores(&bm25_scores(query, passages, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: [&str; 3] = [
        "The cat sat on the mat.",
        "A dog chased the cat; the cat ran up a tree.",
        "Birds fly south in winter.",
    ];

    #[test]
    fn toy_corpus_golden_values() {
        // frozen from an independent evaluation of the formula
        let s = bm25_scores("cat", &TOY, Bm25Params::default()).unwrap();
        let golden = [0.5077717780244109, 0.5665797174469143, 0.0];
        for (a, b) in s.iter().zip(golden) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let s = bm25_scores("the cat in winter", &TOY, Bm25Params::default()).unwrap();
        let golden = [1.1888548814823032, 1.1331594348938285, 2.2552083537181735];
        for (a, b) in s.iter().zip(golden) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn single_match_ranks_first() {
        let r = bm25_rank("winter", &TOY, Bm25Params::default()).unwrap();
        assert_eq!(r[0].index, 2);
    }

    #[test]
    fn no_match_keeps_index_order() {
        let r = bm25_rank("zebra", &TOY, Bm25Params::default()).unwrap();
        assert_eq!(r.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(r.iter().all(|p| p.score == 0.0));
    }

    #[test]
    fn equal_passages_tie() {
        let r = bm25_rank("cat", &["a cat", "a cat", "a cat"], Bm25Params::default()).unwrap();
        assert_eq!(r.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(r.iter().all(|p| p.score == r[0].score));
    }

    #[test]
    fn idf_non_increasing_in_df() {
        for n in 1..30 {
            for df in 1..n {
                assert!(bm25_idf(n, df + 1) <= bm25_idf(n, df));
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(bm25_scores::<&str>("x", &[], Bm25Params::default()), Err(BaselineError::EmptyPassages)));
        assert!(bm25_scores("x", &["a"], Bm25Params { k1: 0.0, b: 0.5 }).is_err());
        assert!(bm25_scores("x", &["a"], Bm25Params { k1: 1.0, b: 1.5 }).is_err());
        assert_eq!(bm25_scores("x", &["", ""], Bm25Params::default()).unwrap(), vec![0.0, 0.0]);
    }
}
