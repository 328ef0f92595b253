use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use super::{rank_scores, BaselineError, RankedPassage};
use crate::simcore::cosine;

/// Key of passage `i` of a sample in an embedding file.
pub fn passage_key(sample_id: &str, passage: usize) -> String {
    format!("{sample_id}/p{passage}")
}

/// Key of gold span `j` of a sample in an embedding file.
pub fn span_key(sample_id: &str, span: usize) -> String {
    format!("{sample_id}/s{span}")
}

#[derive(Deserialize)]
struct Line {
    id: String,
    vector: Vec<f64>,
}

/// Precomputed vectors keyed by identifier, all of one dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingFile {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingFile {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, BaselineError> {
        let mut out = Self::default();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&line)?;
            out.insert(l.id, l.vector)?;
        }
        Ok(out)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn insert(&mut self, id: String, vector: Vec<f64>) -> Result<(), BaselineError> {
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(BaselineError::NonFinite(id));
        }
        if self.vectors.is_empty() {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(BaselineError::DimensionMismatch { id, expected: self.dim, found: vector.len() });
        }
        if self.vectors.contains_key(&id) {
            return Err(BaselineError::DuplicateId(id));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&[f64], BaselineError> {
        self.vectors
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| BaselineError::MissingId(id.to_owned()))
    }
}

/// Ranks passages by cosine similarity to the query vector.
pub fn dense_rank<S: AsRef<str>>(
    query_id: &str,
    passage_ids: &[S],
    embeddings: &EmbeddingFile,
) -> Result<Vec<RankedPassage>, BaselineError> {
    if passage_ids.is_empty() {
        return Err(BaselineError::EmptyPassages);
    }
    let q = embeddings.get(query_id)?;
    let scores = passage_ids
        .iter()
        .map(|id| {
            let p = embeddings.get(id.as_ref())?;
            Ok(cosine(q, p).expect("uniform dimension").value)
        })
        .collect::<Result<Vec<f64>, BaselineError>>()?;
    Ok(rank_scores(&scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn file(lines: &str) -> Result<EmbeddingFile, BaselineError> {
        EmbeddingFile::from_reader(lines.as_bytes())
    }

    #[test]
    fn identical_vector_ranks_first() {
        let e = file("{\"id\":\"q\",\"vector\":[1,2]}\n{\"id\":\"a\",\"vector\":[2,-1]}\n{\"id\":\"b\",\"vector\":[2,4]}\n").unwrap();
        let r = dense_rank("q", &["a", "b"], &e).unwrap();
        assert_eq!(r[0].index, 1);
        assert!((r[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_passages_tie_break() {
        let e = file("{\"id\":\"q\",\"vector\":[1,0,0]}\n{\"id\":\"a\",\"vector\":[0,1,0]}\n{\"id\":\"b\",\"vector\":[0,0,1]}\n").unwrap();
        let r = dense_rank("q", &["a", "b"], &e).unwrap();
        assert_eq!((r[0].index, r[1].index), (0, 1));
    }

    #[test]
    fn matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut e = EmbeddingFile::default();
        let mut vecs = Vec::new();
        for i in 0..6 {
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            e.insert(format!("v{i}"), v.clone()).unwrap();
            vecs.push(v);
        }
        let ids: Vec<String> = (1..6).map(|i| format!("v{i}")).collect();
        let r = dense_rank("v0", &ids, &e).unwrap();
        let naive: Vec<f64> = (1..6)
            .map(|i| {
                let (a, b) = (&vecs[0], &vecs[i]);
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
            })
            .collect();
        for p in &r {
            assert!((p.score - naive[p.index]).abs() < 1e-12);
        }
        assert!(r.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            file("{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"b\",\"vector\":[1,2]}"),
            Err(BaselineError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            file("{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"a\",\"vector\":[2]}"),
            Err(BaselineError::DuplicateId(_))
        ));
        let e = file("{\"id\":\"a\",\"vector\":[1]}").unwrap();
        assert!(matches!(dense_rank("a", &["zz"], &e), Err(BaselineError::MissingId(_))));
    }
}
