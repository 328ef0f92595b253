//! Numeric kernels shared by detection and attribution.
//!
//! Everything here is generic over the storage [`Scalar`] and accumulates in
//! `f64`. Zero-norm vectors never produce NaN: their similarity is 0 and the
//! result is flagged degenerate.

mod matrix;
mod prefix;

use rayon::prelude::*;

pub use matrix::{Matrix, MatrixView};
pub use prefix::PrefixSums;

use crate::Scalar;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SimError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("buffer of length {len} cannot be shaped as {rows}x{cols}")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("invalid window [{start}, {end}) over {len} rows")]
    InvalidWindow { start: usize, end: usize, len: usize },
}

/// A cosine similarity value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    /// Set when either operand had zero norm; `value` is then 0.
    pub degenerate: bool,
}

#[inline]
pub(crate) fn dot<A: Scalar, B: Scalar>(u: &[A], v: &[B]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.widen() * b.widen()).sum()
}

#[inline]
pub(crate) fn norm<T: Scalar>(u: &[T]) -> f64 {
    u.iter().map(|a| a.widen() * a.widen()).sum::<f64>().sqrt()
}

/// Cosine from a dot product and two norms, clamped into [-1, 1].
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, norm_u: f64, norm_v: f64) -> Similarity {
    if norm_u == 0.0 || norm_v == 0.0 || !norm_u.is_finite() || !norm_v.is_finite() {
        return Similarity {
            value: 0.0,
            degenerate: true,
        };
    }
    Similarity {
        value: (dot / (norm_u * norm_v)).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

pub fn cosine<A: Scalar, B: Scalar>(u: &[A], v: &[B]) -> Result<Similarity, SimError> {
    if u.len() != v.len() {
        return Err(SimError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(cosine_from_parts(dot(u, v), norm(u), norm(v)))
}

/// All-pairs cosine: entry `(i, j)` is `cosine(rows[i], cols[j])`.
pub fn similarity_matrix<T: Scalar>(
    rows: MatrixView<'_, T>,
    cols: MatrixView<'_, T>,
) -> Result<Matrix<f64>, SimError> {
    if rows.cols() != cols.cols() {
        return Err(SimError::DimensionMismatch {
            left: rows.cols(),
            right: cols.cols(),
        });
    }
    let col_norms: Vec<f64> = cols.iter_rows().map(norm).collect();
    let n = cols.rows();
    let mut out = vec![0.0f64; rows.rows() * n];
    if n > 0 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, dst)| {
            let r = rows.row(i);
            let rn = norm(r);
            for (j, cell) in dst.iter_mut().enumerate() {
                *cell = cosine_from_parts(dot(r, cols.row(j)), rn, col_norms[j]).value;
            }
        });
    }
    Matrix::from_vec(rows.rows(), n, out)
}

/// Arithmetic mean of the given rows, accumulated in `f64`.
pub fn mean_of_rows<T: Scalar>(
    view: MatrixView<'_, T>,
    rows: impl IntoIterator<Item = usize>,
) -> Vec<f64> {
    let mut acc = vec![0.0f64; view.cols()];
    let mut n = 0usize;
    for i in rows {
        for (a, x) in acc.iter_mut().zip(view.row(i)) {
            *a += x.widen();
        }
        n += 1;
    }
    if n > 0 {
        let inv = n as f64;
        acc.iter_mut().for_each(|a| *a /= inv);
    }
    acc
}
