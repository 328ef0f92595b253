use super::{MatrixView, SimError};
use crate::Scalar;

/// Cumulative row sums of a layer view: row `p` holds the sum of rows `0..p`.
///
/// Shape is `(rows + 1, dim)` and row 0 is the zero vector. Sums are kept in
/// `f64` so long documents do not drift.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    len: usize,
    dim: usize,
    sums: Vec<f64>,
}

impl PrefixSums {
    pub fn new<T: Scalar>(view: MatrixView<'_, T>) -> Self {
        Self::over_rows(view, 0..view.rows())
    }

    /// Prefix sums over the listed rows of the view, in the given order.
    pub fn over_rows<T: Scalar, I>(view: MatrixView<'_, T>, rows: I) -> Self
    where
        I: IntoIterator<Item = usize>,
        I::IntoIter: ExactSizeIterator,
    {
        let rows = rows.into_iter();
        let dim = view.cols();
        let len = rows.len();
        let mut sums = vec![0.0f64; (len + 1) * dim];
        for (p, i) in rows.enumerate() {
            let (done, rest) = sums.split_at_mut((p + 1) * dim);
            let prev = &done[p * dim..];
            let next = &mut rest[..dim];
            for ((n, a), x) in next.iter_mut().zip(prev).zip(view.row(i)) {
                *n = a + x.widen();
            }
        }
        Self { len, dim, sums }
    }

    /// Number of summed rows (`token_count`).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.sums[p * self.dim..(p + 1) * self.dim]
    }

    /// Mean of rows `start..end`.
    pub fn window_mean(&self, start: usize, end: usize) -> Result<Vec<f64>, SimError> {
        let mut out = vec![0.0; self.dim];
        self.window_mean_into(start, end, &mut out)?;
        Ok(out)
    }

    /// Allocation-free form of [`window_mean`](Self::window_mean).
    pub fn window_mean_into(&self, start: usize, end: usize, out: &mut [f64]) -> Result<(), SimError> {
        if start >= end || end > self.len {
            return Err(SimError::InvalidWindow {
                start,
                end,
                len: self.len,
            });
        }
        if out.len() != self.dim {
            return Err(SimError::DimensionMismatch {
                left: self.dim,
                right: out.len(),
            });
        }
        let n = (end - start) as f64;
        for ((o, hi), lo) in out.iter_mut().zip(self.row(end)).zip(self.row(start)) {
            *o = (hi - lo) / n;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::Matrix;

    #[test]
    fn row_zero_is_zero_and_differences_reproduce_rows() {
        let m = Matrix::from_rows(&[[1.0f32, 2.0], [3.0, -1.0], [0.5, 0.25]]).unwrap();
        let p = PrefixSums::new(m.view());
        assert_eq!(p.row(0), &[0.0, 0.0]);
        for i in 0..3 {
            let d: Vec<f64> = p.row(i + 1).iter().zip(p.row(i)).map(|(a, b)| a - b).collect();
            let want: Vec<f64> = m.row(i).iter().map(|&x| f64::from(x)).collect();
            assert_eq!(d, want);
        }
    }

    #[test]
    fn window_of_one_is_the_row() {
        let m = Matrix::from_rows(&[[1.0f64, 2.0], [3.0, -1.0]]).unwrap();
        let p = PrefixSums::new(m.view());
        assert_eq!(p.window_mean(1, 2).unwrap(), vec![3.0, -1.0]);
        assert_eq!(p.window_mean(0, 2).unwrap(), vec![2.0, 0.5]);
    }

    #[test]
    fn empty_or_reversed_window_rejected() {
        let m = Matrix::from_rows(&[[1.0f64], [2.0]]).unwrap();
        let p = PrefixSums::new(m.view());
        assert!(p.window_mean(1, 1).is_err());
        assert!(p.window_mean(2, 1).is_err());
        assert!(p.window_mean(0, 3).is_err());
    }

    #[test]
    fn sub_range_prefix() {
        let m = Matrix::from_rows(&[[9.0f64], [1.0], [2.0], [9.0]]).unwrap();
        let p = PrefixSums::over_rows(m.view(), 1..3);
        assert_eq!(p.len(), 2);
        assert_eq!(p.window_mean(0, 2).unwrap(), vec![1.5]);
    }
}
