//! Small dense linear algebra: row-major square matrices, Cholesky
//! factorization with incremental row appends, and triangular solves.
//!
//! Training sets stay at a few hundred points, so plain loops are adequate.

use crate::scalar::{dot, Scalar};

/// Lower-triangular Cholesky factor stored row-major in packed form.
///
/// Row `i` holds entries `0..=i`. Appending a row extends the factor of an
/// `n x n` matrix to the factor of its `(n+1) x (n+1)` bordered extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    rows: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

impl<T: Scalar> Cholesky<T> {
    pub fn empty() -> Self {
        Self { rows: Vec::new() }
    }

    /// Factorizes a symmetric matrix given as a dense row-major slice of
    /// size `n * n`. Only the lower triangle is read.
    pub fn factor(matrix: &[T], n: usize) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(matrix.len(), n * n);
        let mut chol = Self {
            rows: Vec::with_capacity(n),
        };
        for i in 0..n {
            chol.push_row(&matrix[i * n..i * n + i], matrix[i * n + i])?;
        }
        Ok(chol)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Entry `(i, j)` of the factor (zero above the diagonal).
    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.rows[i][j]
        }
    }

    /// Appends a new point with cross-covariances `cross` (length `dim()`)
    /// and self-covariance `diag`.
    pub fn push_row(&mut self, cross: &[T], diag: T) -> Result<(), NotPositiveDefinite> {
        let n = self.dim();
        assert_eq!(cross.len(), n);
        let mut row = self.solve_lower(cross);
        let sq = diag - dot(&row, &row);
        if !(sq > T::zero()) || !sq.is_finite() {
            return Err(NotPositiveDefinite { pivot: n });
        }
        row.push(sq.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Appends a row whose off-diagonal part `L⁻¹ cross` the caller has
    /// already computed; `pivot_sq` is `diag − ‖row‖²`.
    pub(crate) fn push_solved_row(&mut self, mut row: Vec<T>, pivot_sq: T) -> Result<(), NotPositiveDefinite> {
        let n = self.dim();
        assert_eq!(row.len(), n);
        if !(pivot_sq > T::zero()) || !pivot_sq.is_finite() {
            return Err(NotPositiveDefinite { pivot: n });
        }
        row.push(pivot_sq.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Solves `L v = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut v = Vec::with_capacity(n + 1);
        for (i, row) in self.rows.iter().enumerate() {
            let s = dot(&row[..i], &v[..i]);
            v.push((b[i] - s) / row[i]);
        }
        v
    }

    /// Solves `Lᵀ v = b`.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut v = b.to_vec();
        for i in (0..n).rev() {
            v[i] = v[i] / self.rows[i][i];
            let vi = v[i];
            for (j, &l) in self.rows[i][..i].iter().enumerate() {
                v[j] = v[j] - l * vi;
            }
        }
        v
    }

    /// Solves `L Lᵀ v = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> T {
        let two = T::one() + T::one();
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[i].ln())
            .fold(T::zero(), |a, b| a + b)
            * two
    }

    /// Reconstructs `L Lᵀ` as a dense row-major matrix.
    pub fn reconstruct(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let s = dot(&self.rows[i][..=j], &self.rows[j][..=j]);
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        out
    }
}
