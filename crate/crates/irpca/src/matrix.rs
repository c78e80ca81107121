//! Dense row-major matrices and the numerical kernels the rest of the crate
//! builds on: SVD with a deterministic sign convention, spectral and
//! entry-wise hard thresholding, pseudoinverse, norms, sparsity counts, and
//! the symmetric embedding.

use thiserror::Error;

use crate::svd_kernel;

/// Relative singular-value cutoff below which a matrix is treated as rank
/// deficient. The value is an implementation choice; callers that need a
/// different gate can inspect [`SvdFactors`] directly.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyDimensions { rows: usize, cols: usize },
    #[error("entry buffer has length {got}, expected {rows}x{cols} = {expected}")]
    EntryCountMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("rank bound {r} outside 1..={max}")]
    RankOutOfRange { r: usize, max: usize },
    #[error("matrix is rank deficient: sigma_min {sigma_min:.6e} vs sigma_max {sigma_max:.6e}")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("SVD did not converge (relative reconstruction residual {residual:.6e})")]
    SvdConvergence { residual: f64 },
}

/// Dense real matrix with row-major storage. Constructors reject non-finite
/// entries, so downstream kernels may assume finite data.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::EmptyDimensions { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(MatrixError::EntryCountMismatch {
                rows,
                cols,
                expected: rows * cols,
                got: entries.len(),
            });
        }
        let m = Matrix { rows, cols, entries };
        m.check_finite()?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    /// Build from explicit row slices; rows must all have the same length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, MatrixError> {
        if rows.is_empty() {
            return Err(MatrixError::EmptyDimensions { rows: 0, cols: 0 });
        }
        let cols = rows[0].len();
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(MatrixError::EntryCountMismatch {
                    rows: rows.len(),
                    cols,
                    expected: rows.len() * cols,
                    got: entries.len() + r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, entries)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Matrix::new(rows, cols, entries).expect("from_fn produced invalid matrix")
    }

    fn check_finite(&self) -> Result<(), MatrixError> {
        for (k, &x) in self.entries.iter().enumerate() {
            if !x.is_finite() {
                return Err(MatrixError::NonFinite {
                    row: k / self.cols,
                    col: k % self.cols,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        assert!(v.is_finite(), "matrix entries must be finite");
        self.entries[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row index out of bounds");
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.entries[j * self.rows + i] = self.entries[i * self.cols + j];
            }
        }
        out
    }

    /// Matrix product. Panics on inner-dimension mismatch; public entry
    /// points validate shapes before arithmetic starts.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        // i-k-j loop order keeps the inner loop streaming over contiguous rows.
        for i in 0..self.rows {
            let out_row = &mut out.entries[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.entries[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.entries[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        assert!(c.is_finite(), "scale factor must be finite");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&x| x * c).collect(),
        }
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "elementwise op dimension mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Copy of the block `rows[r0..r1) x cols[c0..c1)`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        assert!(r0 < r1 && r1 <= self.rows && c0 < c1 && c1 <= self.cols);
        let mut out = Matrix::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            let src = &self.entries[i * self.cols + c0..i * self.cols + c1];
            let dst_row = i - r0;
            out.entries[dst_row * (c1 - c0)..(dst_row + 1) * (c1 - c0)].copy_from_slice(src);
        }
        out
    }

    /// Max absolute entry (the infinity norm used throughout).
    pub fn inf_norm(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.entries.iter().map(|&x| x * x).sum::<f64>().sqrt()
    }

    /// Largest singular value. The underlying factorization converges for all
    /// finite inputs; a failure here indicates a broken build and panics.
    pub fn spectral_norm(&self) -> f64 {
        self.svd()
            .expect("SVD failed to converge while computing the spectral norm")
            .sigma_max()
    }

    /// (max nonzeros per row, max nonzeros per column), counting exact zeros.
    pub fn row_col_sparsity(&self) -> (usize, usize) {
        self.row_col_sparsity_with_tol(0.0)
    }

    /// Sparsity counts with a caller-supplied tolerance: entries with
    /// `|x| <= tol` count as zero. Thresholding emits exact zeros, so the
    /// default tolerance of zero is safe inside the pipeline.
    pub fn row_col_sparsity_with_tol(&self, tol: f64) -> (usize, usize) {
        assert!(tol >= 0.0, "sparsity tolerance must be nonnegative");
        let mut col_counts = vec![0usize; self.cols];
        let mut z1 = 0usize;
        for i in 0..self.rows {
            let mut row_count = 0usize;
            for j in 0..self.cols {
                if self.entries[i * self.cols + j].abs() > tol {
                    row_count += 1;
                    col_counts[j] += 1;
                }
            }
            z1 = z1.max(row_count);
        }
        let z2 = col_counts.into_iter().max().unwrap_or(0);
        (z1, z2)
    }

    /// Entry-wise hard thresholding: keep entries with `|x| > a`, zero the
    /// rest. The boundary `|x| = a` maps to zero.
    pub fn entry_threshold(&self, a: f64) -> Matrix {
        assert!(a >= 0.0 && a.is_finite(), "threshold must be finite and nonnegative");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|&x| if x.abs() > a { x } else { 0.0 })
                .collect(),
        }
    }

    /// Spectral hard thresholding: the best rank-`r` approximation via
    /// truncated SVD.
    pub fn rank_project(&self, r: usize) -> Result<Matrix, MatrixError> {
        let k = self.rows.min(self.cols);
        if r == 0 || r > k {
            return Err(MatrixError::RankOutOfRange { r, max: k });
        }
        let f = self.svd()?;
        Ok(f.truncate(r))
    }

    /// Moore-Penrose pseudoinverse of a full-rank matrix. For tall matrices
    /// this is the left inverse `(A^T A)^-1 A^T`; for wide matrices the right
    /// inverse `A^T (A A^T)^-1`.
    pub fn pseudoinverse(&self) -> Result<Matrix, MatrixError> {
        let f = self.svd()?;
        let smax = f.sigma_max();
        let smin = f.sigma_min();
        if smin <= RANK_TOL * smax || smax == 0.0 {
            return Err(MatrixError::RankDeficient {
                sigma_min: smin,
                sigma_max: smax,
            });
        }
        // pinv = V * Sigma^-1 * U^T
        let k = f.singular_values.len();
        let mut v_scaled = f.v.clone();
        for i in 0..v_scaled.rows {
            for j in 0..k {
                v_scaled.entries[i * k + j] /= f.singular_values[j];
            }
        }
        Ok(v_scaled.matmul(&f.u.transpose()))
    }

    /// Ratio of largest to smallest singular value of a full-rank matrix.
    pub fn condition_number(&self) -> Result<f64, MatrixError> {
        let f = self.svd()?;
        let smax = f.sigma_max();
        let smin = f.sigma_min();
        if smin <= RANK_TOL * smax || smax == 0.0 {
            return Err(MatrixError::RankDeficient {
                sigma_min: smin,
                sigma_max: smax,
            });
        }
        Ok(smax / smin)
    }

    /// Symmetric embedding `[[0, M], [M^T, 0]]` of size (n1+n2) x (n1+n2).
    pub fn sym_embed(&self) -> Matrix {
        let n = self.rows + self.cols;
        let mut out = Matrix::zeros(n, n);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let x = self.entries[i * self.cols + j];
                out.entries[i * n + (self.rows + j)] = x;
                out.entries[(self.rows + j) * n + i] = x;
            }
        }
        out
    }

    /// Thin SVD `A = U diag(sigma) V^T` with `k = min(rows, cols)` columns.
    ///
    /// Output is deterministic for identical input: singular values are
    /// sorted nonincreasing and each singular vector pair is oriented so the
    /// largest-magnitude entry of the U column is positive (ties broken by
    /// lowest index). The factors are verified against the input before
    /// returning; an unconverged factorization is reported with its relative
    /// residual.
    pub fn svd(&self) -> Result<SvdFactors, MatrixError> {
        let raw = svd_kernel::svd(self.rows, self.cols, &self.entries)
            .map_err(|residual| MatrixError::SvdConvergence { residual })?;
        let k = raw.sigma.len();
        let mut u = Matrix {
            rows: self.rows,
            cols: k,
            entries: raw.u,
        };
        let mut v = Matrix {
            rows: self.cols,
            cols: k,
            entries: raw.v,
        };

        // Sign convention: largest-magnitude entry of each U column positive,
        // ties broken by lowest index.
        for j in 0..k {
            let mut max_abs = 0.0_f64;
            let mut flip = false;
            for i in 0..self.rows {
                let x = u.entries[i * k + j];
                if x.abs() > max_abs {
                    max_abs = x.abs();
                    flip = x < 0.0;
                }
            }
            if flip {
                for i in 0..self.rows {
                    u.entries[i * k + j] = -u.entries[i * k + j];
                }
                for i in 0..self.cols {
                    v.entries[i * k + j] = -v.entries[i * k + j];
                }
            }
        }

        let factors = SvdFactors {
            u,
            singular_values: raw.sigma,
            v,
        };
        let residual = {
            let denom = self.frob_norm();
            let diff = factors.reconstruct().sub(self).frob_norm();
            if denom > 0.0 {
                diff / denom
            } else {
                diff
            }
        };
        if residual > 1e-8 {
            return Err(MatrixError::SvdConvergence { residual });
        }
        Ok(factors)
    }
}

/// Thin SVD factors: `U` (rows x k) and `V` (cols x k) with orthonormal
/// columns, singular values sorted nonincreasing, `k = min(rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    u: Matrix,
    singular_values: Vec<f64>,
    v: Matrix,
}

impl SvdFactors {
    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// Numerical rank: singular values above `RANK_TOL * sigma_max`.
    pub fn rank(&self) -> usize {
        let gate = RANK_TOL * self.sigma_max();
        self.singular_values.iter().filter(|&&s| s > gate).count()
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        self.truncate(self.singular_values.len())
    }

    /// Reconstruction from the top `r` singular triplets.
    pub fn truncate(&self, r: usize) -> Matrix {
        let k = self.singular_values.len();
        assert!(r >= 1 && r <= k, "truncation rank out of range");
        let mut u_scaled = Matrix::zeros(self.u.rows, r);
        for i in 0..self.u.rows {
            for j in 0..r {
                u_scaled.entries[i * r + j] = self.u.entries[i * k + j] * self.singular_values[j];
            }
        }
        let mut vt = Matrix::zeros(r, self.v.rows);
        for i in 0..self.v.rows {
            for j in 0..r {
                vt.entries[j * self.v.rows + i] = self.v.entries[i * k + j];
            }
        }
        u_scaled.matmul(&vt)
    }
}
