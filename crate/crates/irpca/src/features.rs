//! Feature-pair preparation: cached factorizations, incoherence constants,
//! condition numbers, pseudoinverses, and the feasibility residual.

use crate::error::Error;
use crate::matrix::{Matrix, SvdFactors, RANK_TOL};

/// Prepared feature matrices `F1` (d1 x n1) and `F2` (d2 x n2) with cached
/// SVD factors, incoherence constants, singular-value extremes, and the two
/// pseudoinverses the solver applies every iteration.
///
/// Immutable after [`FeaturePair::prepare`]; safe to share across threads.
#[derive(Debug, Clone)]
pub struct FeaturePair {
    f1: Matrix,
    f2: Matrix,
    svd_f1: SvdFactors,
    svd_f2: SvdFactors,
    mu_f1: f64,
    mu_f2: f64,
    kappa: f64,
    pinv_f1t: Matrix,
    pinv_f2: Matrix,
}

impl FeaturePair {
    /// Validate and cache everything derived from the pair. Requires
    /// `d <= n` and full row rank for both matrices.
    ///
    /// The incoherence constants are computed as the tightest valid values:
    /// `mu_F = max_i ||row i of V_F|| * sqrt(n/d)`, where `V_F` holds the
    /// right singular vectors of `F`.
    pub fn prepare(f1: Matrix, f2: Matrix) -> Result<Self, Error> {
        check_feature_dims("F1", &f1)?;
        check_feature_dims("F2", &f2)?;
        let svd_f1 = f1.svd()?;
        let svd_f2 = f2.svd()?;
        check_full_row_rank("F1", &svd_f1, f1.rows())?;
        check_full_row_rank("F2", &svd_f2, f2.rows())?;

        let mu_f1 = incoherence(&svd_f1, f1.rows(), f1.cols());
        let mu_f2 = incoherence(&svd_f2, f2.rows(), f2.cols());
        let kappa_f1 = svd_f1.sigma_max() / svd_f1.sigma_min();
        let kappa_f2 = svd_f2.sigma_max() / svd_f2.sigma_min();

        // pinv(F1^T) = U Sigma^-1 V^T and pinv(F2) = V Sigma^-1 U^T, both
        // built from the cached factors.
        let pinv_f1t = scaled_product(&svd_f1, true);
        let pinv_f2 = scaled_product(&svd_f2, false);

        let left = pinv_f1t.matmul(&f1.transpose());
        let right = f2.matmul(&pinv_f2);
        let left_resid = left.sub(&Matrix::identity(f1.rows())).inf_norm();
        let right_resid = right.sub(&Matrix::identity(f2.rows())).inf_norm();
        if left_resid > 1e-8 {
            return Err(Error::Numerical {
                context: "pinv(F1^T) * F1^T = I",
                residual: left_resid,
            });
        }
        if right_resid > 1e-8 {
            return Err(Error::Numerical {
                context: "F2 * pinv(F2) = I",
                residual: right_resid,
            });
        }

        Ok(FeaturePair {
            f1,
            f2,
            svd_f1,
            svd_f2,
            mu_f1,
            mu_f2,
            kappa: kappa_f1.max(kappa_f2),
            pinv_f1t,
            pinv_f2,
        })
    }

    pub fn f1(&self) -> &Matrix {
        &self.f1
    }

    pub fn f2(&self) -> &Matrix {
        &self.f2
    }

    pub fn svd_f1(&self) -> &SvdFactors {
        &self.svd_f1
    }

    pub fn svd_f2(&self) -> &SvdFactors {
        &self.svd_f2
    }

    pub fn d1(&self) -> usize {
        self.f1.rows()
    }

    pub fn n1(&self) -> usize {
        self.f1.cols()
    }

    pub fn d2(&self) -> usize {
        self.f2.rows()
    }

    pub fn n2(&self) -> usize {
        self.f2.cols()
    }

    pub fn mu_f1(&self) -> f64 {
        self.mu_f1
    }

    pub fn mu_f2(&self) -> f64 {
        self.mu_f2
    }

    /// `max(mu_F1, mu_F2)`, the constant the identifiability bounds use.
    pub fn mu(&self) -> f64 {
        self.mu_f1.max(self.mu_f2)
    }

    pub fn sigma_max_f1(&self) -> f64 {
        self.svd_f1.sigma_max()
    }

    pub fn sigma_min_f1(&self) -> f64 {
        self.svd_f1.sigma_min()
    }

    pub fn sigma_max_f2(&self) -> f64 {
        self.svd_f2.sigma_max()
    }

    pub fn sigma_min_f2(&self) -> f64 {
        self.svd_f2.sigma_min()
    }

    /// Max of the two condition numbers.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn d_max(&self) -> usize {
        self.d1().max(self.d2())
    }

    /// Cached `(F1^T)^dagger` (d1 x n1), a left inverse of `F1^T`.
    pub fn pinv_f1t(&self) -> &Matrix {
        &self.pinv_f1t
    }

    /// Cached `(F2)^dagger` (n2 x d2), a right inverse of `F2`.
    pub fn pinv_f2(&self) -> &Matrix {
        &self.pinv_f2
    }

    /// Relative distance of `L` from the bilinear span of the pair:
    /// `||L - F1^T (pinv(F1^T) L pinv(F2)) F2||_F / max(1, ||L||_F)`.
    ///
    /// Zero (up to 1e-8) exactly when `col(L) ⊆ col(F1^T)` and
    /// `row(L) ⊆ row(F2)`, the feasibility condition.
    pub fn feasibility_residual(&self, l: &Matrix) -> Result<f64, Error> {
        if l.rows() != self.n1() || l.cols() != self.n2() {
            return Err(Error::dims(
                "feasibility_residual",
                (self.n1(), self.n2()),
                (l.rows(), l.cols()),
            ));
        }
        let w = self.pinv_f1t.matmul(l).matmul(&self.pinv_f2);
        let back = self.f1.transpose().matmul(&w).matmul(&self.f2);
        Ok(l.sub(&back).frob_norm() / l.frob_norm().max(1.0))
    }

    /// Block-diagonal embedding of the pair, `[[F1, 0], [0, F2]]`, prepared
    /// as a fresh pair. Used by the symmetric-embedding solve path.
    pub fn embedded(&self) -> Result<FeaturePair, Error> {
        let d = self.d1() + self.d2();
        let n = self.n1() + self.n2();
        let mut f = Matrix::zeros(d, n);
        for i in 0..self.d1() {
            for j in 0..self.n1() {
                f.set(i, j, self.f1.get(i, j));
            }
        }
        for i in 0..self.d2() {
            for j in 0..self.n2() {
                f.set(self.d1() + i, self.n1() + j, self.f2.get(i, j));
            }
        }
        FeaturePair::prepare(f.clone(), f)
    }
}

fn check_feature_dims(name: &'static str, f: &Matrix) -> Result<(), Error> {
    if f.rows() > f.cols() {
        return Err(Error::param(
            name,
            format!(
                "feature matrices must have d <= n, got {}x{}",
                f.rows(),
                f.cols()
            ),
        ));
    }
    Ok(())
}

fn check_full_row_rank(name: &'static str, svd: &SvdFactors, d: usize) -> Result<(), Error> {
    if svd.rank() < d {
        return Err(Error::param(
            name,
            format!(
                "feature matrix must have full row rank (sigma_min {:.3e}, sigma_max {:.3e})",
                svd.sigma_min(),
                svd.sigma_max()
            ),
        ));
    }
    debug_assert!(svd.sigma_min() > RANK_TOL * svd.sigma_max());
    Ok(())
}

/// Tightest incoherence constant of a d x n feature matrix from its cached
/// factors: largest row norm of `V`, in units of `sqrt(d/n)`.
fn incoherence(svd: &SvdFactors, d: usize, n: usize) -> f64 {
    let v = svd.v();
    let mut max_norm = 0.0_f64;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..d {
            let x = v.get(i, j);
            s += x * x;
        }
        max_norm = max_norm.max(s.sqrt());
    }
    // Row norms of an orthonormal-column V lie in [sqrt(d/n), 1] at the max,
    // so mu * sqrt(d/n) stays in that band by construction.
    max_norm * (n as f64 / d as f64).sqrt()
}

/// `U Sigma^-1 V^T` when `transposed_sense` (pseudoinverse of F^T), else
/// `V Sigma^-1 U^T` (pseudoinverse of F).
fn scaled_product(svd: &SvdFactors, transposed_sense: bool) -> Matrix {
    let k = svd.singular_values().len();
    let scale_cols = |m: &Matrix| -> Matrix {
        let mut out = m.clone();
        for i in 0..m.rows() {
            for j in 0..k {
                out.set(i, j, m.get(i, j) / svd.singular_values()[j]);
            }
        }
        out
    };
    if transposed_sense {
        scale_cols(svd.u()).matmul(&svd.v().transpose())
    } else {
        scale_cols(svd.v()).matmul(&svd.u().transpose())
    }
}
