//! The alternating hard-thresholding iteration: threshold schedule,
//! entry-wise thresholding of the sparse residual, feature-space spectral
//! thresholding of the low-rank residual, iteration trace, and the
//! transductive and symmetric-embedding variants.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::features::FeaturePair;
use crate::matrix::Matrix;

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Run exactly `max_iters` iterations.
    Fixed,
    /// Stop once the relative residual drops to `residual_tol`, capped at
    /// `max_iters`.
    Residual,
}

/// Run parameters for [`irpca_iht`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target rank of the latent matrix.
    pub rank: usize,
    /// Noise parameter: additive floor of the threshold schedule. Zero in
    /// the noiseless case.
    #[serde(default)]
    pub nu: f64,
    /// Spectral-norm bound on the latent matrix.
    #[serde(default = "default_c_w")]
    pub c_w: f64,
    /// Iteration cap.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Target accuracy; drives [`required_iters`].
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_stop_rule")]
    pub stop_rule: StopRule,
    /// Relative residual threshold for [`StopRule::Residual`].
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_c_w() -> f64 {
    1.0
}

fn default_max_iters() -> usize {
    100
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_stop_rule() -> StopRule {
    StopRule::Residual
}

fn default_residual_tol() -> f64 {
    1e-3
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        SolverConfig {
            rank,
            nu: 0.0,
            c_w: default_c_w(),
            max_iters: default_max_iters(),
            epsilon: default_epsilon(),
            stop_rule: default_stop_rule(),
            residual_tol: default_residual_tol(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.rank == 0 {
            return Err(Error::param("rank", "must be at least 1"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::param("nu", "must be finite and nonnegative"));
        }
        if !(self.c_w > 0.0 && self.c_w.is_finite()) {
            return Err(Error::param("c_w", "must be finite and positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be finite and positive"));
        }
        if !(self.residual_tol > 0.0 && self.residual_tol.is_finite()) {
            return Err(Error::param("residual_tol", "must be finite and positive"));
        }
        Ok(())
    }
}

/// Ground-truth references for per-iteration error columns. The solver never
/// reads these to make decisions; they only fill diagnostics in the trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceTruth<'a> {
    pub l_star: &'a Matrix,
    pub s_star: &'a Matrix,
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Iteration index, starting at 1.
    pub t: usize,
    /// Threshold used this iteration.
    pub zeta: f64,
    /// `||M - L_t - S_t||_F / ||M||_F` (zero when `M` is zero).
    pub residual: f64,
    pub err_l_inf: Option<f64>,
    pub err_s_inf: Option<f64>,
    /// Entries of `supp(S_t)` outside `supp(S*)`.
    pub support_false_positives: Option<usize>,
    /// Seconds spent in this iteration, excluding diagnostics.
    pub wall_time: f64,
}

/// Solver output: latent estimate, sparse estimate, the implied low-rank
/// component, and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub w_hat: Matrix,
    pub s_hat: Matrix,
    /// `F1^T W_hat F2`, consistent with `w_hat` by construction.
    pub l_hat: Matrix,
    pub trace: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Base of the threshold schedule:
/// `mu_F1 mu_F2 sigma_max(F1) sigma_max(F2) sqrt(d1 d2 / (n1 n2)) c_W`.
fn schedule_base(fp: &FeaturePair, c_w: f64) -> f64 {
    let dims = (fp.d1() as f64 * fp.d2() as f64) / (fp.n1() as f64 * fp.n2() as f64);
    fp.mu_f1() * fp.mu_f2() * fp.sigma_max_f1() * fp.sigma_max_f2() * dims.sqrt() * c_w
}

/// Threshold schedule. `t = 0` is the initialization value `5 b + nu`;
/// `t >= 1` gives the value used at iteration `t`: `b / 5^(t-1) + nu`,
/// where `b` is [`schedule_base`]. Strictly decreasing for `t >= 1` with
/// limit `nu`.
pub fn zeta(t: usize, fp: &FeaturePair, cfg: &SolverConfig) -> f64 {
    let b = schedule_base(fp, cfg.c_w);
    if t == 0 {
        5.0 * b + cfg.nu
    } else {
        b / 5f64.powi(t as i32 - 1) + cfg.nu
    }
}

/// Iterations guaranteeing accuracy `epsilon` in the noiseless case: the
/// smallest integer strictly exceeding the `log_5` bound,
/// `ceil(log5(2 b / epsilon)) + 2` with `b` the schedule base, clamped to at
/// least 1.
pub fn required_iters(fp: &FeaturePair, cfg: &SolverConfig) -> usize {
    let b = schedule_base(fp, cfg.c_w);
    let t = ((2.0 * b / cfg.epsilon).ln() / 5f64.ln()).ceil() as i64 + 2;
    t.max(1) as usize
}

/// The theory-faithful noise parameter for a known bound on `||N*||_inf`:
/// `nu = (3 mu^2 d kappa^2 + 1) * bound`, with `mu = max(mu_F1, mu_F2)`,
/// `d = max(d1, d2)`, and `kappa` the pair's condition number.
pub fn nu_for_noise_bound(fp: &FeaturePair, noise_inf_bound: f64) -> f64 {
    let mu = fp.mu();
    let d = fp.d_max() as f64;
    let kappa = fp.kappa();
    (3.0 * mu * mu * d * kappa * kappa + 1.0) * noise_inf_bound
}

/// Alternating hard-thresholding recovery.
///
/// Starting from `L_0 = 0`, each iteration thresholds the sparse residual
/// entry-wise at `zeta_t`, projects the feature-space residual to rank `r`,
/// and maps back: `S_t = P_zeta(M - L_{t-1})`,
/// `W_t = P_r(pinv(F1^T) (M - S_t) pinv(F2))`, `L_t = F1^T W_t F2`.
///
/// Identical inputs and config produce identical traces (up to wall-time
/// columns).
pub fn irpca_iht(
    m: &Matrix,
    fp: &FeaturePair,
    cfg: &SolverConfig,
    truth: Option<TraceTruth<'_>>,
) -> Result<SolveResult, Error> {
    cfg.validate()?;
    if m.rows() != fp.n1() || m.cols() != fp.n2() {
        return Err(Error::dims(
            "irpca_iht input",
            (fp.n1(), fp.n2()),
            (m.rows(), m.cols()),
        ));
    }
    let d_min = fp.d1().min(fp.d2());
    if cfg.rank > d_min {
        return Err(Error::param(
            "rank",
            format!("must be at most min(d1, d2) = {d_min}, got {}", cfg.rank),
        ));
    }
    if let Some(t) = &truth {
        if t.l_star.rows() != m.rows() || t.l_star.cols() != m.cols() {
            return Err(Error::dims(
                "ground-truth L*",
                (m.rows(), m.cols()),
                (t.l_star.rows(), t.l_star.cols()),
            ));
        }
        if t.s_star.rows() != m.rows() || t.s_star.cols() != m.cols() {
            return Err(Error::dims(
                "ground-truth S*",
                (m.rows(), m.cols()),
                (t.s_star.rows(), t.s_star.cols()),
            ));
        }
    }

    let f1t = fp.f1().transpose();
    let m_norm = m.frob_norm();
    let mut l_t = Matrix::zeros(m.rows(), m.cols());
    let mut s_t = Matrix::zeros(m.rows(), m.cols());
    let mut w_t = Matrix::zeros(fp.d1(), fp.d2());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;

    for t in 1..=cfg.max_iters {
        let started = Instant::now();
        let zeta_t = zeta(t, fp, cfg);
        s_t = m.sub(&l_t).entry_threshold(zeta_t);
        let projected = fp.pinv_f1t().matmul(&m.sub(&s_t)).matmul(fp.pinv_f2());
        w_t = projected.rank_project(cfg.rank)?;
        l_t = f1t.matmul(&w_t).matmul(fp.f2());
        let residual = relative_residual(m, &l_t, &s_t, m_norm);
        let wall_time = started.elapsed().as_secs_f64();

        let (err_l_inf, err_s_inf, support_false_positives) = match &truth {
            Some(gt) => {
                let err_l = gt.l_star.sub(&l_t).inf_norm();
                let err_s = gt.s_star.sub(&s_t).inf_norm();
                let fp_count = count_false_positives(&s_t, gt.s_star);
                (Some(err_l), Some(err_s), Some(fp_count))
            }
            None => (None, None, None),
        };

        trace.push(IterationRecord {
            t,
            zeta: zeta_t,
            residual,
            err_l_inf,
            err_s_inf,
            support_false_positives,
            wall_time,
        });
        iterations_run = t;

        match cfg.stop_rule {
            StopRule::Fixed => {}
            StopRule::Residual => {
                if residual <= cfg.residual_tol {
                    converged = true;
                    break;
                }
            }
        }
    }
    if cfg.stop_rule == StopRule::Fixed {
        converged = true;
    }

    Ok(SolveResult {
        w_hat: w_t,
        s_hat: s_t,
        l_hat: l_t,
        trace,
        iterations_run,
        converged,
    })
}

/// Transductive (feature-free) solve: identity features, so the latent
/// matrix is the low-rank component itself.
pub fn transductive_solve(
    m: &Matrix,
    cfg: &SolverConfig,
    truth: Option<TraceTruth<'_>>,
) -> Result<SolveResult, Error> {
    let fp = FeaturePair::prepare(Matrix::identity(m.rows()), Matrix::identity(m.cols()))?;
    irpca_iht(m, &fp, cfg, truth)
}

/// Solve an asymmetric problem through its symmetric embedding: embed `M`
/// and the features block-diagonally, run the iteration at rank `2r`, and
/// extract the upper-right blocks of the estimates.
///
/// Direct execution on the asymmetric input is the default path; this
/// variant exists as a cross-check oracle for it.
pub fn solve_asymmetric_via_embedding(
    m: &Matrix,
    fp: &FeaturePair,
    cfg: &SolverConfig,
) -> Result<SolveResult, Error> {
    cfg.validate()?;
    if m.rows() != fp.n1() || m.cols() != fp.n2() {
        return Err(Error::dims(
            "solve_asymmetric_via_embedding input",
            (fp.n1(), fp.n2()),
            (m.rows(), m.cols()),
        ));
    }
    let m_embedded = m.sym_embed();
    let fp_embedded = fp.embedded()?;
    let mut cfg_embedded = cfg.clone();
    cfg_embedded.rank = 2 * cfg.rank;
    let result = irpca_iht(&m_embedded, &fp_embedded, &cfg_embedded, None)?;

    let (d1, d2) = (fp.d1(), fp.d2());
    let (n1, n2) = (fp.n1(), fp.n2());
    let w_hat = result.w_hat.submatrix(0, d1, d1, d1 + d2);
    let s_hat = result.s_hat.submatrix(0, n1, n1, n1 + n2);
    let l_hat = fp.f1().transpose().matmul(&w_hat).matmul(fp.f2());
    Ok(SolveResult {
        w_hat,
        s_hat,
        l_hat,
        trace: result.trace,
        iterations_run: result.iterations_run,
        converged: result.converged,
    })
}

fn relative_residual(m: &Matrix, l: &Matrix, s: &Matrix, m_norm: f64) -> f64 {
    let resid = m.sub(l).sub(s).frob_norm();
    if m_norm > 0.0 {
        resid / m_norm
    } else {
        resid
    }
}

fn count_false_positives(s_t: &Matrix, s_star: &Matrix) -> usize {
    s_t.entries()
        .iter()
        .zip(s_star.entries())
        .filter(|(&est, &truth)| est != 0.0 && truth == 0.0)
        .count()
}
