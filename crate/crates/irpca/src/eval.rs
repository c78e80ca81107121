//! Identifiability checks for a generated instance and recovery metrics for
//! solver outputs against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::solver::SolveResult;
use crate::synth::ProblemInstance;

/// Quantified verdicts on the identifiability conditions: feasibility of the
/// low-rank component, feature incoherence, the sparsity bounds
/// `z1 <= n1 / (20 mu^2 d1 kappa)` and `z2 <= n2 / (20 mu^2 d2 kappa)`, the
/// latent spectral-norm bound, and the noise bound `1 / (40 mu^2 d kappa^2)`.
///
/// The constants are taken literally from the bounds even where they are
/// known to be conservative in practice; the report flags, never blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub feasibility_residual: f64,
    pub mu_f1: f64,
    pub mu_f2: f64,
    /// `max(mu_F1, mu_F2)`.
    pub mu: f64,
    /// Max of the two feature condition numbers.
    pub kappa: f64,
    pub z1_observed: usize,
    pub z2_observed: usize,
    pub z1_bound: f64,
    pub z2_bound: f64,
    pub sparsity_ok: bool,
    /// Observed spectral norm of the latent matrix.
    pub w_norm: f64,
    pub c_w: f64,
    pub latent_ok: bool,
    /// Observed numerical rank of the latent matrix; informational.
    pub rank_w_star: usize,
    pub rank_ok: bool,
    pub noise_inf: f64,
    pub noise_bound: f64,
    pub noise_ok: bool,
    /// Conjunction of feasibility (residual <= 1e-8), sparsity, latent-norm,
    /// and noise verdicts.
    pub overall_ok: bool,
}

/// Recovery errors and support statistics for a solve against ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub err_l_inf: f64,
    /// `||L* - L_hat||_F / ||L*||_F` (absolute when `L* = 0`).
    pub err_l_frob_rel: f64,
    pub err_s_inf: f64,
    /// `||S_hat - S*||_F / ||S*||_F` (absolute when `S* = 0`).
    pub err_s_frob_rel: f64,
    /// Fraction of predicted support inside the true support; 1 when the
    /// prediction is empty.
    pub support_precision: f64,
    /// Fraction of true support recovered; 1 when the true support is empty.
    pub support_recall: f64,
    /// `||M - L_hat - S_hat||_F / ||M||_F`.
    pub residual_rel: f64,
    pub wall_time_total: f64,
    pub iterations: usize,
}

/// Populate an [`AssumptionReport`] by direct computation on the instance's
/// ground truth.
pub fn check_assumptions(
    instance: &ProblemInstance,
    r: usize,
    c_w: f64,
) -> Result<AssumptionReport, Error> {
    let truth = instance
        .truth
        .as_ref()
        .ok_or(Error::MissingGroundTruth {
            context: "check_assumptions",
        })?;
    let fp = &instance.fp;
    let mu = fp.mu();
    let kappa = fp.kappa();
    let feasibility_residual = fp.feasibility_residual(&truth.l_star)?;

    let (z1_observed, z2_observed) = truth.s_star.row_col_sparsity();
    let z1_bound = fp.n1() as f64 / (20.0 * mu * mu * fp.d1() as f64 * kappa);
    let z2_bound = fp.n2() as f64 / (20.0 * mu * mu * fp.d2() as f64 * kappa);
    let sparsity_ok = (z1_observed as f64) <= z1_bound && (z2_observed as f64) <= z2_bound;

    let w_factors = truth.w_star.svd()?;
    let w_norm = w_factors.sigma_max();
    let latent_ok = w_norm <= c_w * (1.0 + 1e-9);
    let rank_w_star = w_factors.rank();
    let rank_ok = rank_w_star <= r;

    let noise_inf = truth.n_star.inf_norm();
    let d = fp.d_max() as f64;
    let noise_bound = 1.0 / (40.0 * mu * mu * d * kappa * kappa);
    let noise_ok = noise_inf == 0.0 || noise_inf <= noise_bound;

    let overall_ok = feasibility_residual <= 1e-8 && sparsity_ok && latent_ok && noise_ok;

    Ok(AssumptionReport {
        feasibility_residual,
        mu_f1: fp.mu_f1(),
        mu_f2: fp.mu_f2(),
        mu,
        kappa,
        z1_observed,
        z2_observed,
        z1_bound,
        z2_bound,
        sparsity_ok,
        w_norm,
        c_w,
        latent_ok,
        rank_w_star,
        rank_ok,
        noise_inf,
        noise_bound,
        noise_ok,
        overall_ok,
    })
}

/// Compute recovery metrics for a solve result against the instance's ground
/// truth. Supports are compared with exact-zero semantics: thresholding
/// emits exact zeros, and the synthetic ground truth stores them exactly.
pub fn recovery_metrics(result: &SolveResult, instance: &ProblemInstance) -> Result<Metrics, Error> {
    let truth = instance
        .truth
        .as_ref()
        .ok_or(Error::MissingGroundTruth {
            context: "recovery_metrics",
        })?;
    if result.l_hat.rows() != instance.m.rows() || result.l_hat.cols() != instance.m.cols() {
        return Err(Error::dims(
            "recovery_metrics",
            (instance.m.rows(), instance.m.cols()),
            (result.l_hat.rows(), result.l_hat.cols()),
        ));
    }

    let err_l = truth.l_star.sub(&result.l_hat);
    let err_s = truth.s_star.sub(&result.s_hat);
    let err_l_frob_rel = relative(err_l.frob_norm(), truth.l_star.frob_norm());
    let err_s_frob_rel = relative(err_s.frob_norm(), truth.s_star.frob_norm());

    let (mut hits, mut predicted, mut actual) = (0usize, 0usize, 0usize);
    for (&est, &tru) in result.s_hat.entries().iter().zip(truth.s_star.entries()) {
        let p = est != 0.0;
        let a = tru != 0.0;
        predicted += p as usize;
        actual += a as usize;
        hits += (p && a) as usize;
    }
    let support_precision = if predicted == 0 {
        1.0
    } else {
        hits as f64 / predicted as f64
    };
    let support_recall = if actual == 0 {
        1.0
    } else {
        hits as f64 / actual as f64
    };

    let m_norm = instance.m.frob_norm();
    let residual = instance.m.sub(&result.l_hat).sub(&result.s_hat).frob_norm();

    Ok(Metrics {
        err_l_inf: err_l.inf_norm(),
        err_l_frob_rel,
        err_s_inf: err_s.inf_norm(),
        err_s_frob_rel,
        support_precision,
        support_recall,
        residual_rel: relative(residual, m_norm),
        wall_time_total: result.trace.iter().map(|r| r.wall_time).sum(),
        iterations: result.iterations_run,
    })
}

fn relative(num: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        num / denom
    } else {
        num
    }
}
