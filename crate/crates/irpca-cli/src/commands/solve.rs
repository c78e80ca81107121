//! `irpca solve`: run the recovery on an observed matrix, writing estimates,
//! the iteration trace, and a structured result document.

use std::path::PathBuf;

use clap::Args;

use irpca::eval::{check_assumptions, recovery_metrics};
use irpca::features::FeaturePair;
use irpca::io::{self, Dims, ResultDocument, TraceSummary, SCHEMA_VERSION};
use irpca::matrix::Matrix;
use irpca::solver::{irpca_iht, SolverConfig, StopRule, TraceTruth};
use irpca::synth::{GroundTruth, ProblemInstance};

use super::{ensure_out_dir, read_matrix_auto, CliError, Outcome};

#[derive(Args)]
pub struct SolveArgs {
    /// Observed matrix (.bin or .csv).
    #[arg(long)]
    pub m: PathBuf,
    /// Feature matrix F1 (d1 x n1). Omit both feature flags for the
    /// transductive mode.
    #[arg(long, requires = "f2")]
    pub f1: Option<PathBuf>,
    /// Feature matrix F2 (d2 x n2).
    #[arg(long, requires = "f1")]
    pub f2: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with a solver config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub cw: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop rule: "fixed" runs max-iters iterations, "residual" stops at
    /// --residual-tol.
    #[arg(long, value_parser = parse_stop_rule)]
    pub stop: Option<StopRule>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
    /// Ground-truth low-rank component; fills the trace error columns.
    #[arg(long, requires = "truth_s")]
    pub truth_l: Option<PathBuf>,
    /// Ground-truth sparse component.
    #[arg(long, requires = "truth_l")]
    pub truth_s: Option<PathBuf>,
    /// Recorded in the result document for provenance.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_stop_rule(s: &str) -> Result<StopRule, String> {
    match s {
        "fixed" => Ok(StopRule::Fixed),
        "residual" => Ok(StopRule::Residual),
        other => Err(format!("unknown stop rule `{other}` (expected fixed|residual)")),
    }
}

pub fn run(args: SolveArgs) -> Result<Outcome, CliError> {
    let m = read_matrix_auto(&args.m)?;
    let mut cfg: SolverConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::context(&path.display().to_string(), e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::context(&path.display().to_string(), e))?
        }
        None => SolverConfig::new(1),
    };
    if let Some(v) = args.rank {
        cfg.rank = v;
    }
    if let Some(v) = args.nu {
        cfg.nu = v;
    }
    if let Some(v) = args.cw {
        cfg.c_w = v;
    }
    if let Some(v) = args.eps {
        cfg.epsilon = v;
    }
    if let Some(v) = args.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = args.stop {
        cfg.stop_rule = v;
    }
    if let Some(v) = args.residual_tol {
        cfg.residual_tol = v;
    }
    cfg.validate().map_err(CliError::new)?;

    let (fp, mode) = match (&args.f1, &args.f2) {
        (Some(f1_path), Some(f2_path)) => {
            let f1 = read_matrix_auto(f1_path)?;
            let f2 = read_matrix_auto(f2_path)?;
            let fp = FeaturePair::prepare(f1, f2).map_err(CliError::new)?;
            (fp, "inductive")
        }
        _ => {
            let fp = FeaturePair::prepare(Matrix::identity(m.rows()), Matrix::identity(m.cols()))
                .map_err(CliError::new)?;
            (fp, "transductive")
        }
    };
    // Validate before any heavy compute.
    let d_min = fp.d1().min(fp.d2());
    if cfg.rank > d_min {
        return Err(CliError::new(format!(
            "rank {} exceeds min(d1, d2) = {d_min}",
            cfg.rank
        )));
    }
    if m.rows() != fp.n1() || m.cols() != fp.n2() {
        return Err(CliError::new(format!(
            "observed matrix is {}x{} but features expect {}x{}",
            m.rows(),
            m.cols(),
            fp.n1(),
            fp.n2()
        )));
    }

    let truth_matrices = match (&args.truth_l, &args.truth_s) {
        (Some(l_path), Some(s_path)) => {
            Some((read_matrix_auto(l_path)?, read_matrix_auto(s_path)?))
        }
        _ => None,
    };
    let truth = truth_matrices.as_ref().map(|(l, s)| TraceTruth {
        l_star: l,
        s_star: s,
    });

    let result = irpca_iht(&m, &fp, &cfg, truth).map_err(CliError::new)?;

    // With ground truth on hand, reconstruct the instance and embed metrics
    // and the assumption report: the latent truth is the feature-space
    // representation of L*, the noise is whatever remains of M.
    let (metrics, assumptions) = match &truth_matrices {
        Some((l_star, s_star)) => {
            let w_star = fp.pinv_f1t().matmul(l_star).matmul(fp.pinv_f2());
            let n_star = m.sub(l_star).sub(s_star);
            let instance = ProblemInstance {
                m: m.clone(),
                fp: fp.clone(),
                truth: Some(GroundTruth {
                    w_star,
                    l_star: l_star.clone(),
                    s_star: s_star.clone(),
                    n_star,
                    c_w: cfg.c_w,
                }),
            };
            let metrics = recovery_metrics(&result, &instance).map_err(CliError::new)?;
            let report = check_assumptions(&instance, cfg.rank, cfg.c_w).map_err(CliError::new)?;
            (Some(metrics), Some(report))
        }
        None => (None, None),
    };

    ensure_out_dir(&args.out)?;
    io::write_matrix_bin(&result.w_hat, &args.out.join("w_hat.bin"))
        .map_err(|e| CliError::context("w_hat.bin", e))?;
    io::write_matrix_bin(&result.s_hat, &args.out.join("s_hat.bin"))
        .map_err(|e| CliError::context("s_hat.bin", e))?;
    io::write_matrix_bin(&result.l_hat, &args.out.join("l_hat.bin"))
        .map_err(|e| CliError::context("l_hat.bin", e))?;
    io::write_trace_csv(&result.trace, &args.out.join("trace.csv"))
        .map_err(|e| CliError::context("trace.csv", e))?;

    let doc = ResultDocument {
        schema_version: SCHEMA_VERSION,
        mode: mode.to_string(),
        config: cfg,
        dims: Dims {
            n1: fp.n1(),
            n2: fp.n2(),
            d1: fp.d1(),
            d2: fp.d2(),
        },
        seed: args.seed,
        converged: result.converged,
        iterations_run: result.iterations_run,
        metrics,
        assumptions,
        trace_summary: TraceSummary::from_trace(&result.trace),
    };
    io::write_result_json(&doc, &args.out.join("result.json"))
        .map_err(|e| CliError::context("result.json", e))?;

    println!(
        "solve: {} mode, {} iterations, residual {:.3e}, converged: {}",
        mode,
        result.iterations_run,
        doc.trace_summary.final_residual,
        result.converged
    );
    if result.converged {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::BudgetExhausted)
    }
}
