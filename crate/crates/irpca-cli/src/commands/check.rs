//! `irpca check`: rebuild an instance from a synth output directory and emit
//! the assumption report.

use std::path::PathBuf;

use clap::Args;

use irpca::eval::check_assumptions;
use irpca::features::FeaturePair;
use irpca::synth::{GroundTruth, ProblemInstance};

use super::{read_matrix_auto, CliError, Outcome};

#[derive(Args)]
pub struct CheckArgs {
    /// Directory produced by `irpca synth`.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub cw: f64,
    /// Where to write report.json; defaults to the instance directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: CheckArgs) -> Result<Outcome, CliError> {
    let load = |name: &str| read_matrix_auto(&args.dir.join(name));
    let m = load("m.bin")?;
    let f1 = load("f1.bin")?;
    let f2 = load("f2.bin")?;
    let truth = GroundTruth {
        w_star: load("w_star.bin")?,
        l_star: load("l_star.bin")?,
        s_star: load("s_star.bin")?,
        n_star: load("n_star.bin")?,
        c_w: args.cw,
    };
    let fp = FeaturePair::prepare(f1, f2).map_err(CliError::new)?;
    let instance = ProblemInstance {
        m,
        fp,
        truth: Some(truth),
    };
    let report = check_assumptions(&instance, args.rank, args.cw).map_err(CliError::new)?;

    let out_dir = args.out.clone().unwrap_or_else(|| args.dir.clone());
    super::ensure_out_dir(&out_dir)?;
    let path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(CliError::new)?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::context(&path.display().to_string(), e))?;

    println!(
        "check: feasibility {:.3e}, z1 {} (bound {:.3}), z2 {} (bound {:.3}), |W*| {:.3} (c_W {}), noise {:.3e} (bound {:.3e}) -> overall_ok: {}",
        report.feasibility_residual,
        report.z1_observed,
        report.z1_bound,
        report.z2_observed,
        report.z2_bound,
        report.w_norm,
        report.c_w,
        report.noise_inf,
        report.noise_bound,
        report.overall_ok
    );
    Ok(Outcome::Success)
}
