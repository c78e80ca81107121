//! `irpca synth`: generate one instance and write every matrix plus a
//! manifest that makes the run reproducible.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use irpca::io;
use irpca::synth::{self, SynthSpec};

use super::{ensure_out_dir, CliError, Outcome};

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory for matrices and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with a full generation spec; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Corruption level: Bernoulli(z / max(n1, n2)) support per entry.
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub mag_low: Option<f64>,
    #[arg(long)]
    pub mag_high: Option<f64>,
    #[arg(long)]
    pub noise_bound: Option<f64>,
    #[arg(long)]
    pub cw: Option<f64>,
}

#[derive(Serialize)]
struct Manifest {
    spec: SynthSpec,
    realized_z1: usize,
    realized_z2: usize,
    mu_f1: f64,
    mu_f2: f64,
    kappa: f64,
    files: Vec<String>,
}

fn default_spec() -> SynthSpec {
    let (n, r) = (1000, 5);
    let (lo, hi) = SynthSpec::default_magnitude_band(r, n);
    SynthSpec {
        n1: n,
        n2: n,
        d1: 25,
        d2: 25,
        r,
        z: 20.0,
        magnitude_low: lo,
        magnitude_high: hi,
        kappa_target: 1.0,
        noise_inf_bound: 0.0,
        c_w: 1.0,
        seed: 0,
    }
}

pub fn run(args: SynthArgs) -> Result<Outcome, CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::context(&path.display().to_string(), e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::context(&path.display().to_string(), e))?
        }
        None => default_spec(),
    };
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.n1 {
        spec.n1 = v;
    }
    if let Some(v) = args.n2 {
        spec.n2 = v;
    }
    if let Some(v) = args.d1 {
        spec.d1 = v;
    }
    if let Some(v) = args.d2 {
        spec.d2 = v;
    }
    if let Some(v) = args.rank {
        spec.r = v;
        // Keep the default band in step with an overridden rank unless the
        // caller pinned the band explicitly.
        if args.mag_low.is_none() && args.mag_high.is_none() {
            let (lo, hi) = SynthSpec::default_magnitude_band(spec.r, spec.n1.max(spec.n2));
            spec.magnitude_low = lo;
            spec.magnitude_high = hi;
        }
    }
    if let Some(v) = args.z {
        spec.z = v;
    }
    if let Some(v) = args.kappa {
        spec.kappa_target = v;
    }
    if let Some(v) = args.mag_low {
        spec.magnitude_low = v;
    }
    if let Some(v) = args.mag_high {
        spec.magnitude_high = v;
    }
    if let Some(v) = args.noise_bound {
        spec.noise_inf_bound = v;
    }
    if let Some(v) = args.cw {
        spec.c_w = v;
    }
    spec.validate().map_err(CliError::new)?;

    let instance = synth::assemble(&spec).map_err(CliError::new)?;
    let truth = instance.truth.as_ref().expect("assemble returns ground truth");
    ensure_out_dir(&args.out)?;

    let files = [
        ("m.bin", &instance.m),
        ("f1.bin", instance.fp.f1()),
        ("f2.bin", instance.fp.f2()),
        ("w_star.bin", &truth.w_star),
        ("l_star.bin", &truth.l_star),
        ("s_star.bin", &truth.s_star),
        ("n_star.bin", &truth.n_star),
    ];
    for (name, matrix) in &files {
        io::write_matrix_bin(matrix, &args.out.join(name))
            .map_err(|e| CliError::context(name, e))?;
    }

    let (z1, z2) = truth.s_star.row_col_sparsity();
    let manifest = Manifest {
        spec,
        realized_z1: z1,
        realized_z2: z2,
        mu_f1: instance.fp.mu_f1(),
        mu_f2: instance.fp.mu_f2(),
        kappa: instance.fp.kappa(),
        files: files.iter().map(|(n, _)| n.to_string()).collect(),
    };
    let manifest_path = args.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(CliError::new)?;
    std::fs::write(&manifest_path, text + "\n")
        .map_err(|e| CliError::context(&manifest_path.display().to_string(), e))?;

    println!(
        "synth: wrote {} matrices and manifest.json to {}",
        files.len(),
        args.out.display()
    );
    Ok(Outcome::Success)
}
