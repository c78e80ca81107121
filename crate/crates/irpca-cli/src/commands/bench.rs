//! `irpca bench`: sweep one problem axis, run seeded solves per grid point,
//! and emit per-point statistics as CSV. Cells may run on parallel workers;
//! each worker writes to its own temp file and the rows are merged
//! deterministically at the end. Timing-sensitive sweeps should stay at
//! `--threads 1`.

use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::Args;
use serde::{Deserialize, Serialize};

use irpca::eval::recovery_metrics;
use irpca::solver::{irpca_iht, SolverConfig, StopRule};
use irpca::synth::{self, SynthSpec};

use super::{ensure_out_dir, CliError, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    R,
    D,
    Kappa,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Axis to sweep; the other parameters stay fixed.
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    /// Comma-separated grid values for the chosen axis.
    #[arg(long)]
    pub values: Option<String>,
    /// Runs per grid point.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with a full sweep config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for the grid (keep 1 when timing matters).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_seeds() -> usize {
    5
}
fn default_n() -> usize {
    400
}
fn default_d() -> usize {
    8
}
fn default_rank() -> usize {
    3
}
fn default_z() -> f64 {
    5.0
}
fn default_kappa() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    1e-6
}
fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone)]
struct RunRow {
    cell: usize,
    run: usize,
    value: f64,
    seed: u64,
    wall_time: f64,
    err_l_inf: f64,
    err_s_rel: f64,
    converged: bool,
}

pub fn run(args: BenchArgs) -> Result<Outcome, CliError> {
    let mut cfg: BenchConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::context(&path.display().to_string(), e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::context(&path.display().to_string(), e))?
        }
        None => {
            let axis = args
                .axis
                .ok_or_else(|| CliError::new("--axis is required without --config"))?;
            let values = args
                .values
                .as_deref()
                .ok_or_else(|| CliError::new("--values is required without --config"))?;
            BenchConfig {
                axis,
                values: parse_values(values)?,
                seeds: default_seeds(),
                n: default_n(),
                d: default_d(),
                rank: default_rank(),
                z: default_z(),
                kappa: default_kappa(),
                eps: default_eps(),
                base_seed: 0,
                threads: default_threads(),
            }
        }
    };
    if let Some(axis) = args.axis {
        cfg.axis = axis;
    }
    if let Some(values) = args.values.as_deref() {
        cfg.values = parse_values(values)?;
    }
    if let Some(v) = args.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.rank {
        cfg.rank = v;
    }
    if let Some(v) = args.z {
        cfg.z = v;
    }
    if let Some(v) = args.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = args.eps {
        cfg.eps = v;
    }
    if cfg.values.is_empty() {
        return Err(CliError::new("empty sweep grid"));
    }
    if cfg.seeds == 0 {
        return Err(CliError::new("--seeds must be at least 1"));
    }
    let threads = cfg.threads.max(1);

    ensure_out_dir(&args.out)?;

    // Work units: (cell, run), claimed by index from a shared counter.
    let units: Vec<(usize, usize)> = (0..cfg.values.len())
        .flat_map(|cell| (0..cfg.seeds).map(move |run| (cell, run)))
        .collect();
    let next = AtomicUsize::new(0);
    let worker_files: Vec<PathBuf> = (0..threads)
        .map(|w| args.out.join(format!("bench_worker_{w}.tmp")))
        .collect();

    std::thread::scope(|scope| -> Result<(), CliError> {
        let mut handles = Vec::new();
        for file in &worker_files {
            let cfg = &cfg;
            let units = &units;
            let next = &next;
            handles.push(scope.spawn(move || -> Result<(), String> {
                let mut out = std::io::BufWriter::new(
                    std::fs::File::create(file).map_err(|e| e.to_string())?,
                );
                loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= units.len() {
                        break;
                    }
                    let (cell, run) = units[idx];
                    let row = run_cell(cfg, cell, run).map_err(|e| e.0)?;
                    writeln!(
                        out,
                        "{},{},{},{},{:.9e},{:.16e},{:.16e},{}",
                        row.cell,
                        row.run,
                        row.value,
                        row.seed,
                        row.wall_time,
                        row.err_l_inf,
                        row.err_s_rel,
                        row.converged
                    )
                    .map_err(|e| e.to_string())?;
                }
                out.flush().map_err(|e| e.to_string())
            }));
        }
        for handle in handles {
            handle
                .join()
                .map_err(|_| CliError::new("bench worker panicked"))?
                .map_err(CliError::new)?;
        }
        Ok(())
    })?;

    // Merge worker files into the run-level CSV, ordered by (cell, run).
    let mut rows: Vec<RunRow> = Vec::with_capacity(units.len());
    for file in &worker_files {
        let text = std::fs::read_to_string(file)
            .map_err(|e| CliError::context(&file.display().to_string(), e))?;
        for line in text.lines() {
            rows.push(parse_row(line)?);
        }
        std::fs::remove_file(file).ok();
    }
    rows.sort_by_key(|r| (r.cell, r.run));

    let runs_path = args.out.join("bench_runs.csv");
    {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(&runs_path)
                .map_err(|e| CliError::context(&runs_path.display().to_string(), e))?,
        );
        writeln!(
            out,
            "cell,run,value,seed,wall_time_s,err_l_inf,err_s_rel,converged"
        )
        .map_err(CliError::new)?;
        for row in &rows {
            writeln!(
                out,
                "{},{},{},{},{:.9e},{:.16e},{:.16e},{}",
                row.cell,
                row.run,
                row.value,
                row.seed,
                row.wall_time,
                row.err_l_inf,
                row.err_s_rel,
                row.converged
            )
            .map_err(CliError::new)?;
        }
        out.flush().map_err(CliError::new)?;
    }

    // Aggregate per cell.
    let agg_path = args.out.join("bench.csv");
    {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(&agg_path)
                .map_err(|e| CliError::context(&agg_path.display().to_string(), e))?,
        );
        writeln!(
            out,
            "axis,value,runs,wall_time_mean_s,wall_time_std_s,err_l_inf_mean,err_l_inf_std,err_s_rel_mean,err_s_rel_std"
        )
        .map_err(CliError::new)?;
        for (cell, &value) in cfg.values.iter().enumerate() {
            let cell_rows: Vec<&RunRow> = rows.iter().filter(|r| r.cell == cell).collect();
            let (t_mean, t_std) = mean_std(cell_rows.iter().map(|r| r.wall_time));
            let (l_mean, l_std) = mean_std(cell_rows.iter().map(|r| r.err_l_inf));
            let (s_mean, s_std) = mean_std(cell_rows.iter().map(|r| r.err_s_rel));
            writeln!(
                out,
                "{:?},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                cfg.axis,
                value,
                cell_rows.len(),
                t_mean,
                t_std,
                l_mean,
                l_std,
                s_mean,
                s_std
            )
            .map_err(CliError::new)?;
        }
        out.flush().map_err(CliError::new)?;
    }

    let manifest_path = args.out.join("bench_manifest.json");
    let text = serde_json::to_string_pretty(&cfg).map_err(CliError::new)?;
    std::fs::write(&manifest_path, text + "\n")
        .map_err(|e| CliError::context(&manifest_path.display().to_string(), e))?;

    println!(
        "bench: {} cells x {} seeds -> {} and {}",
        cfg.values.len(),
        cfg.seeds,
        agg_path.display(),
        runs_path.display()
    );
    Ok(Outcome::Success)
}

/// One seeded run of one grid cell: generate, solve, measure.
fn run_cell(cfg: &BenchConfig, cell: usize, run: usize) -> Result<RunRow, CliError> {
    let value = cfg.values[cell];
    let (mut n, mut d, mut rank, mut z, mut kappa) = (cfg.n, cfg.d, cfg.rank, cfg.z, cfg.kappa);
    match cfg.axis {
        Axis::Z => z = value,
        Axis::R => rank = as_dim(value, "r")?,
        Axis::D => d = as_dim(value, "d")?,
        Axis::Kappa => kappa = value,
    }
    let _ = &mut n;
    if rank > d {
        return Err(CliError::new(format!(
            "grid point r={rank}, d={d}: rank exceeds the feature dimension"
        )));
    }
    let seed = synth::derive_seed(cfg.base_seed, cell as u64, run as u64);
    let (lo, hi) = SynthSpec::default_magnitude_band(rank, n);
    let spec = SynthSpec {
        n1: n,
        n2: n,
        d1: d,
        d2: d,
        r: rank,
        z,
        magnitude_low: lo,
        magnitude_high: hi,
        kappa_target: kappa,
        noise_inf_bound: 0.0,
        c_w: 1.0,
        seed,
    };
    let instance = synth::assemble(&spec).map_err(CliError::new)?;
    let truth = instance.truth.as_ref().expect("assemble returns ground truth");

    let mut solver_cfg = SolverConfig::new(rank);
    solver_cfg.c_w = truth.c_w;
    solver_cfg.epsilon = cfg.eps;
    solver_cfg.stop_rule = StopRule::Residual;
    solver_cfg.residual_tol = 1e-3;
    solver_cfg.max_iters = 100;
    let result = irpca_iht(&instance.m, &instance.fp, &solver_cfg, None).map_err(CliError::new)?;
    let metrics = recovery_metrics(&result, &instance).map_err(CliError::new)?;

    Ok(RunRow {
        cell,
        run,
        value,
        seed,
        wall_time: metrics.wall_time_total,
        err_l_inf: metrics.err_l_inf,
        err_s_rel: metrics.err_s_frob_rel,
        converged: result.converged,
    })
}

fn as_dim(value: f64, name: &str) -> Result<usize, CliError> {
    if value.fract() != 0.0 || value < 1.0 || value > 1e9 {
        return Err(CliError::new(format!(
            "axis {name} requires positive integers, got {value}"
        )));
    }
    Ok(value as usize)
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::new(format!("cannot parse grid value `{s}`")))
        })
        .collect()
}

fn parse_row(line: &str) -> Result<RunRow, CliError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(CliError::new(format!("malformed worker row: {line}")));
    }
    let parse = |idx: usize| -> Result<f64, CliError> {
        fields[idx]
            .parse()
            .map_err(|_| CliError::new(format!("malformed worker row: {line}")))
    };
    Ok(RunRow {
        cell: parse(0)? as usize,
        run: parse(1)? as usize,
        value: parse(2)?,
        seed: parse(3)? as u64,
        wall_time: parse(4)?,
        err_l_inf: parse(5)?,
        err_s_rel: parse(6)?,
        converged: fields[7] == "true",
    })
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}
