//! Subcommand implementations.

use std::fmt::Display;
use std::path::Path;

use irpca::matrix::Matrix;

pub mod bench;
pub mod check;
pub mod eval_cmd;
pub mod solve;
pub mod synth_cmd;

/// Flattened error: every failure reaching `main` maps to exit code 1.
#[derive(Debug)]
pub struct CliError(pub String);

impl CliError {
    pub fn new(msg: impl Display) -> Self {
        CliError(msg.to_string())
    }

    pub fn context(what: &str, err: impl Display) -> Self {
        CliError(format!("{what}: {err}"))
    }
}

pub enum Outcome {
    Success,
    /// The solver ran out of iterations under the residual stop rule.
    BudgetExhausted,
}

/// Read a matrix, dispatching on the file extension: `.csv` uses the text
/// format, anything else the binary format.
pub fn read_matrix_auto(path: &Path) -> Result<Matrix, CliError> {
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    let loaded = if is_csv {
        irpca::io::read_matrix_csv(path)
    } else {
        irpca::io::read_matrix_bin(path)
    };
    loaded.map_err(|e| CliError::context(&path.display().to_string(), e))
}

pub fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::context(&path.display().to_string(), e))
}
