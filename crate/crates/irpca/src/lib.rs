//! Inductive robust PCA via iterative hard thresholding.
//!
//! Given an observed matrix `M = F1^T W* F2 + S* + N*` — a low-rank
//! component expressed through feature matrices `F1`, `F2`, plus sparse
//! corruption `S*` and optional bounded noise `N*` — this crate recovers the
//! latent matrix `W`, the low-rank component `L = F1^T W F2`, and the sparse
//! outliers `S` by alternating entry-wise and spectral hard thresholding on
//! residuals with a geometrically decaying threshold schedule.
//!
//! Modules:
//! - [`matrix`]: dense matrices and the numerical kernels (SVD, projections,
//!   pseudoinverse, norms, symmetric embedding).
//! - [`features`]: feature-pair preparation, incoherence constants, and the
//!   feasibility check.
//! - [`solver`]: the thresholding iteration, threshold schedule, iteration
//!   budget, and the transductive / embedding variants.
//! - [`synth`]: seeded ground-truth problem generation.
//! - [`eval`]: identifiability checks and recovery metrics.
//! - [`io`]: matrix serialization (CSV and a binary format), ratings
//!   ingestion, trace CSVs, and structured result JSON.

pub mod eval;
pub mod features;
pub mod io;
pub mod matrix;
pub mod solver;
pub mod synth;

mod error;
mod svd_kernel;

pub use error::Error;
pub use eval::{AssumptionReport, Metrics};
pub use features::FeaturePair;
pub use matrix::{Matrix, MatrixError, SvdFactors};
pub use solver::{IterationRecord, SolveResult, SolverConfig, StopRule};
pub use synth::{ProblemInstance, SynthSpec};
