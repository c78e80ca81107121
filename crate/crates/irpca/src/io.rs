//! Serialization: matrices as CSV (value-exact at 17 significant digits) or
//! a versioned little-endian binary format (bit-exact round trips), ratings
//! ingestion, iteration-trace CSVs, and structured result JSON.
//!
//! Readers reject malformed input rather than repairing it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{AssumptionReport, Metrics};
use crate::matrix::{Matrix, MatrixError};
use crate::solver::{IterationRecord, SolverConfig};

const MAGIC: &[u8; 4] = b"IRPM";
const BIN_VERSION: u32 = 1;

/// Current version of the result-JSON schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("empty input")]
    EmptyInput,
    #[error("line {line}: expected {expected} fields, got {got}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: cannot parse `{value}`")]
    Parse { line: usize, value: String },
    #[error("bad magic bytes (expected \"IRPM\")")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("payload length mismatch: expected {expected} bytes, got {got}")]
    PayloadLength { expected: usize, got: usize },
    #[error("line {line}: index ({user}, {item}) outside 1..={n_users} x 1..={n_items}")]
    IndexOutOfRange {
        line: usize,
        user: usize,
        item: usize,
        n_users: usize,
        n_items: usize,
    },
    #[error("line {line}: duplicate rating for (user {user}, item {item})")]
    DuplicateRating { line: usize, user: usize, item: usize },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One row per line, comma-separated, 17 significant digits.
pub fn write_matrix_csv(m: &Matrix, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..m.rows() {
        let mut first = true;
        for &x in m.row(i) {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{x:.16e}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix, IoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    let mut blank_seen = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            blank_seen.get_or_insert(idx + 1);
            continue;
        }
        // Blank lines are tolerated only at the end of the file.
        if let Some(blank_line) = blank_seen {
            return Err(IoError::RaggedRow {
                line: blank_line,
                expected: cols.unwrap_or(0),
                got: 0,
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = *cols.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(IoError::RaggedRow {
                line: idx + 1,
                expected,
                got: fields.len(),
            });
        }
        for field in fields {
            let value: f64 = field.trim().parse().map_err(|_| IoError::Parse {
                line: idx + 1,
                value: field.to_string(),
            })?;
            entries.push(value);
        }
        rows += 1;
    }
    let cols = cols.ok_or(IoError::EmptyInput)?;
    Ok(Matrix::new(rows, cols, entries)?)
}

/// Binary layout: magic `IRPM`, version u32, rows u64, cols u64, then
/// rows x cols f64 values, all little-endian, row-major.
pub fn write_matrix_bin(m: &Matrix, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&BIN_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for &x in m.entries() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_bin(path: &Path) -> Result<Matrix, IoError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(IoError::BadMagic);
        }
        return Err(IoError::PayloadLength {
            expected: 24,
            got: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(IoError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != BIN_VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24))
        .ok_or(IoError::PayloadLength {
            expected: usize::MAX,
            got: bytes.len(),
        })?;
    if bytes.len() != expected {
        return Err(IoError::PayloadLength {
            expected,
            got: bytes.len(),
        });
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for chunk in bytes[24..].chunks_exact(8) {
        entries.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(Matrix::new(rows, cols, entries)?)
}

/// Ratings triples: 1-based user/item indices, no duplicate pairs.
#[derive(Debug, Clone)]
pub struct RatingsTriples {
    pub n_users: usize,
    pub n_items: usize,
    pub triples: Vec<(usize, usize, f64)>,
}

impl RatingsTriples {
    /// Dense ratings matrix plus a 0/1 observation mask; unobserved cells
    /// are zero in both.
    pub fn to_dense(&self) -> (Matrix, Matrix) {
        let mut m = Matrix::zeros(self.n_users, self.n_items);
        let mut mask = Matrix::zeros(self.n_users, self.n_items);
        for &(u, i, r) in &self.triples {
            m.set(u - 1, i - 1, r);
            mask.set(u - 1, i - 1, 1.0);
        }
        (m, mask)
    }
}

/// Parse whitespace-separated `user item rating [extra columns ignored]`
/// lines into validated triples.
pub fn read_ratings_triples(
    path: &Path,
    n_users: usize,
    n_items: usize,
) -> Result<RatingsTriples, IoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut triples = Vec::new();
    let mut seen = vec![false; n_users * n_items];
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(IoError::RaggedRow {
                line: idx + 1,
                expected: 3,
                got: fields.len(),
            });
        }
        let parse_idx = |s: &str| -> Result<usize, IoError> {
            s.parse().map_err(|_| IoError::Parse {
                line: idx + 1,
                value: s.to_string(),
            })
        };
        let user = parse_idx(fields[0])?;
        let item = parse_idx(fields[1])?;
        let rating: f64 = fields[2].parse().map_err(|_| IoError::Parse {
            line: idx + 1,
            value: fields[2].to_string(),
        })?;
        if !rating.is_finite() {
            return Err(IoError::Parse {
                line: idx + 1,
                value: fields[2].to_string(),
            });
        }
        if user == 0 || user > n_users || item == 0 || item > n_items {
            return Err(IoError::IndexOutOfRange {
                line: idx + 1,
                user,
                item,
                n_users,
                n_items,
            });
        }
        let slot = (user - 1) * n_items + (item - 1);
        if seen[slot] {
            return Err(IoError::DuplicateRating {
                line: idx + 1,
                user,
                item,
            });
        }
        seen[slot] = true;
        triples.push((user, item, rating));
    }
    if triples.is_empty() {
        return Err(IoError::EmptyInput);
    }
    Ok(RatingsTriples {
        n_users,
        n_items,
        triples,
    })
}

/// Read ratings straight into a dense matrix and observation mask.
pub fn read_ratings(
    path: &Path,
    n_users: usize,
    n_items: usize,
) -> Result<(Matrix, Matrix), IoError> {
    Ok(read_ratings_triples(path, n_users, n_items)?.to_dense())
}

/// Iteration trace as CSV. Ground-truth columns are written empty when the
/// solve ran without ground truth.
pub fn write_trace_csv(trace: &[IterationRecord], path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "t,zeta_t,residual,err_L_inf,err_S_inf,support_false_positives,wall_time"
    )?;
    for rec in trace {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let fp = rec
            .support_false_positives
            .map(|c| c.to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{:.16e},{:.16e},{},{},{},{:.9e}",
            rec.t,
            rec.zeta,
            rec.residual,
            opt(rec.err_l_inf),
            opt(rec.err_s_inf),
            fp,
            rec.wall_time
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Problem dimensions echoed into result documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub d1: usize,
    pub d2: usize,
}

/// Compact summary of an iteration trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub final_zeta: f64,
    pub final_residual: f64,
    pub wall_time_total: f64,
}

impl TraceSummary {
    pub fn from_trace(trace: &[IterationRecord]) -> Self {
        TraceSummary {
            iterations: trace.len(),
            final_zeta: trace.last().map(|r| r.zeta).unwrap_or(0.0),
            final_residual: trace.last().map(|r| r.residual).unwrap_or(0.0),
            wall_time_total: trace.iter().map(|r| r.wall_time).sum(),
        }
    }
}

/// Structured output of a run: config echo, dimensions, final metrics,
/// assumption report, and trace summary under a versioned schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    /// `"inductive"` or `"transductive"`.
    pub mode: String,
    pub config: SolverConfig,
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub converged: bool,
    pub iterations_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionReport>,
    pub trace_summary: TraceSummary,
}

pub fn write_result_json(doc: &ResultDocument, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_result_json(path: &Path) -> Result<ResultDocument, IoError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::StopRule;
    use proptest::prelude::*;
    use std::fs;
    use tempfile::tempdir;

    fn seeded(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
        Matrix::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = seeded(3, 4, 1);
        write_matrix_csv(&m, &path).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(m, back);
        for (&a, &b) in m.entries().iter().zip(back.entries()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_rejects_empty_and_ragged() {
        let dir = tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        fs::write(&empty, "").unwrap();
        assert!(matches!(read_matrix_csv(&empty), Err(IoError::EmptyInput)));

        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "1.0,2.0\n3.0\n").unwrap();
        match read_matrix_csv(&ragged) {
            Err(IoError::RaggedRow { line: 2, expected: 2, got: 1 }) => {}
            other => panic!("expected ragged-row error, got {other:?}"),
        }

        let garbage = dir.path().join("bad.csv");
        fs::write(&garbage, "1.0,abc\n").unwrap();
        assert!(matches!(read_matrix_csv(&garbage), Err(IoError::Parse { line: 1, .. })));
    }

    #[test]
    fn bin_round_trip_and_corruption() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = seeded(5, 2, 2);
        write_matrix_bin(&m, &path).unwrap();
        let back = read_matrix_bin(&path).unwrap();
        assert_eq!(m, back);

        let bad_magic = dir.path().join("bad.bin");
        fs::write(&bad_magic, b"XXXX\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_matrix_bin(&bad_magic), Err(IoError::BadMagic)));

        // Declared 2x2 with only 3 values present.
        let truncated = dir.path().join("trunc.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        for _ in 0..3 {
            bytes.extend_from_slice(&1.5f64.to_le_bytes());
        }
        fs::write(&truncated, &bytes).unwrap();
        assert!(matches!(
            read_matrix_bin(&truncated),
            Err(IoError::PayloadLength { expected: 56, got: 48 })
        ));

        let wrong_version = dir.path().join("v9.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&9u32.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&0f64.to_le_bytes());
        fs::write(&wrong_version, &bytes).unwrap();
        assert!(matches!(
            read_matrix_bin(&wrong_version),
            Err(IoError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn ratings_ingestion() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ratings.tsv");
        fs::write(&path, "1\t1\t5.0\t881250949\n2 2 3.0\n1 2 4.0\n").unwrap();
        let (m, mask) = read_ratings(&path, 2, 2).unwrap();
        assert_eq!(m.get(0, 0), 5.0);
        assert_eq!(m.get(1, 1), 3.0);
        assert_eq!(m.get(0, 1), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(mask.entries().iter().sum::<f64>(), 3.0);

        let dup = dir.path().join("dup.tsv");
        fs::write(&dup, "1 1 5.0\n1 1 3.0\n").unwrap();
        assert!(matches!(
            read_ratings(&dup, 2, 2),
            Err(IoError::DuplicateRating { line: 2, user: 1, item: 1 })
        ));

        let out_of_range = dir.path().join("oor.tsv");
        fs::write(&out_of_range, "1 0 5.0\n").unwrap();
        assert!(matches!(
            read_ratings(&out_of_range, 2, 2),
            Err(IoError::IndexOutOfRange { item: 0, .. })
        ));
    }

    #[test]
    fn trace_csv_shape() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let rec = |t: usize, with_truth: bool| IterationRecord {
            t,
            zeta: 0.1 / t as f64,
            residual: 1e-3,
            err_l_inf: with_truth.then_some(1e-4),
            err_s_inf: with_truth.then_some(2e-4),
            support_false_positives: with_truth.then_some(0),
            wall_time: 0.01,
        };
        write_trace_csv(&[rec(1, true), rec(2, true), rec(3, true)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,zeta_t,residual,err_L_inf,err_S_inf,support_false_positives,wall_time"));

        write_trace_csv(&[rec(1, false)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        // Error columns present but empty.
        assert_eq!(data_line.split(',').count(), 7);
        assert_eq!(data_line.split(',').nth(3).unwrap(), "");
        assert_eq!(data_line.split(',').nth(5).unwrap(), "");
    }

    #[test]
    fn result_json_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("result.json");
        let doc = ResultDocument {
            schema_version: SCHEMA_VERSION,
            mode: "inductive".into(),
            config: SolverConfig {
                rank: 3,
                nu: 0.0,
                c_w: 1.0,
                max_iters: 25,
                epsilon: 1e-6,
                stop_rule: StopRule::Residual,
                residual_tol: 1e-3,
            },
            dims: Dims { n1: 10, n2: 12, d1: 3, d2: 4 },
            seed: Some(7),
            converged: true,
            iterations_run: 9,
            metrics: None,
            assumptions: None,
            trace_summary: TraceSummary {
                iterations: 9,
                final_zeta: 1e-5,
                final_residual: 9e-4,
                wall_time_total: 0.2,
            },
        };
        write_result_json(&doc, &path).unwrap();
        let back = read_result_json(&path).unwrap();
        assert_eq!(back.schema_version, doc.schema_version);
        assert_eq!(back.mode, doc.mode);
        assert_eq!(back.dims, doc.dims);
        assert_eq!(back.seed, doc.seed);
        assert_eq!(back.converged, doc.converged);
        assert_eq!(back.iterations_run, doc.iterations_run);
        assert_eq!(back.config.rank, doc.config.rank);
        assert_eq!(back.config.stop_rule, doc.config.stop_rule);
        assert_eq!(back.trace_summary.final_residual, doc.trace_summary.final_residual);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_round_trips(seed in 0u64..5000, rows in 1usize..6, cols in 1usize..6) {
            let dir = tempdir().unwrap();
            let m = seeded(rows, cols, seed);
            let bin = dir.path().join("m.bin");
            write_matrix_bin(&m, &bin).unwrap();
            prop_assert_eq!(&read_matrix_bin(&bin).unwrap(), &m);
            let csv = dir.path().join("m.csv");
            write_matrix_csv(&m, &csv).unwrap();
            prop_assert_eq!(&read_matrix_csv(&csv).unwrap(), &m);
        }
    }
}
