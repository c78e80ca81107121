//! Shared test oracles, kept independent of the library's numerical path:
//! singular values come from a two-sided Jacobi eigensolver on the Gram
//! matrix, inverses from Gauss-Jordan elimination.
//!
//! Each test binary compiles its own copy, so not every helper is used by
//! every binary.
#![allow(dead_code)]

use irpca::Matrix;

/// Eigenvalues of a symmetric matrix via cyclic two-sided Jacobi, sorted
/// descending. Input as dense rows.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[p][q].abs());
            }
        }
        let scale = (0..n).map(|i| m[i][i].abs()).fold(0.0_f64, f64::max);
        if off <= 1e-14 * scale.max(1e-300) {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = if theta.abs() > 1e153 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Rotate rows/columns p and q.
                for i in 0..n {
                    let (mip, miq) = (m[i][p], m[i][q]);
                    m[i][p] = c * mip - s * miq;
                    m[i][q] = s * mip + c * miq;
                }
                for j in 0..n {
                    let (mpj, mqj) = (m[p][j], m[q][j]);
                    m[p][j] = c * mpj - s * mqj;
                    m[q][j] = s * mpj + c * mqj;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

/// Squared singular values of `a` (descending): eigenvalues of the smaller
/// Gram matrix, padded with zeros up to `min(rows, cols)`.
pub fn squared_singular_values(a: &Matrix) -> Vec<f64> {
    let (rows, cols) = (a.rows(), a.cols());
    let k = rows.min(cols);
    let gram_small = if cols <= rows {
        gram(a, true)
    } else {
        gram(a, false)
    };
    let mut eig = symmetric_eigenvalues(&gram_small);
    eig.truncate(k);
    // Clamp eigensolver noise below zero.
    eig.iter().map(|&x| x.max(0.0)).collect()
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    squared_singular_values(a).iter().map(|&x| x.sqrt()).collect()
}

fn gram(a: &Matrix, transpose_first: bool) -> Vec<Vec<f64>> {
    let (rows, cols) = (a.rows(), a.cols());
    if transpose_first {
        // A^T A, cols x cols.
        let mut g = vec![vec![0.0; cols]; cols];
        for p in 0..cols {
            for q in 0..cols {
                let mut s = 0.0;
                for i in 0..rows {
                    s += a.get(i, p) * a.get(i, q);
                }
                g[p][q] = s;
            }
        }
        g
    } else {
        // A A^T, rows x rows.
        let mut g = vec![vec![0.0; rows]; rows];
        for p in 0..rows {
            for q in 0..rows {
                let mut s = 0.0;
                for j in 0..cols {
                    s += a.get(p, j) * a.get(q, j);
                }
                g[p][q] = s;
            }
        }
        g
    }
}

/// Gauss-Jordan inverse with partial pivoting; panics on singular input
/// (oracle use only).
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
            .unwrap();
        assert!(aug[pivot][col].abs() > 1e-300, "singular matrix in oracle");
        aug.swap(col, pivot);
        let p = aug[col][col];
        for x in aug[col].iter_mut() {
            *x /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug[row][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..2 * n {
                let v = aug[col][j];
                aug[row][j] -= factor * v;
            }
        }
    }
    aug.into_iter().map(|row| row[n..].to_vec()).collect()
}

/// Normal-equation pseudoinverse oracle: `(A^T A)^-1 A^T` for tall inputs,
/// `A^T (A A^T)^-1` for wide ones.
pub fn normal_equation_pinv(a: &Matrix) -> Matrix {
    let (rows, cols) = (a.rows(), a.cols());
    if rows >= cols {
        let inv = gauss_jordan_inverse(&gram(a, true));
        // inv (cols x cols) * A^T (cols x rows)
        Matrix::from_fn(cols, rows, |i, j| {
            (0..cols).map(|l| inv[i][l] * a.get(j, l)).sum()
        })
    } else {
        let inv = gauss_jordan_inverse(&gram(a, false));
        // A^T (cols x rows) * inv (rows x rows)
        Matrix::from_fn(cols, rows, |i, j| {
            (0..rows).map(|l| a.get(l, i) * inv[l][j]).sum()
        })
    }
}

/// Small deterministic uniform(-1, 1) matrix generator for oracle tests.
pub fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    Matrix::from_fn(rows, cols, |_, _| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    })
}

/// Deterministic pseudo-random size in `lo..=hi` derived from a seed tag.
pub fn size_in(lo: usize, hi: usize, seed: u64, tag: u64) -> usize {
    let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15) ^ tag.rotate_left(21);
    s = (s ^ (s >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    lo + (s as usize) % (hi - lo + 1)
}
