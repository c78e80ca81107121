//! One-sided Jacobi SVD with Householder-QR preconditioning.
//!
//! The solver repeatedly factors matrices that are exactly rank deficient
//! (clean iterates are exactly rank r), so the kernel must pair singular
//! vectors correctly in the presence of zero singular values. One-sided
//! Jacobi orthogonalizes the columns of the working matrix directly, which
//! keeps `A V = U Sigma` an identity of the computation itself: the
//! reconstruction is exact up to rotation roundoff for any spectrum.
//!
//! Pipeline for a rows x cols input: work on the tall orientation, factor
//! `B = Q R` by Householder reflections, run Jacobi sweeps on the square
//! `R`, then map the left factor back through `Q`. The preconditioning keeps
//! the Jacobi iteration on a small square matrix and speeds convergence.

/// Relative off-diagonal threshold for the Jacobi sweeps. Column pairs with
/// `|w_p . w_q| <= TOL * ||w_p|| ||w_q||` count as orthogonal, so the left
/// factor's orthonormality defect is bounded by this value.
const JACOBI_TOL: f64 = 1e-13;

const MAX_SWEEPS: usize = 64;

/// Row-major thin factors: `u` is rows x k, `v` is cols x k, singular values
/// sorted nonincreasing, `k = min(rows, cols)`.
pub(crate) struct RawSvd {
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
    pub v: Vec<f64>,
}

/// Factor a row-major rows x cols matrix. On sweep exhaustion the error
/// carries the largest remaining relative off-diagonal correlation.
pub(crate) fn svd(rows: usize, cols: usize, a: &[f64]) -> Result<RawSvd, f64> {
    debug_assert_eq!(a.len(), rows * cols);
    let transposed = rows < cols;
    let (m, n) = if transposed { (cols, rows) } else { (rows, cols) };

    // Column-major tall copy of the input (or its transpose).
    let mut b = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            b[j * m + i] = if transposed {
                a[j * cols + i]
            } else {
                a[i * cols + j]
            };
        }
    }

    let reflectors = householder_qr(&mut b, m, n);

    // Working square: R, the upper n x n triangle of the reduced matrix.
    let mut w = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..=j {
            w[j * n + i] = b[j * m + i];
        }
    }

    // V accumulates the right rotations.
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    one_sided_jacobi(&mut w, n, n, &mut v)?;

    // Column norms are the singular values; normalized columns form the left
    // factor of R.
    let mut order: Vec<usize> = (0..n).collect();
    let mut sigma = vec![0.0; n];
    for (j, s) in sigma.iter_mut().enumerate() {
        *s = column_norm(&w, n, j);
    }
    order.sort_by(|&p, &q| sigma[q].partial_cmp(&sigma[p]).expect("finite norms"));

    let mut ux = vec![0.0; n * n]; // column-major n x n
    let mut v_sorted = vec![0.0; n * n]; // column-major n x n
    let mut sigma_sorted = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        sigma_sorted[dst] = sigma[src];
        if sigma[src] > 0.0 {
            for i in 0..n {
                ux[dst * n + i] = w[src * n + i] / sigma[src];
            }
        }
        for i in 0..n {
            v_sorted[dst * n + i] = v[src * n + i];
        }
    }
    complete_zero_columns(&mut ux, n, n, &sigma_sorted);

    // Map the left factor back through Q: pad to m x n and apply the
    // reflectors in reverse.
    let mut u_tall = vec![0.0; m * n];
    for j in 0..n {
        u_tall[j * m..j * m + n].copy_from_slice(&ux[j * n..(j + 1) * n]);
    }
    for (k, refl) in reflectors.iter().enumerate().rev() {
        for c in 0..n {
            apply_reflector(&mut u_tall, m, n, k, refl, c);
        }
    }

    // Emit row-major factors in the original orientation.
    let k = n;
    let (u_rows, v_rows) = if transposed { (cols, rows) } else { (rows, cols) };
    let mut u = vec![0.0; u_rows * k];
    let mut v_out = vec![0.0; v_rows * k];
    for j in 0..k {
        for i in 0..u_rows {
            u[i * k + j] = u_tall[j * m + i];
        }
        for i in 0..v_rows {
            v_out[i * k + j] = v_sorted[j * n + i];
        }
    }
    if transposed {
        std::mem::swap(&mut u, &mut v_out);
    }
    Ok(RawSvd {
        u,
        sigma: sigma_sorted,
        v: v_out,
    })
}

struct Reflector {
    /// Householder vector over rows k..m of column k.
    v: Vec<f64>,
    tau: f64,
}

/// In-place Householder QR of a column-major m x n tall matrix; returns the
/// reflectors, leaving R in the upper triangle.
fn householder_qr(b: &mut [f64], m: usize, n: usize) -> Vec<Reflector> {
    let mut reflectors = Vec::with_capacity(n);
    for k in 0..n {
        let len = m - k;
        let mut v = vec![0.0; len];
        v.copy_from_slice(&b[k * m + k..(k + 1) * m]);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(Reflector { v, tau: 0.0 });
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * norm;
        let vtv = v.iter().map(|x| x * x).sum::<f64>();
        let tau = 2.0 / vtv;
        let refl = Reflector { v, tau };
        // Column k reduces to (-sign * norm) e_1.
        b[k * m + k] = -sign * norm;
        for i in k + 1..m {
            b[k * m + i] = 0.0;
        }
        for c in k + 1..n {
            apply_reflector(b, m, n, k, &refl, c);
        }
        reflectors.push(refl);
    }
    reflectors
}

/// Apply `I - tau v v^T` (acting on rows k..m) to column `c` of a
/// column-major m x n buffer.
fn apply_reflector(buf: &mut [f64], m: usize, _n: usize, k: usize, refl: &Reflector, c: usize) {
    if refl.tau == 0.0 {
        return;
    }
    let col = &mut buf[c * m + k..c * m + m];
    let mut dot = 0.0;
    for (x, vk) in col.iter().zip(&refl.v) {
        dot += x * vk;
    }
    dot *= refl.tau;
    for (x, vk) in col.iter_mut().zip(&refl.v) {
        *x -= dot * vk;
    }
}

fn column_norm(w: &[f64], m: usize, j: usize) -> f64 {
    w[j * m..(j + 1) * m].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Hestenes one-sided Jacobi: rotate column pairs of `w` (column-major
/// m x n) until all pairs are orthogonal within `JACOBI_TOL`, accumulating
/// the rotations into `v` (column-major nv x n with nv = n here).
fn one_sided_jacobi(w: &mut [f64], m: usize, n: usize, v: &mut [f64]) -> Result<(), f64> {
    if n <= 1 {
        return Ok(());
    }
    let nv = v.len() / n;
    let mut worst = 0.0_f64;
    for _sweep in 0..MAX_SWEEPS {
        worst = 0.0;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let wp = &w[p * m..(p + 1) * m];
                    let wq = &w[q * m..(q + 1) * m];
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (a, b) in wp.iter().zip(wq) {
                        alpha += a * a;
                        beta += b * b;
                        gamma += a * b;
                    }
                    (alpha, beta, gamma)
                };
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                // sqrt before multiplying to avoid underflow on tiny columns.
                let rel = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                worst = worst.max(rel);
                if rel <= JACOBI_TOL {
                    continue;
                }
                // Rotation zeroing the (p, q) correlation. For extreme
                // norm ratios zeta^2 overflows; fall back to the asymptotic
                // tangent 1/(2 zeta) there.
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e153 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(w, m, p, q, c, s);
                rotate_pair(v, nv, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(worst)
}

/// Columns p, q <- (c p - s q, s p + c q).
fn rotate_pair(buf: &mut [f64], m: usize, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (left, right) = buf.split_at_mut(q * m);
    let cp = &mut left[p * m..(p + 1) * m];
    let cq = &mut right[..m];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let new_p = c * *xp - s * *xq;
        let new_q = s * *xp + c * *xq;
        *xp = new_p;
        *xq = new_q;
    }
}

/// Replace columns with zero singular value by a deterministic orthonormal
/// completion: for each, take the standard basis vector with the smallest
/// projection onto the current columns, orthogonalize, and normalize.
fn complete_zero_columns(u: &mut [f64], m: usize, n: usize, sigma: &[f64]) {
    for j in 0..n {
        if sigma[j] > 0.0 {
            continue;
        }
        let mut best_idx = 0;
        let mut best_norm = -1.0_f64;
        let mut best: Vec<f64> = Vec::new();
        for cand_idx in 0..m {
            let mut cand = vec![0.0; m];
            cand[cand_idx] = 1.0;
            project_out(&mut cand, u, m, n, j, sigma);
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > best_norm {
                best_norm = norm;
                best_idx = cand_idx;
                best = cand;
            }
            // A residual this large cannot be improved meaningfully.
            if norm > 0.9 {
                break;
            }
        }
        let _ = best_idx;
        // Second orthogonalization pass for numerical cleanliness.
        project_out(&mut best, u, m, n, j, sigma);
        let norm = best.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (i, x) in best.iter().enumerate() {
            u[j * m + i] = x / norm;
        }
    }
}

/// Subtract from `cand` its projection onto every populated column of `u`
/// except `skip` (zero-sigma columns before `skip` are populated by earlier
/// completions and count too).
fn project_out(cand: &mut [f64], u: &[f64], m: usize, n: usize, skip: usize, sigma: &[f64]) {
    for l in 0..n {
        if l == skip || (sigma[l] == 0.0 && l > skip) {
            continue;
        }
        let col = &u[l * m..(l + 1) * m];
        let dot: f64 = cand.iter().zip(col).map(|(a, b)| a * b).sum();
        for (c, uc) in cand.iter_mut().zip(col) {
            *c -= dot * uc;
        }
    }
}
