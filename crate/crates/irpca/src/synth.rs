//! Seeded ground-truth problem generation: well-conditioned weakly
//! incoherent features, a rank-r latent matrix, Bernoulli-supported sparse
//! corruption with a banded magnitude, bounded uniform noise, and the
//! SVD-based feature construction for semi-real experiments.
//!
//! Every generator is a pure function of its parameters and seed; sub-seeds
//! for the pieces of an assembled instance are derived with a splittable
//! mixing rule so parallel sweeps stay reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::features::FeaturePair;
use crate::matrix::Matrix;
use crate::solver::TraceTruth;

/// Generation parameters for one synthetic instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n1: usize,
    pub n2: usize,
    pub d1: usize,
    pub d2: usize,
    /// Latent rank; at most `min(d1, d2)`.
    pub r: usize,
    /// Target per-row/column corruption level: each entry enters the support
    /// independently with probability `z / max(n1, n2)`.
    pub z: f64,
    /// Sparse-entry magnitude band (open interval).
    pub magnitude_low: f64,
    pub magnitude_high: f64,
    /// Desired feature condition number, >= 1.
    #[serde(default = "default_kappa")]
    pub kappa_target: f64,
    /// Bound on `||N*||_inf`; zero for noiseless instances.
    #[serde(default)]
    pub noise_inf_bound: f64,
    /// Spectral norm the latent matrix is scaled to.
    #[serde(default = "default_c_w")]
    pub c_w: f64,
    pub seed: u64,
}

fn default_kappa() -> f64 {
    1.0
}

fn default_c_w() -> f64 {
    1.0
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.d1 == 0 || self.d2 == 0 || self.n1 == 0 || self.n2 == 0 {
            return Err(Error::param("dims", "all dimensions must be positive"));
        }
        if self.d1 > self.n1 || self.d2 > self.n2 {
            return Err(Error::param("dims", "feature dimensions must satisfy d <= n"));
        }
        if self.r == 0 || self.r > self.d1.min(self.d2) {
            return Err(Error::param("r", "rank must be in 1..=min(d1, d2)"));
        }
        if !(self.z >= 0.0 && self.z <= self.n1.min(self.n2) as f64) {
            return Err(Error::param("z", "must be in 0..=min(n1, n2)"));
        }
        if !(self.magnitude_low > 0.0 && self.magnitude_low < self.magnitude_high)
            || !self.magnitude_high.is_finite()
        {
            return Err(Error::param(
                "magnitude band",
                "must satisfy 0 < low < high",
            ));
        }
        if !(self.kappa_target >= 1.0 && self.kappa_target.is_finite()) {
            return Err(Error::param("kappa_target", "must be finite and >= 1"));
        }
        if !(self.noise_inf_bound >= 0.0 && self.noise_inf_bound.is_finite()) {
            return Err(Error::param("noise_inf_bound", "must be finite and nonnegative"));
        }
        if !(self.c_w > 0.0 && self.c_w.is_finite()) {
            return Err(Error::param("c_w", "must be finite and positive"));
        }
        Ok(())
    }

    /// The sparse-magnitude band used by the synthetic experiments:
    /// `(5r/n, 10r/n)` with `n = max(n1, n2)`.
    pub fn default_magnitude_band(r: usize, n: usize) -> (f64, f64) {
        let n = n as f64;
        (5.0 * r as f64 / n, 10.0 * r as f64 / n)
    }

    /// The band used for semi-real runs: `(5r/sqrt(n1 n2), 10r/sqrt(n1 n2))`.
    pub fn semi_real_magnitude_band(r: usize, n1: usize, n2: usize) -> (f64, f64) {
        let geo = (n1 as f64 * n2 as f64).sqrt();
        (5.0 * r as f64 / geo, 10.0 * r as f64 / geo)
    }
}

/// Ground truth of a generated instance. `c_w` records the spectral norm the
/// latent matrix was scaled to.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub w_star: Matrix,
    pub l_star: Matrix,
    pub s_star: Matrix,
    pub n_star: Matrix,
    pub c_w: f64,
}

impl GroundTruth {
    pub fn trace_truth(&self) -> TraceTruth<'_> {
        TraceTruth {
            l_star: &self.l_star,
            s_star: &self.s_star,
        }
    }
}

/// Observed matrix plus prepared features, with ground truth when generated
/// synthetically.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub m: Matrix,
    pub fp: FeaturePair,
    pub truth: Option<GroundTruth>,
}

/// Sub-seeds for the independent pieces of an assembled instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubSeeds {
    pub features_1: u64,
    pub features_2: u64,
    pub latent: u64,
    pub sparse: u64,
    pub noise: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the sub-seeds [`assemble`] feeds to each generator.
pub fn sub_seeds(seed: u64) -> SubSeeds {
    let mut s = seed;
    SubSeeds {
        features_1: splitmix64(&mut s),
        features_2: splitmix64(&mut s),
        latent: splitmix64(&mut s),
        sparse: splitmix64(&mut s),
        noise: splitmix64(&mut s),
    }
}

/// Mix a base seed with cell coordinates; used by sweep drivers so each
/// (cell, run) pair owns an independent reproducible stream.
pub fn derive_seed(base: u64, cell: u64, run: u64) -> u64 {
    let mut s = base ^ cell.rotate_left(17) ^ run.rotate_left(41);
    splitmix64(&mut s)
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal n x k basis from the left singular vectors of a Gaussian draw.
fn orthonormal(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    debug_assert!(k <= n);
    gaussian(n, k, rng)
        .svd()
        .expect("SVD of a Gaussian draw")
        .u()
        .clone()
}

/// Weakly incoherent d x n feature matrix with condition number
/// `kappa_target`: orthonormalized standard-normal factors with singular
/// values interpolated geometrically from `kappa_target` down to 1.
pub fn gen_features(d: usize, n: usize, kappa_target: f64, seed: u64) -> Result<Matrix, Error> {
    if d == 0 || d > n {
        return Err(Error::param("dims", format!("need 1 <= d <= n, got d={d}, n={n}")));
    }
    if !(kappa_target >= 1.0 && kappa_target.is_finite()) {
        return Err(Error::param("kappa_target", "must be finite and >= 1"));
    }
    if d == 1 && kappa_target != 1.0 {
        return Err(Error::param(
            "kappa_target",
            "a single singular value cannot realize kappa > 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = orthonormal(d, d, &mut rng);
    let v = orthonormal(n, d, &mut rng);
    let mut u_scaled = u;
    for j in 0..d {
        let sigma = if d == 1 {
            1.0
        } else {
            kappa_target.powf((d - 1 - j) as f64 / (d - 1) as f64)
        };
        for i in 0..d {
            let x = u_scaled.get(i, j);
            u_scaled.set(i, j, x * sigma);
        }
    }
    Ok(u_scaled.matmul(&v.transpose()))
}

/// Rank-r latent matrix: entries sampled uniformly from (0, 1), then
/// truncated to the top r singular values.
pub fn gen_latent(d1: usize, d2: usize, r: usize, seed: u64) -> Result<Matrix, Error> {
    if r == 0 || r > d1.min(d2) {
        return Err(Error::param("r", "rank must be in 1..=min(d1, d2)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampled = Matrix::from_fn(d1, d2, |_, _| rng.random_range(0.0..1.0));
    Ok(sampled.rank_project(r)?)
}

/// Symmetric variant: symmetrize the sample, then re-project to rank r
/// (symmetrization alone can change the rank).
pub fn gen_latent_symmetric(d: usize, r: usize, seed: u64) -> Result<Matrix, Error> {
    if r == 0 || r > d {
        return Err(Error::param("r", "rank must be in 1..=d"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampled = Matrix::from_fn(d, d, |_, _| rng.random_range(0.0..1.0));
    let sym = sampled.add(&sampled.transpose()).scale(0.5);
    Ok(sym.rank_project(r)?)
}

/// Sparse corruption: Bernoulli(z / max(n1, n2)) support, magnitudes uniform
/// in the open band with uniform signs.
pub fn gen_sparse(
    n1: usize,
    n2: usize,
    z: f64,
    mag_low: f64,
    mag_high: f64,
    seed: u64,
) -> Result<Matrix, Error> {
    if !(z >= 0.0 && z <= n1.min(n2) as f64) {
        return Err(Error::param("z", "must be in 0..=min(n1, n2)"));
    }
    if !(mag_low > 0.0 && mag_low < mag_high) || !mag_high.is_finite() {
        return Err(Error::param("magnitude band", "must satisfy 0 < low < high"));
    }
    let p = z / n1.max(n2) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Matrix::from_fn(n1, n2, |_, _| {
        if rng.random_range(0.0..1.0) < p {
            let mag = loop {
                let m: f64 = rng.random_range(mag_low..mag_high);
                if m > mag_low {
                    break m;
                }
            };
            if rng.random_range(0.0..1.0) < 0.5 {
                -mag
            } else {
                mag
            }
        } else {
            0.0
        }
    }))
}

/// Dense bounded noise: entries i.i.d. uniform in `[-inf_bound, inf_bound]`.
pub fn gen_noise(n1: usize, n2: usize, inf_bound: f64, seed: u64) -> Result<Matrix, Error> {
    if !(inf_bound >= 0.0 && inf_bound.is_finite()) {
        return Err(Error::param("inf_bound", "must be finite and nonnegative"));
    }
    if inf_bound == 0.0 {
        return Ok(Matrix::zeros(n1, n2));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Matrix::from_fn(n1, n2, |_, _| {
        rng.random_range(-inf_bound..=inf_bound)
    }))
}

/// Compose the generators into a full instance: `M = F1^T W* F2 + S* + N*`
/// with `W*` scaled so its spectral norm equals `c_w`. Feasibility holds by
/// construction.
pub fn assemble(spec: &SynthSpec) -> Result<ProblemInstance, Error> {
    spec.validate()?;
    let seeds = sub_seeds(spec.seed);
    let f1 = gen_features(spec.d1, spec.n1, spec.kappa_target, seeds.features_1)?;
    let f2 = gen_features(spec.d2, spec.n2, spec.kappa_target, seeds.features_2)?;
    let w0 = gen_latent(spec.d1, spec.d2, spec.r, seeds.latent)?;
    let w_star = w0.scale(spec.c_w / w0.spectral_norm());
    let l_star = f1.transpose().matmul(&w_star).matmul(&f2);
    let s_star = gen_sparse(
        spec.n1,
        spec.n2,
        spec.z,
        spec.magnitude_low,
        spec.magnitude_high,
        seeds.sparse,
    )?;
    let n_star = gen_noise(spec.n1, spec.n2, spec.noise_inf_bound, seeds.noise)?;
    let m = l_star.add(&s_star).add(&n_star);
    let fp = FeaturePair::prepare(f1, f2)?;
    Ok(ProblemInstance {
        m,
        fp,
        truth: Some(GroundTruth {
            w_star,
            l_star,
            s_star,
            n_star,
            c_w: spec.c_w,
        }),
    })
}

/// Features built from the SVD of a baseline matrix: top singular vectors
/// rotated by seeded random elements of SO(d), transposed to the d x n
/// layout.
#[derive(Debug, Clone)]
pub struct SvdFeatures {
    pub f1: Matrix,
    pub f2: Matrix,
    /// Numerical rank of the baseline matrix.
    pub rank_l: usize,
    /// True when `rank_l <= min(d1, d2)`, i.e. feasibility of the baseline
    /// is guaranteed. Directions beyond the rank are still returned from the
    /// factorization, but then only the rank-supported part of `L` is
    /// feasible.
    pub covers_rank: bool,
}

/// Construct a feature pair from the top-d1 left and top-d2 right singular
/// vectors of `l`, each rotated by a seeded random rotation.
pub fn features_from_svd(l: &Matrix, d1: usize, d2: usize, seed: u64) -> Result<SvdFeatures, Error> {
    let k = l.rows().min(l.cols());
    if d1 == 0 || d2 == 0 || d1 > k || d2 > k {
        return Err(Error::param(
            "dims",
            format!("need 1 <= d1, d2 <= min dims = {k}, got d1={d1}, d2={d2}"),
        ));
    }
    let factors = l.svd()?;
    let rank_l = factors.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q_u = random_rotation(d1, &mut rng);
    let q_v = random_rotation(d2, &mut rng);
    let u_top = factors.u().submatrix(0, l.rows(), 0, d1);
    let v_top = factors.v().submatrix(0, l.cols(), 0, d2);
    Ok(SvdFeatures {
        f1: u_top.matmul(&q_u).transpose(),
        f2: v_top.matmul(&q_v).transpose(),
        rank_l,
        covers_rank: rank_l <= d1.min(d2),
    })
}

/// Haar-ish random element of SO(d): polar factor of a Gaussian draw with
/// the determinant corrected to +1.
pub fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = gaussian(d, d, rng);
    let f = g.svd().expect("SVD of a Gaussian draw");
    let mut u = f.u().clone();
    let q = u.matmul(&f.v().transpose());
    if determinant_sign(&q) < 0.0 {
        for i in 0..d {
            let x = u.get(i, d - 1);
            u.set(i, d - 1, -x);
        }
    }
    u.matmul(&f.v().transpose())
}

/// Sign of the determinant via LU with partial pivoting; only used to orient
/// rotations, so the magnitude is irrelevant.
fn determinant_sign(m: &Matrix) -> f64 {
    let n = m.rows();
    debug_assert_eq!(n, m.cols());
    let mut a: Vec<f64> = m.entries().to_vec();
    let mut sign = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            sign = -sign;
        }
        if a[col * n + col] < 0.0 {
            sign = -sign;
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
        }
    }
    sign
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RANK_TOL;

    fn base_spec() -> SynthSpec {
        let (lo, hi) = SynthSpec::default_magnitude_band(2, 40);
        SynthSpec {
            n1: 40,
            n2: 40,
            d1: 5,
            d2: 5,
            r: 2,
            z: 1.0,
            magnitude_low: lo,
            magnitude_high: hi,
            kappa_target: 1.0,
            noise_inf_bound: 0.0,
            c_w: 1.0,
            seed: 11,
        }
    }

    #[test]
    fn gen_features_hits_kappa_target() {
        for &kappa in &[1.0, 10.0] {
            let f = gen_features(6, 50, kappa, 3).unwrap();
            let measured = f.condition_number().unwrap();
            assert!(
                (measured - kappa).abs() < 1e-6,
                "kappa target {kappa}, measured {measured}"
            );
        }
    }

    #[test]
    fn gen_features_square_orthogonal_at_unit_kappa() {
        let f = gen_features(7, 7, 1.0, 5).unwrap();
        let gram = f.matmul(&f.transpose());
        assert!(gram.sub(&Matrix::identity(7)).inf_norm() < 1e-10);
    }

    #[test]
    fn gen_features_incoherence_stays_weak() {
        // Gaussian right singular spaces are weakly incoherent at small d/n.
        for seed in 0..20 {
            let f = gen_features(5, 120, 1.0, seed).unwrap();
            let fp = FeaturePair::prepare(f.clone(), f).unwrap();
            assert!(fp.mu_f1() <= 3.0, "seed {seed}: mu {}", fp.mu_f1());
        }
    }

    #[test]
    fn gen_latent_rank_and_full_rank_paths() {
        let w = gen_latent(6, 6, 3, 7).unwrap();
        let sv = w.svd().unwrap();
        assert_eq!(sv.rank(), 3);
        assert!(sv.singular_values()[3] <= RANK_TOL * sv.sigma_max());

        // Full-rank request reproduces the sample.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = gen_latent(4, 5, 4, 9).unwrap();
        let resampled = Matrix::from_fn(4, 5, |_, _| rng.random_range(0.0..1.0));
        assert!(full.sub(&resampled).inf_norm() < 1e-10);
    }

    #[test]
    fn gen_latent_rank_one_has_vanishing_minors() {
        let w = gen_latent(5, 5, 1, 13).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let minor = w.get(i, j) * w.get(i + 1, j + 1) - w.get(i, j + 1) * w.get(i + 1, j);
                assert!(minor.abs() < 1e-10, "minor ({i},{j}) = {minor}");
            }
        }
    }

    #[test]
    fn gen_latent_symmetric_is_symmetric_rank_r() {
        let w = gen_latent_symmetric(6, 2, 3).unwrap();
        assert!(w.sub(&w.transpose()).inf_norm() < 1e-12);
        assert_eq!(w.svd().unwrap().rank(), 2);
    }

    #[test]
    fn gen_sparse_structure() {
        let s = gen_sparse(50, 50, 0.0, 0.1, 0.2, 1).unwrap();
        assert_eq!(s.row_col_sparsity(), (0, 0));

        let s = gen_sparse(60, 60, 4.0, 0.1, 0.2, 2).unwrap();
        for &x in s.entries() {
            if x != 0.0 {
                assert!(x.abs() > 0.1 && x.abs() < 0.2, "magnitude {x} outside band");
            }
        }
    }

    #[test]
    fn gen_sparse_support_rate_matches_binomial_model() {
        let n = 1000;
        let z = 10.0;
        let s = gen_sparse(n, n, z, 0.01, 0.05, 42).unwrap();
        let nnz = s.entries().iter().filter(|&&x| x != 0.0).count() as f64;
        let mean_per_row = nnz / n as f64;
        // Binomial(n, z/n) per row: sd of the mean over n rows.
        let sd = (z * (1.0 - z / n as f64) / n as f64).sqrt();
        assert!(
            (mean_per_row - z).abs() < 3.0 * sd,
            "mean per-row count {mean_per_row} vs z {z}"
        );
    }

    #[test]
    fn gen_noise_band_and_symmetry() {
        assert_eq!(gen_noise(8, 8, 0.0, 4).unwrap(), Matrix::zeros(8, 8));
        let b = 0.3;
        let noise = gen_noise(50, 50, b, 5).unwrap();
        assert!(noise.inf_norm() <= b);
        let mean: f64 = noise.entries().iter().sum::<f64>() / 2500.0;
        // Uniform on [-b, b]: sd of the mean is b/sqrt(3*2500).
        assert!(mean.abs() < 3.0 * b / (3.0 * 2500.0_f64).sqrt());
    }

    #[test]
    fn assemble_is_exact_and_feasible() {
        let mut spec = base_spec();
        spec.noise_inf_bound = 0.01;
        let inst = assemble(&spec).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        let recomposed = truth.l_star.add(&truth.s_star).add(&truth.n_star);
        assert!(inst.m.sub(&recomposed).inf_norm() == 0.0);
        assert!(inst.fp.feasibility_residual(&truth.l_star).unwrap() < 1e-8);
        assert!((truth.w_star.spectral_norm() - spec.c_w).abs() < 1e-10);
    }

    #[test]
    fn assemble_noiseless_zero_corruption_is_pure_low_rank() {
        let mut spec = base_spec();
        spec.z = 0.0;
        let inst = assemble(&spec).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        assert!(inst.m.sub(&truth.l_star).inf_norm() == 0.0);
    }

    #[test]
    fn rotations_live_in_so_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in [2usize, 3, 6] {
            let q = random_rotation(d, &mut rng);
            let gram = q.transpose().matmul(&q);
            assert!(gram.sub(&Matrix::identity(d)).inf_norm() < 1e-10);
            assert!(determinant_sign(&q) > 0.0);
        }
    }

    #[test]
    fn features_from_svd_feasibility() {
        // Rank-3 baseline, feature dims beyond the rank.
        let a = gen_latent(40, 3, 3, 31).unwrap();
        let b = gen_latent(3, 60, 3, 32).unwrap();
        let l = a.matmul(&b);
        let built = features_from_svd(&l, 8, 10, 33).unwrap();
        assert_eq!(built.rank_l, 3);
        assert!(built.covers_rank);
        let fp = FeaturePair::prepare(built.f1, built.f2).unwrap();
        assert!(fp.feasibility_residual(&l).unwrap() < 1e-8);

        // Different seeds rotate the basis but keep the span.
        let other = features_from_svd(&l, 8, 10, 99).unwrap();
        assert!(other.f1.sub(&fp.f1()).inf_norm() > 1e-6);
        let fp2 = FeaturePair::prepare(other.f1, other.f2).unwrap();
        assert!(fp2.feasibility_residual(&l).unwrap() < 1e-8);
    }

    #[test]
    fn features_from_svd_flags_uncovered_rank() {
        let a = gen_latent(20, 5, 5, 41).unwrap();
        let b = gen_latent(5, 30, 5, 42).unwrap();
        let l = a.matmul(&b); // rank 5
        let built = features_from_svd(&l, 3, 8, 43).unwrap();
        assert_eq!(built.rank_l, 5);
        assert!(!built.covers_rank);
    }

    #[test]
    fn sub_seed_derivation_is_stable_and_spread() {
        assert_eq!(sub_seeds(7), sub_seeds(7));
        let a = sub_seeds(7);
        let b = sub_seeds(8);
        assert_ne!(a.features_1, b.features_1);
        assert_ne!(a.features_1, a.features_2);
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
    }
}
