//! Exact Gaussian sampling on a fixed set of points and Monte Carlo
//! estimates of `P(X(p) > u for every grid point p)`.
//!
//! Samples are produced in fixed-size blocks; block `k` draws its normals
//! from a ChaCha8 generator seeded with the master seed and switched to
//! stream `k`. Blocks run in parallel and are merged in order, so every
//! estimate depends only on the seed, never on the number of threads.

use libm::erfc;
use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::{gram, Kernel, Point};
use crate::quad::integrate_breaks;
use crate::{Error, Result};

/// Samples per independent random stream.
pub const BLOCK: usize = 8192;

/// Lower Cholesky factor of a Gram matrix, ready for sampling.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    factor: DMatrix<f64>,
    /// Diagonal jitter that made the factorization succeed.
    pub jitter: f64,
}

impl FieldSampler {
    /// Factors the Gram matrix of `points`, adding diagonal jitter
    /// `10^k·1e−14·R₀` (up to `1e−8·R₀`) if needed, `R₀` the largest variance.
    pub fn new(kernel: &Kernel, points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("need at least one point".into()));
        }
        let q = gram(kernel, points, None)?;
        let r0 = q.diagonal().iter().copied().fold(0.0, f64::max);
        let mut jitter = 0.0;
        loop {
            let mut m = q.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = Cholesky::new(m) {
                return Ok(Self { factor: ch.unpack(), jitter });
            }
            jitter = if jitter == 0.0 { 1e-14 * r0 } else { 10.0 * jitter };
            if !(jitter <= 1e-8 * r0 * (1.0 + 1e-9)) {
                return Err(Error::CholeskyFailure { jitter: jitter / 10.0 });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Block `k` of a run: a `dim × count` matrix whose columns are samples.
    fn block(&self, seed: u64, k: usize, count: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        // Column-major fill: sample j takes normals j·dim .. (j+1)·dim.
        let z = DMatrix::from_iterator(
            self.dim(),
            count,
            (0..self.dim() * count).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        &self.factor * z
    }

    fn blocks(n_samples: usize) -> Vec<(usize, usize)> {
        (0..n_samples.div_ceil(BLOCK))
            .map(|k| (k, BLOCK.min(n_samples - k * BLOCK)))
            .collect()
    }

    /// `n_samples × dim` matrix of draws (rows are samples).
    pub fn sample(&self, n_samples: usize, seed: u64) -> DMatrix<f64> {
        let blocks: Vec<DMatrix<f64>> = Self::blocks(n_samples)
            .into_par_iter()
            .map(|(k, count)| self.block(seed, k, count))
            .collect();
        let mut out = DMatrix::zeros(n_samples, self.dim());
        let mut row = 0;
        for b in blocks {
            for j in 0..b.ncols() {
                for i in 0..b.nrows() {
                    out[(row, i)] = b[(i, j)];
                }
                row += 1;
            }
        }
        out
    }

    /// Number of samples whose minimum over all points exceeds each level.
    pub fn count_exceedances(&self, levels: &[f64], n_samples: usize, seed: u64) -> Vec<u64> {
        Self::blocks(n_samples)
            .into_par_iter()
            .map(|(k, count)| {
                let b = self.block(seed, k, count);
                let mut hits = vec![0u64; levels.len()];
                for col in b.column_iter() {
                    let m = col.iter().copied().fold(f64::INFINITY, f64::min);
                    for (h, &u) in hits.iter_mut().zip(levels) {
                        if m > u {
                            *h += 1;
                        }
                    }
                }
                hits
            })
            .reduce(
                || vec![0u64; levels.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }
}

/// `n_samples` draws of the centered Gaussian vector with covariance
/// `R(p_i, p_j)`; rows are samples.
pub fn sample_field(kernel: &Kernel, points: &[Point], n_samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    Ok(FieldSampler::new(kernel, points)?.sample(n_samples, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub u: f64,
    pub p_hat: f64,
    /// Half-width `1.96·√(p̂(1−p̂)/N)` of the normal-approximation interval.
    pub ci95: f64,
    pub n_samples: usize,
    pub hits: u64,
    pub seed: Option<u64>,
}

impl McEstimate {
    fn from_counts(u: f64, hits: u64, n_samples: usize, seed: Option<u64>) -> Self {
        let n = n_samples as f64;
        let p_hat = hits as f64 / n;
        let ci95 = 1.96 * (p_hat * (1.0 - p_hat) / n).sqrt();
        Self { u, p_hat, ci95, n_samples, hits, seed }
    }

    /// `−2 ln(p̂)/u²`, the empirical counterpart of the capacity; `None`
    /// when `p̂ = 0` or `u = 0`.
    pub fn slope(&self) -> Option<f64> {
        (self.p_hat > 0.0 && self.u != 0.0).then(|| -2.0 * self.p_hat.ln() / (self.u * self.u))
    }
}

/// Fraction of rows of `samples` with every entry above `u`.
pub fn estimate_exceedance(samples: &DMatrix<f64>, u: f64) -> Result<McEstimate> {
    if samples.nrows() == 0 || samples.ncols() == 0 {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let hits = samples
        .row_iter()
        .filter(|r| r.iter().all(|&x| x > u))
        .count() as u64;
    Ok(McEstimate::from_counts(u, hits, samples.nrows(), None))
}

/// Estimates for several levels from one streamed run; equal to
/// [`estimate_exceedance`] on [`sample_field`] with the same seed.
pub fn exceedance_sweep(
    kernel: &Kernel,
    points: &[Point],
    levels: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be positive".into()));
    }
    let sampler = FieldSampler::new(kernel, points)?;
    let hits = sampler.count_exceedances(levels, n_samples, seed);
    Ok(levels
        .iter()
        .zip(hits)
        .map(|(&u, h)| McEstimate::from_counts(u, h, n_samples, Some(seed)))
        .collect())
}

/// CSV with columns `u, p_hat, ci95, slope` (empty slope when undefined).
pub fn sweep_csv(estimates: &[McEstimate]) -> String {
    use crate::report::csv_float;
    let mut out = String::from("u,p_hat,ci95,slope\n");
    for e in estimates {
        let slope = e.slope().map(csv_float).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", csv_float(e.u), csv_float(e.p_hat), csv_float(e.ci95), slope));
    }
    out
}

/// `P(Z > x)` for a standard normal `Z`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(X(0) > u, X(a) > u)` for a stationary kernel.
///
/// With `ρ = R(a)/R(0)` and `z = u/√R(0)` this is
/// `∫_z^∞ φ(s) P(Z > (z − ρs)/√(1−ρ²)) ds`, computed by adaptive quadrature.
pub fn two_point_prob(kernel: &Kernel, a: f64, u: f64) -> Result<f64> {
    if !kernel.is_stationary() {
        return Err(Error::Precondition("a stationary kernel is required".into()));
    }
    let r0 = kernel
        .variance()
        .ok_or_else(|| Error::Precondition("the kernel has no finite variance".into()))?;
    let rho = kernel.profile(a)? / r0;
    if !(rho.abs() < 1.0 - 1e-12) {
        return Err(Error::DegenerateCorrelation(rho));
    }
    if !u.is_finite() {
        return Err(Error::InvalidInput(format!("level must be finite, got {u}")));
    }
    Ok(bivariate_orthant(u / r0.sqrt(), rho))
}

/// `P(Z₁ > z, Z₂ > z)` for standard normals with correlation `ρ`.
pub fn bivariate_orthant(z: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let f = |x: f64| phi(x) * normal_sf((z - rho * x) / s);
    let lo = z.max(-40.0);
    let hi = z.max(0.0) + 40.0;
    let mut breaks = vec![lo, hi];
    // The conditional tail switches from ≈1 to ≈0 around s = z/ρ.
    for p in [0.0, if rho != 0.0 { z / rho } else { 0.0 }] {
        if p > lo && p < hi {
            breaks.push(p);
        }
    }
    breaks.sort_by(f64::total_cmp);
    // Relative accuracy only, so that far tails keep their log-slope.
    integrate_breaks(f, &breaks, f64::MIN_POSITIVE, 1e-13, 2000).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ou() -> Kernel {
        Kernel::ornstein_uhlenbeck(1.0, 1).unwrap()
    }

    #[test]
    fn univariate_variance() {
        let n = 100_000;
        let s = sample_field(&ou(), &[vec![0.3]], n, 1).unwrap();
        let var = s.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 3.0 / (n as f64).sqrt() * 2f64.sqrt(), "{var}");
    }

    #[test]
    fn lag_one_correlation() {
        let n = 100_000;
        let s = sample_field(&ou(), &[vec![0.0], vec![1.0]], n, 2).unwrap();
        let c = s.row_iter().map(|r| r[0] * r[1]).sum::<f64>() / n as f64;
        assert!((c - (-1.0f64).exp()).abs() < 3.0 / (n as f64).sqrt(), "{c}");
    }

    #[test]
    fn fixed_seed_reproduces_and_blocks_are_independent() {
        let pts = vec![vec![0.0], vec![0.5]];
        let a = sample_field(&ou(), &pts, 2 * BLOCK + 5, 9).unwrap();
        let b = sample_field(&ou(), &pts, 2 * BLOCK + 5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.row(0), a.row(BLOCK));
        let c = sample_field(&ou(), &pts, 10, 10).unwrap();
        assert_ne!(a.row(0), c.row(0));
        // A prefix run shares its leading samples.
        let short = sample_field(&ou(), &pts, 100, 9).unwrap();
        assert_eq!(short.rows(0, 100), a.rows(0, 100));
    }

    #[test]
    fn sweep_matches_matrix_estimates() {
        let pts: Vec<Point> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
        let n = BLOCK + 1000;
        let s = sample_field(&ou(), &pts, n, 4).unwrap();
        let sweep = exceedance_sweep(&ou(), &pts, &[-1e9, 0.0, 1.0], n, 4).unwrap();
        for e in &sweep {
            let m = estimate_exceedance(&s, e.u).unwrap();
            assert_eq!(m.hits, e.hits);
        }
        assert_eq!(sweep[0].p_hat, 1.0);
        assert_eq!(sweep[0].ci95, 0.0);
    }

    #[test]
    fn single_point_half() {
        let n = 200_000;
        let e = exceedance_sweep(&ou(), &[vec![0.0]], &[0.0], n, 3).unwrap()[0];
        assert!((e.p_hat - 0.5).abs() < 2.0 * e.ci95.max(1e-9), "{e:?}");
    }

    #[test]
    fn orthant_probabilities() {
        assert_relative_eq!(bivariate_orthant(0.0, 0.0), 0.25, epsilon = 1e-13);
        for rho in [-0.9, -0.3, 0.2, 0.7, 0.99] {
            let expect = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            assert_relative_eq!(bivariate_orthant(0.0, rho), expect, epsilon = 1e-12);
        }
        // Independence factorizes.
        assert_relative_eq!(bivariate_orthant(1.3, 0.0), normal_sf(1.3).powi(2), max_relative = 1e-11);
        assert!(matches!(
            two_point_prob(&ou(), 0.0, 1.0),
            Err(Error::DegenerateCorrelation(_))
        ));
    }

    #[test]
    fn two_point_slopes_decrease_to_the_limit() {
        let k = Kernel::gaussian_sq(1.0, 1).unwrap();
        let a = 1.0;
        let limit = 2.0 / (1.0 + (-0.5f64).exp());
        let slopes: Vec<f64> = [3.0, 4.0, 5.0]
            .iter()
            .map(|&u| -2.0 * two_point_prob(&k, a, u).unwrap().ln() / (u * u))
            .collect();
        assert!(slopes[0] > slopes[1] && slopes[1] > slopes[2], "{slopes:?}");
        assert!(slopes[2] > limit);
    }
}
