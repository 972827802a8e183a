//! Behavior of the capacity on `[0, a]` as `a → ∞`.
//!
//! With an integrable positive covariance, `C(a)/a → 1/(2∫₀^∞ R)`. With a
//! regularly varying covariance of index `−β`, `β ∈ (0, 1)`,
//! `R(a)·C(a) → 1/E_β` where `E_β` is the minimal Riesz energy
//! `min_μ ∫∫ |u−v|^(−β) μ(du)μ(dv)` on `[0, 1]`.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::capacity::{min_energy, CapacityReport};
use crate::geometry::straight_line;
use crate::kernel::{Kernel, KernelKind};
use crate::quad::integrate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AsymptoticKind {
    ShortMemory,
    LongMemory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub kind: AsymptoticKind,
    pub predicted_limit: f64,
    /// `(a, C(a)/a)` for short memory, `(a, R(a)·C(a))` for long memory.
    pub observed: Vec<(f64, f64)>,
    pub bounds: Option<(f64, f64)>,
}

impl AsymptoticsReport {
    pub fn to_csv(&self) -> String {
        let col = match self.kind {
            AsymptoticKind::ShortMemory => "capacity_over_a",
            AsymptoticKind::LongMemory => "r_times_capacity",
        };
        let rows: Vec<[f64; 2]> = self.observed.iter().map(|&(a, v)| [a, v]).collect();
        crate::report::to_csv(&["a", col], rows.iter().map(|r| r.as_slice()))
    }
}

/// `∫₀^∞ R(t) dt` with the bound on the part not covered by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceIntegral {
    pub value: f64,
    /// Quadrature error estimate on the truncated range.
    pub quad_error: f64,
    /// Analytic tail beyond the truncation point (already included in `value`).
    pub tail: f64,
}

pub fn covariance_integral(kernel: &Kernel) -> Result<CovarianceIntegral> {
    if !kernel.is_stationary() {
        return Err(Error::Precondition("a stationary kernel is required".into()));
    }
    let tol = 1e-13;
    match kernel.kind() {
        KernelKind::OrnsteinUhlenbeck { scale } => {
            let cut = 40.0 * scale;
            let q = integrate(|t| (-t / scale).exp(), 0.0, cut, tol * scale, tol, 500);
            let tail = scale * (-cut / scale).exp();
            Ok(CovarianceIntegral { value: q.value + tail, quad_error: q.error, tail })
        }
        KernelKind::GaussianSq { scale } => {
            let cut = 10.0 * scale;
            let q = integrate(
                |t| (-0.5 * (t / scale) * (t / scale)).exp(),
                0.0,
                cut,
                tol * scale,
                tol,
                500,
            );
            let tail = scale * (0.5 * std::f64::consts::PI).sqrt() * 0.5 * erfc(cut / (scale * 2f64.sqrt()));
            Ok(CovarianceIntegral { value: q.value + tail, quad_error: q.error, tail })
        }
        KernelKind::IsotropicTabulated { table } | KernelKind::Tabulated1D { table } => {
            if table.tail_value() != 0.0 {
                return Err(Error::Divergent(format!(
                    "tabulated covariance levels off at {} instead of 0",
                    table.tail_value()
                )));
            }
            // Piecewise linear: the trapezoid rule is exact.
            let x = table.breakpoints();
            let value = x
                .windows(2)
                .map(|w| 0.5 * (w[1] - w[0]) * (table.eval(w[0]) + table.eval(w[1])))
                .sum();
            Ok(CovarianceIntegral { value, quad_error: 0.0, tail: 0.0 })
        }
        KernelKind::LongMemory { beta, .. } | KernelKind::Riesz { beta } => Err(Error::Divergent(
            format!("covariance decays like t^(-{beta}), which is not integrable"),
        )),
        KernelKind::BrownianSheet => unreachable!("not stationary"),
    }
}

/// `lim C(a)/a = 1/(2∫₀^∞ R)`.
pub fn short_memory_limit(kernel: &Kernel) -> Result<f64> {
    let int = covariance_integral(kernel)?;
    if !(int.value > 0.0) {
        return Err(Error::Precondition(format!(
            "covariance integral {} is not positive",
            int.value
        )));
    }
    Ok(0.5 / int.value)
}

/// `2/((1−β)(2−β))`, the Riesz energy of the uniform measure on `[0, 1]`.
pub fn riesz_uniform_energy(beta: f64) -> f64 {
    2.0 / ((1.0 - beta) * (2.0 - beta))
}

/// Bounds `((1−β)(2−β)/2, (1−β)(2−β))` on `1/E_β`.
pub fn riesz_bounds(beta: f64) -> (f64, f64) {
    let p = (1.0 - beta) * (2.0 - beta);
    (0.5 * p, p)
}

/// Minimal Riesz energy on `n` uniform points of `[0, 1]`.
pub fn riesz_min_energy(beta: f64, n: usize, tol: f64) -> Result<CapacityReport> {
    let k = Kernel::riesz(beta, 1)?;
    min_energy(&k, &straight_line(&[0.0], &[1.0])?, n, tol)
}

/// `1/E_β`, the limit of `R(a)·C(a)` for long memory with index `β`.
pub fn long_memory_limit(beta: f64, n: usize) -> Result<f64> {
    Ok(riesz_min_energy(beta, n, crate::DEFAULT_TOL)?.capacity)
}

fn capacity_on(kernel: &Kernel, a: f64, n: usize, tol: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidInput(format!("interval length must be positive, got {a}")));
    }
    Ok(min_energy(kernel, &straight_line(&[0.0], &[a])?, n, tol)?.capacity)
}

/// `C(a)/a` at each length, against `1/(2∫R)`.
pub fn short_memory_report(kernel: &Kernel, lengths: &[f64], n: usize, tol: f64) -> Result<AsymptoticsReport> {
    let predicted_limit = short_memory_limit(kernel)?;
    let observed = lengths
        .iter()
        .map(|&a| Ok((a, capacity_on(kernel, a, n, tol)? / a)))
        .collect::<Result<_>>()?;
    Ok(AsymptoticsReport { kind: AsymptoticKind::ShortMemory, predicted_limit, observed, bounds: None })
}

/// `R(a)·C(a)` at each length for a long-memory kernel, against `1/E_β`
/// computed on `riesz_n` points.
pub fn long_memory_report(
    kernel: &Kernel,
    lengths: &[f64],
    n: usize,
    tol: f64,
    riesz_n: usize,
) -> Result<AsymptoticsReport> {
    let KernelKind::LongMemory { beta, .. } = *kernel.kind() else {
        return Err(Error::Precondition("a long-memory kernel is required".into()));
    };
    let predicted_limit = riesz_min_energy(beta, riesz_n, tol)?.capacity;
    let observed = lengths
        .iter()
        .map(|&a| Ok((a, kernel.profile(a)? * capacity_on(kernel, a, n, tol)?)))
        .collect::<Result<_>>()?;
    Ok(AsymptoticsReport {
        kind: AsymptoticKind::LongMemory,
        predicted_limit,
        observed,
        bounds: Some(riesz_bounds(beta)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Table;
    use approx::assert_relative_eq;

    #[test]
    fn short_memory_limits() {
        let ou = Kernel::ornstein_uhlenbeck(1.0, 1).unwrap();
        assert_relative_eq!(short_memory_limit(&ou).unwrap(), 0.5, epsilon = 1e-12);
        let ou3 = Kernel::ornstein_uhlenbeck(3.0, 1).unwrap();
        assert_relative_eq!(short_memory_limit(&ou3).unwrap(), 0.5 / 3.0, epsilon = 1e-12);
        let g = Kernel::gaussian_sq(1.0, 1).unwrap();
        let expect = 0.5 / (0.5 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(short_memory_limit(&g).unwrap(), expect, epsilon = 1e-12);
        assert_relative_eq!(expect, 0.39894, epsilon = 1e-5);
        let lm = Kernel::long_memory(1.0, 0.5, 1).unwrap();
        assert!(matches!(short_memory_limit(&lm), Err(Error::Divergent(_))));
    }

    #[test]
    fn tabulated_integrals() {
        let t = Table::new(&[[0.0, 1.0], [1.0, 0.5], [3.0, 0.0]]).unwrap();
        let k = Kernel::tabulated_1d(t).unwrap();
        assert_relative_eq!(covariance_integral(&k).unwrap().value, 0.75 + 0.5, epsilon = 1e-15);
        let flat = Kernel::tabulated_1d(Table::new(&[[0.0, 1.0], [1.0, 0.5]]).unwrap()).unwrap();
        assert!(matches!(short_memory_limit(&flat), Err(Error::Divergent(_))));
    }

    #[test]
    fn riesz_energy_below_uniform() {
        let r = riesz_min_energy(0.5, 201, 1e-9).unwrap();
        assert!(r.energy < riesz_uniform_energy(0.5));
        assert!(r.energy > 0.5 * riesz_uniform_energy(0.5));
        assert!(r.measure.asymmetry() < 1e-5);
        let (lo, hi) = riesz_bounds(0.5);
        assert_eq!((lo, hi), (0.375, 0.75));
    }

    #[test]
    fn riesz_energy_tends_to_one_for_small_beta() {
        let r = riesz_min_energy(1e-3, 101, 1e-9).unwrap();
        assert!((r.energy - 1.0).abs() < 5e-3, "{}", r.energy);
    }

    #[test]
    fn report_shapes() {
        let ou = Kernel::ornstein_uhlenbeck(1.0, 1).unwrap();
        let rep = short_memory_report(&ou, &[5.0, 10.0], 201, 1e-9).unwrap();
        assert_eq!(rep.kind, AsymptoticKind::ShortMemory);
        for &(a, v) in &rep.observed {
            assert!((v - (a + 2.0) / (2.0 * a)).abs() < 0.01, "{a} {v}");
        }
        assert!(rep.to_csv().starts_with("a,capacity_over_a\n"));
        assert!(matches!(
            long_memory_report(&ou, &[5.0], 101, 1e-9, 101),
            Err(Error::Precondition(_))
        ));
    }
}
