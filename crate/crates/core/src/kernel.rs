//! Covariance kernels and Gram matrices.
//!
//! A [`Kernel`] evaluates `R(s, t)` for points of `ℝ^d`. Stationary kinds are
//! functions of the Euclidean distance `‖s − t‖` only, which makes them
//! isotropic as well; the Brownian sheet is neither. The Riesz kernel
//! `|s − t|^(−β)` is singular on the diagonal and only enters Gram matrices
//! through a cell-averaged self-energy.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point of the parameter space `ℝ^d`.
pub type Point = Vec<f64>;

/// Piecewise-linear table of covariance values against distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    x: Vec<f64>,
    r: Vec<f64>,
}

impl Table {
    /// Builds a table from `(distance, value)` pairs. Distances must start at
    /// zero and increase strictly; `R(0)` must be positive and dominate every
    /// other entry in absolute value.
    pub fn new(entries: &[[f64; 2]]) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidInput("table needs at least two rows".into()));
        }
        let x: Vec<f64> = entries.iter().map(|e| e[0]).collect();
        let r: Vec<f64> = entries.iter().map(|e| e[1]).collect();
        if x.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table entries must be finite".into()));
        }
        if x[0] != 0.0 {
            return Err(Error::InvalidInput("table must start at distance 0".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "table distances must be strictly increasing".into(),
            ));
        }
        if r[0] <= 0.0 {
            return Err(Error::InvalidInput("table must have R(0) > 0".into()));
        }
        if r.iter().any(|v| v.abs() > r[0]) {
            return Err(Error::InvalidInput("|R(x)| must not exceed R(0)".into()));
        }
        Ok(Self { x, r })
    }

    /// Linear interpolation, clamped to the end values outside the table.
    pub fn eval(&self, d: f64) -> f64 {
        let last = self.x.len() - 1;
        if d <= self.x[0] {
            return self.r[0];
        }
        if d >= self.x[last] {
            return self.r[last];
        }
        let k = self.x.partition_point(|&xi| xi <= d) - 1;
        let t = (d - self.x[k]) / (self.x[k + 1] - self.x[k]);
        (1.0 - t) * self.r[k] + t * self.r[k + 1]
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.r.windows(2).all(|w| w[1] <= w[0])
    }

    /// Value beyond the last tabulated distance.
    pub fn tail_value(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn max_distance(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.x
    }

    fn entries(&self) -> Vec<[f64; 2]> {
        self.x.iter().zip(&self.r).map(|(&x, &r)| [x, r]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `exp(−r²/(2ℓ²))`.
    GaussianSq { scale: f64 },
    /// `exp(−r/ℓ)`.
    OrnsteinUhlenbeck { scale: f64 },
    /// `(1 + (r/ℓ)²)^(−β/2)`, regularly varying with index `−β`.
    LongMemory { scale: f64, beta: f64 },
    /// `r^(−β)`, singular at `r = 0`.
    Riesz { beta: f64 },
    /// `∏ⱼ min(sⱼ, tⱼ)` on `[0, ∞)^d`.
    BrownianSheet,
    /// Monotone table of `R` against distance.
    IsotropicTabulated { table: Table },
    /// Table of `R` against the lag of a one-dimensional process.
    Tabulated1D { table: Table },
}

/// A covariance kernel on `ℝ^d`. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct Kernel {
    kind: KernelKind,
    dim: usize,
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("scale must be positive, got {scale}")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("beta must lie in (0, 1), got {beta}")))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidInput("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

impl Kernel {
    pub fn gaussian_sq(scale: f64, dim: usize) -> Result<Self> {
        check_scale(scale)?;
        check_dim(dim)?;
        Ok(Self { kind: KernelKind::GaussianSq { scale }, dim })
    }

    pub fn ornstein_uhlenbeck(scale: f64, dim: usize) -> Result<Self> {
        check_scale(scale)?;
        check_dim(dim)?;
        Ok(Self { kind: KernelKind::OrnsteinUhlenbeck { scale }, dim })
    }

    pub fn long_memory(scale: f64, beta: f64, dim: usize) -> Result<Self> {
        check_scale(scale)?;
        check_beta(beta)?;
        check_dim(dim)?;
        Ok(Self { kind: KernelKind::LongMemory { scale, beta }, dim })
    }

    pub fn riesz(beta: f64, dim: usize) -> Result<Self> {
        check_beta(beta)?;
        check_dim(dim)?;
        Ok(Self { kind: KernelKind::Riesz { beta }, dim })
    }

    pub fn brownian_sheet(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { kind: KernelKind::BrownianSheet, dim })
    }

    pub fn isotropic_tabulated(table: Table, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !table.is_nonincreasing() {
            return Err(Error::InvalidInput(
                "isotropic table must be nonincreasing in distance".into(),
            ));
        }
        Ok(Self { kind: KernelKind::IsotropicTabulated { table }, dim })
    }

    pub fn tabulated_1d(table: Table) -> Result<Self> {
        Ok(Self { kind: KernelKind::Tabulated1D { table }, dim: 1 })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self.kind, KernelKind::BrownianSheet)
    }

    /// Every stationary kind here depends on `‖s − t‖` only.
    pub fn is_isotropic(&self) -> bool {
        self.is_stationary()
    }

    pub fn singular_diagonal(&self) -> bool {
        matches!(self.kind, KernelKind::Riesz { .. })
    }

    /// Whether the radial profile is nonincreasing in distance.
    pub fn is_nonincreasing(&self) -> bool {
        match &self.kind {
            KernelKind::GaussianSq { .. }
            | KernelKind::OrnsteinUhlenbeck { .. }
            | KernelKind::LongMemory { .. }
            | KernelKind::Riesz { .. } => true,
            KernelKind::IsotropicTabulated { table } | KernelKind::Tabulated1D { table } => {
                table.is_nonincreasing()
            }
            KernelKind::BrownianSheet => false,
        }
    }

    /// Whether the profile has two continuous derivatives at every lag.
    pub fn is_twice_differentiable(&self) -> bool {
        matches!(
            self.kind,
            KernelKind::GaussianSq { .. } | KernelKind::LongMemory { .. }
        )
    }

    /// Natural length scale, used to size default search brackets.
    pub fn length_scale(&self) -> f64 {
        match &self.kind {
            KernelKind::GaussianSq { scale }
            | KernelKind::OrnsteinUhlenbeck { scale }
            | KernelKind::LongMemory { scale, .. } => *scale,
            KernelKind::IsotropicTabulated { table } | KernelKind::Tabulated1D { table } => {
                table.max_distance()
            }
            KernelKind::Riesz { .. } | KernelKind::BrownianSheet => 1.0,
        }
    }

    /// `R(0)` for stationary, nonsingular kinds.
    pub fn variance(&self) -> Option<f64> {
        match &self.kind {
            KernelKind::Riesz { .. } | KernelKind::BrownianSheet => None,
            _ => self.profile(0.0).ok(),
        }
    }

    /// Radial profile `R(r)`, `r = ‖s − t‖`, of a stationary kernel.
    pub fn profile(&self, r: f64) -> Result<f64> {
        let r = r.abs();
        if !r.is_finite() {
            return Err(Error::Domain(format!("lag {r} is not finite")));
        }
        match &self.kind {
            KernelKind::GaussianSq { scale } => {
                let z = r / scale;
                Ok((-0.5 * z * z).exp())
            }
            KernelKind::OrnsteinUhlenbeck { scale } => Ok((-r / scale).exp()),
            KernelKind::LongMemory { scale, beta } => {
                let z = r / scale;
                Ok((1.0 + z * z).powf(-0.5 * beta))
            }
            KernelKind::Riesz { beta } => {
                if r == 0.0 {
                    Err(Error::SingularDiagonal)
                } else {
                    Ok(r.powf(-beta))
                }
            }
            KernelKind::IsotropicTabulated { table } | KernelKind::Tabulated1D { table } => {
                Ok(table.eval(r))
            }
            KernelKind::BrownianSheet => Err(Error::Precondition(
                "Brownian sheet covariance is not stationary".into(),
            )),
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate in {p:?}")));
        }
        if matches!(self.kind, KernelKind::BrownianSheet) && p.iter().any(|&v| v < 0.0) {
            return Err(Error::Domain(format!(
                "Brownian sheet needs nonnegative coordinates, got {p:?}"
            )));
        }
        Ok(())
    }

    /// `R(s, t)`.
    pub fn eval(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        self.check_point(s)?;
        self.check_point(t)?;
        self.eval_unchecked(s, t)
    }

    fn eval_unchecked(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        match self.kind {
            KernelKind::BrownianSheet => Ok(s.iter().zip(t).map(|(a, b)| a.min(*b)).product()),
            _ => self.profile(distance(s, t)),
        }
    }

    /// Self-energy of a cell of width `h` for the Riesz kernel: the mean of
    /// `|u − v|^(−β)` over `[0, h]²`.
    pub fn riesz_cell_energy(beta: f64, h: f64) -> f64 {
        2.0 * h.powf(-beta) / ((1.0 - beta) * (2.0 - beta))
    }
}

/// Euclidean distance.
pub fn distance(s: &[f64], t: &[f64]) -> f64 {
    if s.len() == 1 {
        return (s[0] - t[0]).abs();
    }
    s.iter()
        .zip(t)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Gram matrix `Q_ij = R(p_i, p_j)`.
///
/// For the Riesz kernel the diagonal holds the cell-averaged self-energy for
/// cells of width `cell_width`, which is then required. Entries are computed
/// once per unordered pair, so the result is exactly symmetric and does not
/// depend on the number of worker threads.
pub fn gram(kernel: &Kernel, points: &[Point], cell_width: Option<f64>) -> Result<DMatrix<f64>> {
    for p in points {
        kernel.check_point(p)?;
    }
    let diag_override = match kernel.kind {
        KernelKind::Riesz { beta } => match cell_width {
            Some(h) if h > 0.0 && h.is_finite() => Some(Kernel::riesz_cell_energy(beta, h)),
            Some(h) => {
                return Err(Error::InvalidInput(format!("cell width must be positive, got {h}")))
            }
            None => return Err(Error::SingularDiagonal),
        },
        _ => None,
    };
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| match (i == j, diag_override) {
                    (true, Some(d)) => Ok(d),
                    _ => kernel.eval_unchecked(&points[i], &points[j]),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut q = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            q[(i, i + k)] = v;
            q[(i + k, i)] = v;
        }
    }
    Ok(q)
}

/// Numerical PSD check: Cholesky of `Q + jitter·I`. Returns the jitter used.
pub fn check_psd(q: &DMatrix<f64>, jitter: f64) -> Result<f64> {
    let mut m = q.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    match nalgebra::Cholesky::new(m) {
        Some(_) => Ok(jitter),
        None => Err(Error::CholeskyFailure { jitter }),
    }
}

/// JSON form of a kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        let dim = spec.dim.unwrap_or(1);
        let scale = spec.scale.unwrap_or(1.0);
        let need_beta = || {
            spec.beta
                .ok_or_else(|| Error::InvalidInput(format!("kind {} needs beta", spec.kind)))
        };
        let need_table = || {
            spec.table
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("kind tabulated needs table".into()))
                .and_then(Table::new)
        };
        match spec.kind.as_str() {
            "ou" => Kernel::ornstein_uhlenbeck(scale, dim),
            "gauss_sq" => Kernel::gaussian_sq(scale, dim),
            "long_memory" => Kernel::long_memory(scale, need_beta()?, dim),
            "riesz" => Kernel::riesz(need_beta()?, dim),
            "brownian_sheet" => Kernel::brownian_sheet(dim),
            "tabulated" if dim == 1 => Kernel::tabulated_1d(need_table()?),
            "tabulated" => Kernel::isotropic_tabulated(need_table()?, dim),
            other => Err(Error::InvalidInput(format!("unknown kernel kind {other:?}"))),
        }
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        let dim = Some(k.dim);
        let blank = |kind: &str| KernelSpec {
            kind: kind.into(),
            scale: None,
            beta: None,
            dim,
            table: None,
        };
        match k.kind {
            KernelKind::GaussianSq { scale } => KernelSpec { scale: Some(scale), ..blank("gauss_sq") },
            KernelKind::OrnsteinUhlenbeck { scale } => KernelSpec { scale: Some(scale), ..blank("ou") },
            KernelKind::LongMemory { scale, beta } => KernelSpec {
                scale: Some(scale),
                beta: Some(beta),
                ..blank("long_memory")
            },
            KernelKind::Riesz { beta } => KernelSpec { beta: Some(beta), ..blank("riesz") },
            KernelKind::BrownianSheet => blank("brownian_sheet"),
            KernelKind::IsotropicTabulated { table } | KernelKind::Tabulated1D { table } => {
                KernelSpec { table: Some(table.entries()), ..blank("tabulated") }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ou_at_unit_lag() {
        let k = Kernel::ornstein_uhlenbeck(1.0, 1).unwrap();
        assert_relative_eq!(k.eval(&[0.0], &[1.0]).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(k.eval(&[0.0], &[1.0]).unwrap(), 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_on_diagonal_is_one() {
        let k = Kernel::gaussian_sq(1.0, 1).unwrap();
        assert_eq!(k.eval(&[0.3], &[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn brownian_sheet_product_of_minima() {
        let k = Kernel::brownian_sheet(2).unwrap();
        assert_eq!(k.eval(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(k.eval(&[-1.0, 2.0], &[2.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn riesz_diagonal_is_singular() {
        let k = Kernel::riesz(0.5, 1).unwrap();
        assert!(matches!(k.eval(&[0.2], &[0.2]), Err(Error::SingularDiagonal)));
        assert!(matches!(gram(&k, &[vec![0.0], vec![1.0]], None), Err(Error::SingularDiagonal)));
    }

    #[test]
    fn dimension_mismatch() {
        let k = Kernel::gaussian_sq(1.0, 2).unwrap();
        assert!(matches!(
            k.eval(&[0.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn gram_ou_two_points() {
        let k = Kernel::ornstein_uhlenbeck(1.0, 1).unwrap();
        let q = gram(&k, &[vec![0.0], vec![1.0]], None).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(q[(0, 0)], 1.0);
        assert_eq!(q[(1, 1)], 1.0);
        assert_relative_eq!(q[(0, 1)], e, max_relative = 1e-15);
        assert_eq!(q[(0, 1)], q[(1, 0)]);
    }

    #[test]
    fn gram_riesz_cell_diagonal() {
        // Mean of |u−v|^(−1/2) over [0, ½]² is 2·(½)^(−½)/(½·3/2).
        let k = Kernel::riesz(0.5, 1).unwrap();
        let pts = vec![vec![0.0], vec![0.5], vec![1.0]];
        let q = gram(&k, &pts, Some(0.5)).unwrap();
        let diag = 2.0 * 0.5f64.powf(-0.5) / (0.5 * 1.5);
        for i in 0..3 {
            assert_relative_eq!(q[(i, i)], diag, max_relative = 1e-14);
        }
        assert_relative_eq!(q[(0, 0)], 3.7712, epsilon = 1e-4);
        assert_relative_eq!(q[(0, 1)], 0.5f64.powf(-0.5), max_relative = 1e-15);
        assert_relative_eq!(q[(0, 2)], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn riesz_cell_energy_matches_quadrature() {
        // mean over [0,h]² of |u−v|^(−β) = 2/h² ∫₀ʰ (h − r) r^(−β) dr; with
        // r = h·s^(1/(1−β)) the integrand becomes smooth and a midpoint rule
        // converges quickly.
        for &(beta, h) in &[(0.25f64, 1.0f64), (0.5, 0.5), (0.75, 0.01)] {
            let p = 1.0 / (1.0 - beta);
            let m = 200_000;
            let mut acc = 0.0;
            for i in 0..m {
                let s = (i as f64 + 0.5) / m as f64;
                acc += p * (1.0 - s.powf(p));
            }
            let mean = 2.0 * h.powf(-beta) * acc / m as f64;
            assert_relative_eq!(mean, Kernel::riesz_cell_energy(beta, h), max_relative = 1e-8);
        }
    }

    #[test]
    fn single_point_gram() {
        let k = Kernel::long_memory(2.0, 0.3, 1).unwrap();
        let q = gram(&k, &[vec![4.0]], None).unwrap();
        assert_eq!(q.shape(), (1, 1));
        assert_eq!(q[(0, 0)], 1.0);
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let t = Table::new(&[[0.0, 1.0], [1.0, 0.5], [2.0, 0.0]]).unwrap();
        assert_eq!(t.eval(0.5), 0.75);
        assert_eq!(t.eval(5.0), 0.0);
        let k = Kernel::isotropic_tabulated(t, 2).unwrap();
        assert_relative_eq!(k.eval(&[0.0, 0.0], &[0.6, 0.8]).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn isotropic_table_must_be_monotone() {
        let t = Table::new(&[[0.0, 1.0], [1.0, 0.2], [2.0, 0.4]]).unwrap();
        assert!(Kernel::isotropic_tabulated(t.clone(), 2).is_err());
        assert!(Kernel::tabulated_1d(t).is_ok());
    }

    #[test]
    fn spec_round_trip_and_unknown_fields() {
        let k: Kernel = serde_json::from_str(r#"{"kind":"long_memory","scale":2.0,"beta":0.5}"#).unwrap();
        assert_eq!(k, Kernel::long_memory(2.0, 0.5, 1).unwrap());
        let back: Kernel = serde_json::from_str(&serde_json::to_string(&k).unwrap()).unwrap();
        assert_eq!(back, k);
        assert!(serde_json::from_str::<Kernel>(r#"{"kind":"ou","colour":1}"#).is_err());
        assert!(serde_json::from_str::<Kernel>(r#"{"kind":"matern"}"#).is_err());
        assert!(serde_json::from_str::<Kernel>(r#"{"kind":"riesz"}"#).is_err());
        let t: Kernel =
            serde_json::from_str(r#"{"kind":"tabulated","dim":2,"table":[[0,1],[1,0.5]]}"#).unwrap();
        assert!(matches!(t.kind(), KernelKind::IsotropicTabulated { .. }));
    }
}
