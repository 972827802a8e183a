//! One-dimensional structure on an interval `[0, a]`: closed-form regimes
//! of the minimal-energy measure, limiting shapes, the spectral function
//! `h_a`, and the critical lengths where the regimes change.
//!
//! All conditions are continuum inequalities; they are checked on finite
//! `t`-grids and the worst margin is reported so callers can refine.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::capacity::{certify, min_energy, DiscreteMeasure};
use crate::geometry::straight_line;
use crate::kernel::{gram, Kernel, KernelKind};
use crate::{Error, Result};

/// `x_{a,b}(t)` on a uniform grid of `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCurve {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    /// `min_t x(t) − 1`; nonnegative up to discretization for optimal measures.
    pub level_violation: f64,
    pub capacity: f64,
}

impl ShapeCurve {
    pub fn to_csv(&self) -> String {
        let rows: Vec<[f64; 2]> = self.t.iter().zip(&self.x).map(|(&t, &x)| [t, x]).collect();
        crate::report::to_csv(&["t", "x"], rows.iter().map(|r| r.as_slice()))
    }
}

fn stationary_1d(kernel: &Kernel) -> Result<()> {
    if !kernel.is_stationary() || kernel.singular_diagonal() {
        return Err(Error::Precondition(
            "a stationary kernel with finite variance is required".into(),
        ));
    }
    if kernel.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: kernel.dim() });
    }
    Ok(())
}

fn check_length(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("interval length must be positive, got {a}")))
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidInput(format!("grid needs at least 2 points, got {n}")))
    } else {
        Ok(())
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * (i as f64 / m) })
        .collect()
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let (mut x, mut fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for end in [lo, hi] {
        let fe = f(end);
        if fe < fx {
            x = end;
            fx = fe;
        }
    }
    (x, fx)
}

/// Values of `C · Σⱼ R(t, a + (b−a)u_j) w_j` at the given `t`.
pub fn shape_at(kernel: &Kernel, a: f64, b: f64, m: &DiscreteMeasure, capacity: f64, t: &[f64]) -> Result<Vec<f64>> {
    let locs: Vec<f64> = m.u.iter().map(|&u| a + (b - a) * u).collect();
    t.iter()
        .map(|&ti| {
            let mut s = 0.0;
            for (&x, &w) in locs.iter().zip(&m.w) {
                if w != 0.0 {
                    s += w * kernel.eval(&[ti], &[x])?;
                }
            }
            Ok(capacity * s)
        })
        .collect()
}

/// Limiting shape of the field conditioned to exceed a high level on `[a, b]`.
///
/// `m` must be certified optimal for its own locations: both certificate
/// residuals must be at most `cert_tol·E`.
pub fn limiting_shape(
    kernel: &Kernel,
    a: f64,
    b: f64,
    m: &DiscreteMeasure,
    t_grid: usize,
    cert_tol: f64,
) -> Result<ShapeCurve> {
    if kernel.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: kernel.dim() });
    }
    if kernel.singular_diagonal() {
        return Err(Error::Precondition("limiting shapes need a finite-variance kernel".into()));
    }
    if !(a < b) {
        return Err(Error::InvalidInput(format!("need a < b, got [{a}, {b}]")));
    }
    check_grid(t_grid)?;
    let points: Vec<Vec<f64>> = m.u.iter().map(|&u| vec![a + (b - a) * u]).collect();
    let q = gram(kernel, &points, None)?;
    let cert = certify(&q, m, 1e-12)?;
    let residual = cert.residual_min.max(cert.residual_support);
    if !(cert.energy > 0.0) || residual > cert_tol * cert.energy {
        return Err(Error::UncertifiedMeasure { residual: residual / cert.energy, tol: cert_tol });
    }
    let capacity = 1.0 / cert.energy;
    let t = grid(a, b, t_grid);
    let x = shape_at(kernel, a, b, m, capacity, &t)?;
    let level_violation = x.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    Ok(ShapeCurve { t, x, level_violation, capacity })
}

/// `h(x) = C · Σⱼ exp(i·a·u_j·x) w_j`.
pub fn spectral_h(a: f64, capacity: f64, m: &DiscreteMeasure, x_grid: &[f64]) -> Vec<Complex64> {
    x_grid
        .iter()
        .map(|&x| {
            let s: Complex64 = m
                .u
                .iter()
                .zip(&m.w)
                .map(|(&u, &w)| Complex64::from_polar(w, a * u * x))
                .sum();
            s * capacity
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub margin: f64,
}

/// `R(t) + R(a−t) − R(0) − R(a)` on a uniform grid of `[0, a]`.
fn two_atom_margins(kernel: &Kernel, a: f64, t_grid: usize) -> Result<Vec<f64>> {
    let r0 = kernel.profile(0.0)?;
    let ra = kernel.profile(a)?;
    grid(0.0, a, t_grid)
        .into_iter()
        .map(|t| Ok(kernel.profile(t)? + kernel.profile(a - t)? - r0 - ra))
        .collect()
}

fn zero_slack(kernel: &Kernel) -> Result<f64> {
    Ok(1e-12 * kernel.profile(0.0)?.abs().max(1.0))
}

/// Whether `½δ₀ + ½δ₁` is optimal on `[0, a]`: `R(t) + R(a−t) ≥ R(0) + R(a) > 0`.
pub fn two_atom_condition(kernel: &Kernel, a: f64, t_grid: usize) -> Result<ConditionCheck> {
    stationary_1d(kernel)?;
    check_length(a)?;
    check_grid(t_grid)?;
    let margin = two_atom_margins(kernel, a, t_grid)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let positive = kernel.profile(0.0)? + kernel.profile(a)? > 0.0;
    Ok(ConditionCheck { holds: positive && margin >= -zero_slack(kernel)?, margin })
}

/// Closed-form quantities of the three-atom measure
/// `(1−ε)/2 δ₀ + (1−ε)/2 δ₁ + ε δ_{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeAtom {
    pub eps: f64,
    pub capacity: f64,
    /// Whether `R(0) + R(a) > 2R(a/2)`, which makes `ε` a valid weight.
    pub midpoint_excess: bool,
    /// Worst grid value of the optimality condition on `[0, a/2]`.
    pub margin: f64,
    pub holds: bool,
}

pub fn three_atom_params(kernel: &Kernel, a: f64, t_grid: usize) -> Result<ThreeAtom> {
    stationary_1d(kernel)?;
    check_length(a)?;
    check_grid(t_grid)?;
    let r0 = kernel.profile(0.0)?;
    let ra = kernel.profile(a)?;
    let rh = kernel.profile(0.5 * a)?;
    let num = r0 + ra - 2.0 * rh;
    let den = 3.0 * r0 + ra - 4.0 * rh;
    let eps = num / den;
    let capacity = den / (r0 * r0 + r0 * ra - 2.0 * rh * rh);
    let midpoint_excess = num > 0.0;
    let mut margin = f64::INFINITY;
    for t in grid(0.0, 0.5 * a, t_grid) {
        let g = kernel.profile(t)? + kernel.profile(a - t)? - r0 - ra;
        let mid = kernel.profile(0.5 * a - t)? - rh;
        margin = margin.min((1.0 - eps) * g + 2.0 * eps * mid);
    }
    let holds = midpoint_excess && eps <= 1.0 && margin >= -zero_slack(kernel)?;
    Ok(ThreeAtom { eps, capacity, midpoint_excess, margin, holds })
}

/// Energy on `[0, a]` of `(1−ε)/2 δ₀ + (1−ε)/2 δ₁ + ε/2 δ_{1/2−d} + ε/2 δ_{1/2+d}`.
pub fn four_atom_energy(kernel: &Kernel, a: f64, eps: f64, d: f64) -> Result<f64> {
    let (locs, w) = four_atom_support(a, eps, d);
    let mut e = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            e += w[i] * w[j] * kernel.profile(locs[i] - locs[j])?;
        }
    }
    Ok(e)
}

fn four_atom_support(a: f64, eps: f64, d: f64) -> ([f64; 4], [f64; 4]) {
    let e = 0.5 * (1.0 - eps);
    (
        [0.0, a * (0.5 - d), a * (0.5 + d), a],
        [e, 0.5 * eps, 0.5 * eps, e],
    )
}

/// Best member of the four-atom family and its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourAtomFit {
    pub eps: f64,
    pub d: f64,
    pub energy: f64,
    pub capacity: f64,
    /// Atom locations in `[0, 1]` and their masses.
    pub measure: DiscreteMeasure,
    /// `max(0, E − min W)/E` over a fine grid of `[0, a]`.
    pub residual: f64,
}

/// Relative certificate residual accepted by [`four_atom_fit`].
pub const FOUR_ATOM_CERT_TOL: f64 = 1e-6;

/// Fits the four-atom family on `[0, a]` by nested golden-section search,
/// then certifies it against the continuum optimality condition.
pub fn four_atom_fit(kernel: &Kernel, a: f64) -> Result<FourAtomFit> {
    stationary_1d(kernel)?;
    check_length(a)?;
    let search_tol = 1e-8;
    let best_eps = |d: f64| -> (f64, f64) {
        golden_min(
            |eps| four_atom_energy(kernel, a, eps, d).unwrap_or(f64::INFINITY),
            0.0,
            1.0,
            search_tol,
        )
    };
    // The profile in d need not be unimodal on all of [0, ½]; bracket first.
    let scan = 200;
    let values: Vec<f64> = (0..=scan)
        .map(|k| best_eps(0.5 * k as f64 / scan as f64).1)
        .collect();
    let k = (0..=scan)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("scan is nonempty");
    let step = 0.5 / scan as f64;
    let lo = (k as f64 - 1.0).max(0.0) * step;
    let hi = ((k as f64 + 1.0) * step).min(0.5);
    let (d, energy) = golden_min(|d| best_eps(d).1, lo, hi, search_tol);
    let (eps, _) = best_eps(d);

    let (locs, w) = four_atom_support(a, eps, d);
    let potential = |t: f64| -> Result<f64> {
        let mut pot = 0.0;
        for (&x, &wx) in locs.iter().zip(&w) {
            pot += wx * kernel.profile(t - x)?;
        }
        Ok(pot)
    };
    let mut residual = 0.0f64;
    for t in grid(0.0, a, crate::DEFAULT_T_GRID) {
        residual = residual.max((energy - potential(t)?) / energy);
    }
    for (&x, &wx) in locs.iter().zip(&w) {
        if wx > 1e-12 {
            residual = residual.max((potential(x)? - energy).abs() / energy);
        }
    }
    if residual > FOUR_ATOM_CERT_TOL {
        return Err(Error::NotInRegime { a, residual });
    }
    let u = locs.iter().map(|x| x / a).collect();
    Ok(FourAtomFit {
        eps,
        d,
        energy,
        capacity: 1.0 / energy,
        measure: DiscreteMeasure::new(u, w.to_vec())?,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Critical {
    /// End of the two-atom regime.
    A1,
    /// End of the three-atom regime.
    A2,
}

/// Worst value of `R(t) + R(a−t) − R(0) − R(a)` on `[0, a]`, refined around
/// the grid minimizer.
fn two_atom_min(kernel: &Kernel, a: f64, t_grid: usize) -> Result<f64> {
    let m = two_atom_margins(kernel, a, t_grid)?;
    let k = (0..m.len()).min_by(|&i, &j| m[i].total_cmp(&m[j])).expect("nonempty");
    let h = a / (t_grid - 1) as f64;
    let lo = (k as f64 - 1.0).max(0.0) * h;
    let hi = ((k as f64 + 1.0) * h).min(a);
    let r0 = kernel.profile(0.0)?;
    let ra = kernel.profile(a)?;
    let g = |t: f64| {
        kernel.profile(t).unwrap_or(f64::NAN) + kernel.profile(a - t).unwrap_or(f64::NAN) - r0 - ra
    };
    let (_, refined) = golden_min(g, lo, hi, 1e-12 * a.max(1.0));
    Ok(m[k].min(refined))
}

/// `x''(a/2)` of the three-atom shape, by central differences with step `1e-4·a`.
pub fn three_atom_curvature(kernel: &Kernel, a: f64) -> Result<f64> {
    let p = three_atom_params(kernel, a, 2)?;
    let mid = 0.5 * a;
    let x = |t: f64| -> Result<f64> {
        Ok(p.capacity
            * (0.5 * (1.0 - p.eps) * (kernel.profile(t)? + kernel.profile(a - t)?)
                + p.eps * kernel.profile(t - mid)?))
    };
    let h = 1e-4 * a;
    Ok((x(mid + h)? - 2.0 * x(mid)? + x(mid - h)?) / (h * h))
}

/// Bisection for the length at which a regime ends.
///
/// `A1` tracks whether the two-atom condition holds; `A2` tracks the sign of
/// the midpoint curvature of the three-atom shape and needs a kernel with two
/// continuous derivatives.
pub fn critical_length(kernel: &Kernel, which: Critical, bracket: (f64, f64), tol: f64) -> Result<f64> {
    stationary_1d(kernel)?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid bracket ({lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    if which == Critical::A2 && !kernel.is_twice_differentiable() {
        return Err(Error::Precondition(
            "a2 detection needs a twice continuously differentiable covariance".into(),
        ));
    }
    let slack = zero_slack(kernel)?;
    let inside = |a: f64| -> Result<bool> {
        match which {
            Critical::A1 => Ok(two_atom_min(kernel, a, crate::DEFAULT_T_GRID)? >= -slack),
            Critical::A2 => Ok(three_atom_curvature(kernel, a)? > 0.0),
        }
    };
    let (mut a, mut b) = (lo, hi);
    let at_lo = inside(a)?;
    if at_lo == inside(b)? {
        return Err(Error::NoSignChange { lo, hi });
    }
    while 0.5 * (b - a) > tol {
        let m = 0.5 * (a + b);
        if inside(m)? == at_lo {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Default bisection bracket for `which`, in units of the kernel's length scale.
pub fn default_bracket(kernel: &Kernel, which: Critical) -> (f64, f64) {
    let s = kernel.length_scale();
    match which {
        Critical::A1 => (s, 3.0 * s),
        Critical::A2 => (3.0 * s, 5.0 * s),
    }
}

/// Exact minimal-energy measure of the unit-scale OU process on `[0, a]`,
/// discretized on `n` points: atoms `1/(a+2)` at both ends and the remaining
/// mass spread evenly over the interior points.
pub fn ou_closed_form(a: f64, n: usize) -> Result<(DiscreteMeasure, f64)> {
    check_length(a)?;
    if n < 3 {
        return Err(Error::InvalidInput(format!("need n ≥ 3, got {n}")));
    }
    let end = 1.0 / (a + 2.0);
    let inner = a / (a + 2.0) / (n - 2) as f64;
    let mut w = vec![inner; n];
    w[0] = end;
    w[n - 1] = end;
    let u = crate::geometry::uniform_params(n);
    Ok((DiscreteMeasure { u, w }, 0.5 * (a + 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    TwoAtom,
    ThreeAtom,
    FourAtom,
    Diffuse,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    pub regime: Regime,
    pub eps: Option<f64>,
    pub d: Option<f64>,
    pub capacity: f64,
}

/// Identifies which closed-form regime applies on `[0, a]`, falling back to
/// the general solver (`Unknown`) when none certifies.
pub fn classify_regime(kernel: &Kernel, a: f64, t_grid: usize) -> Result<RegimeResult> {
    stationary_1d(kernel)?;
    check_length(a)?;
    if let KernelKind::OrnsteinUhlenbeck { scale } = kernel.kind() {
        return Ok(RegimeResult {
            regime: Regime::Diffuse,
            eps: None,
            d: None,
            capacity: 0.5 * (a / scale + 2.0),
        });
    }
    if two_atom_condition(kernel, a, t_grid)?.holds {
        let capacity = 2.0 / (kernel.profile(0.0)? + kernel.profile(a)?);
        return Ok(RegimeResult { regime: Regime::TwoAtom, eps: None, d: None, capacity });
    }
    let three = three_atom_params(kernel, a, t_grid)?;
    if three.holds {
        return Ok(RegimeResult {
            regime: Regime::ThreeAtom,
            eps: Some(three.eps),
            d: None,
            capacity: three.capacity,
        });
    }
    if let Ok(fit) = four_atom_fit(kernel, a) {
        return Ok(RegimeResult {
            regime: Regime::FourAtom,
            eps: Some(fit.eps),
            d: Some(fit.d),
            capacity: fit.capacity,
        });
    }
    let path = straight_line(&[0.0], &[a])?;
    let report = match min_energy(kernel, &path, crate::DEFAULT_N, crate::DEFAULT_TOL) {
        Ok(r) => r,
        Err(Error::NonConvergence { best, .. }) => *best,
        Err(e) => return Err(e),
    };
    Ok(RegimeResult { regime: Regime::Unknown, eps: None, d: None, capacity: report.capacity })
}
