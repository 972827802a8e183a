//! Capacities of paths in `ℝ^d` and the search for the least-capacity path.
//!
//! For a fixed path the problem is the one-dimensional one with the kernel
//! evaluated along the path. If
//! `R(a, ξ(u)) + R(ξ(u), b) ≥ (R(a,a) + 2R(a,b) + R(b,b))/2` holds along a
//! path `ξ` from `a` to `b`, the endpoint measure `½δ_a + ½δ_b` is optimal
//! on it and no path does better; [`check_endpoint_condition`] tests this.
//! Otherwise [`path_search`] runs a plain hill climb, which is a heuristic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{min_energy, CapacityReport};
use crate::geometry::{discretize, straight_line, Path};
use crate::kernel::{Kernel, KernelKind, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointCondition {
    pub holds: bool,
    /// Minimum over the grid of `R(a,ξ) + R(ξ,b) − (R(a,a) + 2R(a,b) + R(b,b))/2`.
    pub margin: f64,
    /// `4/(R(a,a) + 2R(a,b) + R(b,b))` when the condition holds.
    pub capacity_if_holds: Option<f64>,
}

/// Checks the endpoint condition on `grid` uniform parameter points of `path`.
///
/// The condition can only hold when `R(a,a) = R(b,b)`; unequal variances
/// (beyond `1e−9`) are reported as failing regardless of the grid.
pub fn check_endpoint_condition(kernel: &Kernel, path: &Path, grid: usize) -> Result<EndpointCondition> {
    if path.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: path.dim() });
    }
    let (a, b) = (path.start(), path.end());
    let raa = kernel.eval(a, a)?;
    let rab = kernel.eval(a, b)?;
    let rbb = kernel.eval(b, b)?;
    let rhs = 0.5 * (raa + 2.0 * rab + rbb);
    let g = discretize(path, grid)?;
    let mut margin = f64::INFINITY;
    for p in &g.points {
        margin = margin.min(kernel.eval(a, p)? + kernel.eval(p, b)? - rhs);
    }
    let slack = 1e-12 * rhs.abs().max(1.0);
    let holds = rhs > 0.0 && (raa - rbb).abs() <= 1e-9 && margin >= -slack;
    Ok(EndpointCondition { holds, margin, capacity_if_holds: holds.then(|| 2.0 / rhs) })
}

/// Capacity of a fixed path on `n` uniform parameter points.
pub fn path_capacity(kernel: &Kernel, path: &Path, n: usize, tol: f64) -> Result<CapacityReport> {
    min_energy(kernel, path, n, tol)
}

/// Settings for random path perturbation and hill climbing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSearchConfig {
    /// Interior vertices of the polyline.
    pub control_points: usize,
    /// Standard deviation of the Gaussian moves of each coordinate.
    pub perturbation_scale: f64,
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
    /// Grid size for each inner capacity solve.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Box `[lo, hi]^d` the control points are kept in.
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
}

fn default_grid_n() -> usize {
    201
}

fn default_tol() -> f64 {
    crate::DEFAULT_TOL
}

impl Default for PathSearchConfig {
    fn default() -> Self {
        Self {
            control_points: 8,
            perturbation_scale: 0.1,
            restarts: 4,
            iters: 200,
            seed: 0,
            grid_n: default_grid_n(),
            tol: default_tol(),
            bounds: None,
        }
    }
}

impl PathSearchConfig {
    fn validate(&self) -> Result<()> {
        if self.control_points == 0 || self.restarts == 0 {
            return Err(Error::InvalidInput("control_points and restarts must be positive".into()));
        }
        if !(self.perturbation_scale >= 0.0 && self.perturbation_scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "perturbation_scale must be nonnegative, got {}",
                self.perturbation_scale
            )));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidInput(format!("grid_n must be at least 2, got {}", self.grid_n)));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi) {
                return Err(Error::InvalidInput(format!("empty bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    fn clamp(&self, kernel: &Kernel, x: f64) -> f64 {
        let (mut lo, hi) = self.bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        if matches!(kernel.kind(), KernelKind::BrownianSheet) {
            lo = lo.max(0.0);
        }
        x.clamp(lo, hi)
    }
}

/// Straight polyline from `a` to `b` with `k` evenly spaced interior vertices.
fn straight_polyline(a: &[f64], b: &[f64], k: usize) -> Vec<Point> {
    (0..=k + 1)
        .map(|i| {
            let t = i as f64 / (k + 1) as f64;
            a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
        })
        .collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn polyline_energy(kernel: &Kernel, vertices: &[Point], cfg: &PathSearchConfig) -> Result<(Path, CapacityReport)> {
    let path = Path::new(vertices.to_vec(), None)?;
    let report = min_energy(kernel, &path, cfg.grid_n, cfg.tol)?;
    Ok((path, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraightLineCheck {
    pub straight_energy: f64,
    pub best_perturbed_energy: f64,
    pub perturbed_energies: Vec<f64>,
}

/// Minimal energy of the straight line from `a` to `b` against
/// `cfg.restarts` random polylines with the same endpoints, each interior
/// vertex displaced by independent Gaussian noise of scale
/// `cfg.perturbation_scale`.
///
/// For an isotropic kernel with nonincreasing profile the straight line has
/// the largest minimal energy of all paths.
pub fn straight_line_optimality_check(
    kernel: &Kernel,
    a: &[f64],
    b: &[f64],
    cfg: &PathSearchConfig,
) -> Result<StraightLineCheck> {
    if !(kernel.is_isotropic() && kernel.is_nonincreasing()) {
        return Err(Error::Precondition(
            "straight-line optimality needs an isotropic, nonincreasing kernel".into(),
        ));
    }
    cfg.validate()?;
    straight_line(a, b)?;
    let base = straight_polyline(a, b, cfg.control_points);
    let straight_energy = polyline_energy(kernel, &base, cfg)?.1.energy;
    let perturbed_energies = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(cfg.seed, r as u64);
            let mut v = base.clone();
            let last = v.len() - 1;
            for p in &mut v[1..last] {
                for x in p.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = cfg.clamp(kernel, *x + cfg.perturbation_scale * z);
                }
            }
            Ok(polyline_energy(kernel, &v, cfg)?.1.energy)
        })
        .collect::<Result<Vec<f64>>>()?;
    let best_perturbed_energy = perturbed_energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StraightLineCheck { straight_energy, best_perturbed_energy, perturbed_energies })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub path: Path,
    pub report: CapacityReport,
    pub straight_energy: f64,
    /// `(iteration, best minimal energy so far)` of the winning restart.
    pub trace: Vec<(usize, f64)>,
    pub restart: usize,
}

impl SearchResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,energy\n");
        for &(i, e) in &self.trace {
            out.push_str(&format!("{i},{}\n", crate::report::csv_float(e)));
        }
        out
    }
}

/// Hill climb over polyline paths from `a` to `b`, maximizing the minimal
/// energy (equivalently minimizing the capacity).
///
/// Every restart starts from the straight line and, at each iteration, moves
/// one randomly chosen interior vertex by Gaussian noise; the move is kept
/// iff the minimal energy increases. Restarts use independent random streams
/// derived from `cfg.seed` and run in parallel; the result does not depend
/// on the number of threads. No optimality is claimed.
pub fn path_search(kernel: &Kernel, a: &[f64], b: &[f64], cfg: &PathSearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    straight_line(a, b)?;
    let base = straight_polyline(a, b, cfg.control_points);
    let (base_path, base_report) = polyline_energy(kernel, &base, cfg)?;
    let straight_energy = base_report.energy;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(cfg.seed, r as u64);
            let mut v = base.clone();
            let mut best = (base_path.clone(), base_report.clone());
            let mut trace = vec![(0, straight_energy)];
            for it in 1..=cfg.iters {
                let k = rng.random_range(1..=cfg.control_points);
                let mut cand = v.clone();
                for x in cand[k].iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = cfg.clamp(kernel, *x + cfg.perturbation_scale * z);
                }
                match polyline_energy(kernel, &cand, cfg) {
                    Ok((p, rep)) if rep.energy > best.1.energy => {
                        v = cand;
                        best = (p, rep);
                    }
                    Ok(_) | Err(Error::NonConvergence { .. }) | Err(Error::DegeneratePath(_)) => {}
                    Err(e) => return Err(e),
                }
                trace.push((it, best.1.energy));
            }
            Ok((best, trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut winner = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.0 .1.energy > runs[winner].0 .1.energy {
            winner = i;
        }
    }
    let ((path, report), trace) = runs.into_iter().nth(winner).expect("at least one restart");
    Ok(SearchResult { path, report, straight_energy, trace, restart: winner })
}
