//! Minimal-energy measures on a discretized path.
//!
//! The energy of a probability vector `w` on grid points `p_1..p_n` is
//! `wᵀQw` with `Q_ij = R(p_i, p_j)`. Its minimum over the simplex is the
//! reciprocal of the path capacity. A measure is optimal iff its potential
//! `W = Qw` satisfies `min_i W_i = wᵀQw > 0`, with `W_i = wᵀQw` on the
//! support; [`certify`] reports how far a measure is from that.
//!
//! The solver runs Frank–Wolfe with away steps from the uniform measure,
//! then polishes the result with a primal active-set method that solves the
//! KKT system on the current support exactly.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{discretize, ParamGrid, Path};
use crate::kernel::{gram, Kernel};
use crate::report::infinite_as_null;
use crate::{Error, Result};

/// Nonnegative weights summing to one at parameter locations in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if u.len() != w.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: w.len() });
        }
        if u.is_empty() {
            return Err(Error::InvalidInput("measure needs at least one location".into()));
        }
        if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput("locations must lie in [0, 1]".into()));
        }
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { u, w })
    }

    /// Uniform weights on the grid `i/(n−1)`.
    pub fn uniform(n: usize) -> Self {
        let u = crate::geometry::uniform_params(n.max(2));
        let n = u.len();
        Self { u, w: vec![1.0 / n as f64; n] }
    }

    /// Unit mass at grid index `i` of the `n`-point grid.
    pub fn point_mass(n: usize, i: usize) -> Self {
        let u = crate::geometry::uniform_params(n);
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self { u, w }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.w.iter().sum()
    }

    /// The image under `v ↦ 1 − v` on a symmetric grid (weights reversed).
    pub fn reflected(&self) -> Self {
        Self { u: self.u.clone(), w: self.w.iter().rev().copied().collect() }
    }

    /// `½(w + reverse(w))`.
    pub fn symmetrized(&self) -> Self {
        let w = self
            .w
            .iter()
            .zip(self.w.iter().rev())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Self { u: self.u.clone(), w }
    }

    /// `max_i |w_i − w_{n+1−i}|`.
    pub fn asymmetry(&self) -> f64 {
        self.w
            .iter()
            .zip(self.w.iter().rev())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<[f64; 2]> = self.u.iter().zip(&self.w).map(|(&u, &w)| [u, w]).collect();
        crate::report::to_csv(&["u", "weight"], rows.iter().map(|r| r.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality-gap tolerance: stop once `E − min W ≤ tol·E`.
    pub tol: f64,
    /// Frank–Wolfe iteration cap; `None` means `200·n`.
    pub max_iters: Option<usize>,
    /// Weights above this count as support in the certificate.
    pub support_eps: f64,
    /// Run the active-set polish after Frank–Wolfe.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: crate::DEFAULT_TOL, max_iters: None, support_eps: 1e-12, polish: true }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Result of a minimal-energy solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// Minimal energy `E*`.
    pub energy: f64,
    /// `1/E*`, or `+∞` (written as `null`) when the energy vanishes.
    #[serde(with = "infinite_as_null")]
    pub capacity: f64,
    pub measure: DiscreteMeasure,
    /// `W_i = Σⱼ Q_ij w_j` on the whole grid.
    pub potential: Vec<f64>,
    /// `max(0, E* − min_i W_i)`.
    pub residual_min: f64,
    /// `max |W_i − E*|` over the support.
    pub residual_support: f64,
    pub iterations: usize,
    pub n: usize,
    pub tol: f64,
    pub converged: bool,
    pub zero_energy: bool,
    pub polished: bool,
}

/// `wᵀQw`.
pub fn energy(q: &DMatrix<f64>, m: &DiscreteMeasure) -> Result<f64> {
    if q.nrows() != m.len() || q.ncols() != m.len() {
        return Err(Error::DimensionMismatch { expected: q.nrows(), got: m.len() });
    }
    let w = &m.w;
    Ok(dot(w, &matvec(q, w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub energy: f64,
    pub min_potential: f64,
    /// `max(0, E − min_i W_i)`; zero (with `E > 0`) certifies optimality.
    pub residual_min: f64,
    /// `max |W_i − E|` over `{i : w_i > support_eps}`.
    pub residual_support: f64,
}

impl Certificate {
    pub fn is_optimal(&self, tol: f64) -> bool {
        self.energy > 0.0 && self.residual_min <= tol && self.residual_support <= tol
    }
}

pub fn certify(q: &DMatrix<f64>, m: &DiscreteMeasure, support_eps: f64) -> Result<Certificate> {
    if q.nrows() != m.len() {
        return Err(Error::DimensionMismatch { expected: q.nrows(), got: m.len() });
    }
    let potential = matvec(q, &m.w);
    Ok(certificate_from(&m.w, &potential, support_eps))
}

fn certificate_from(w: &[f64], potential: &[f64], support_eps: f64) -> Certificate {
    let e = dot(w, potential);
    let min_potential = potential.iter().copied().fold(f64::INFINITY, f64::min);
    let residual_support = w
        .iter()
        .zip(potential)
        .filter(|(wi, _)| **wi > support_eps)
        .map(|(_, pi)| (pi - e).abs())
        .fold(0.0, f64::max);
    Certificate {
        energy: e,
        min_potential,
        residual_min: (e - min_potential).max(0.0),
        residual_support,
    }
}

fn matvec(q: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let data = q.as_slice();
    let mut out = vec![0.0; n];
    // Q is symmetric, so accumulate columns (contiguous in column-major).
    for (j, &wj) in w.iter().enumerate() {
        if wj != 0.0 {
            let col = &data[j * n..(j + 1) * n];
            for (o, c) in out.iter_mut().zip(col) {
                *o += wj * c;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw output of [`solve_simplex_qp`].
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub zero_energy: bool,
    pub polished: bool,
}

/// Minimizes `wᵀQw` over the probability simplex.
///
/// `Q` must be symmetric positive semidefinite.
pub fn solve_simplex_qp(q: &DMatrix<f64>, opts: &SolverOptions) -> QpSolution {
    let n = q.nrows();
    assert_eq!(n, q.ncols(), "Gram matrix must be square");
    assert!(n > 0, "Gram matrix must be nonempty");
    let max_iters = opts.max_iters.unwrap_or(200 * n);
    let zero_level = opts.tol * (0..n).map(|i| q[(i, i)]).fold(0.0, f64::max);

    let fw = frank_wolfe_away(q, opts.tol, max_iters, zero_level);
    if fw.zero_energy {
        return QpSolution {
            w: fw.w,
            iterations: fw.iterations,
            converged: true,
            zero_energy: true,
            polished: false,
        };
    }

    let fw_cert = certificate_from(&fw.w, &matvec(q, &fw.w), opts.support_eps);
    let mut best = QpSolution {
        converged: fw_cert.residual_min <= opts.tol * fw_cert.energy,
        w: fw.w,
        iterations: fw.iterations,
        zero_energy: false,
        polished: false,
    };
    let best_cert = fw_cert;

    if opts.polish {
        let wmax = best.w.iter().copied().fold(0.0, f64::max);
        for rel in [0.0, 1e-12, 1e-9, 1e-6, 1e-4, 1e-2] {
            let start: Vec<usize> = (0..n).filter(|&i| best.w[i] > rel * wmax).collect();
            let Some((w, steps)) = active_set(q, &best.w, start, opts.tol) else {
                continue;
            };
            let cert = certificate_from(&w, &matvec(q, &w), opts.support_eps);
            let certified = cert.residual_min <= opts.tol * cert.energy;
            if certified && cert.energy <= best_cert.energy * (1.0 + 1e-12) + 1e-300 {
                best = QpSolution {
                    w,
                    iterations: best.iterations + steps,
                    converged: true,
                    zero_energy: cert.energy <= zero_level,
                    polished: true,
                };
                break;
            }
        }
    }
    best
}

struct FwResult {
    w: Vec<f64>,
    iterations: usize,
    zero_energy: bool,
}

fn frank_wolfe_away(q: &DMatrix<f64>, tol: f64, max_iters: usize, zero_level: f64) -> FwResult {
    let n = q.nrows();
    let data = q.as_slice();
    let col = |j: usize| &data[j * n..(j + 1) * n];
    let mut w = vec![1.0 / n as f64; n];
    let mut g = matvec(q, &w);
    let mut e = dot(&w, &g);
    let mut it = 0;
    while it < max_iters {
        if it > 0 && it % n.max(50) == 0 {
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            g = matvec(q, &w);
            e = dot(&w, &g);
        }
        if e <= zero_level {
            return FwResult { w, iterations: it, zero_energy: true };
        }
        // Lowest index wins ties in both oracles.
        let mut s = 0;
        let mut v = usize::MAX;
        for i in 0..n {
            if g[i] < g[s] {
                s = i;
            }
            if w[i] > 0.0 && (v == usize::MAX || g[i] > g[v]) {
                v = i;
            }
        }
        let fw_gap = e - g[s];
        if fw_gap <= tol * e {
            break;
        }
        let away_gap = g[v] - e;
        if fw_gap >= away_gap || w[v] >= 1.0 {
            let slope = g[s] - e;
            let curv = q[(s, s)] - 2.0 * g[s] + e;
            let gamma = if curv > 0.0 { (-slope / curv).min(1.0) } else { 1.0 };
            for (wi, gi) in w.iter_mut().zip(g.iter_mut()) {
                *wi *= 1.0 - gamma;
                *gi *= 1.0 - gamma;
            }
            w[s] += gamma;
            for (gi, c) in g.iter_mut().zip(col(s)) {
                *gi += gamma * c;
            }
        } else {
            let gamma_max = w[v] / (1.0 - w[v]);
            let slope = e - g[v];
            let curv = e - 2.0 * g[v] + q[(v, v)];
            let gamma = if curv > 0.0 { (-slope / curv).min(gamma_max) } else { gamma_max };
            for (wi, gi) in w.iter_mut().zip(g.iter_mut()) {
                *wi *= 1.0 + gamma;
                *gi *= 1.0 + gamma;
            }
            w[v] -= gamma;
            if gamma >= gamma_max || w[v] < 0.0 {
                w[v] = 0.0;
            }
            for (gi, c) in g.iter_mut().zip(col(v)) {
                *gi -= gamma * c;
            }
        }
        e = dot(&w, &g);
        it += 1;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    FwResult { w, iterations: it, zero_energy: false }
}

/// Minimizer of `wᵀQw` subject to `Σ w = 1` on the index set `s`:
/// `w_S ∝ Q_SS⁻¹ 1`.
fn equality_minimizer(q: &DMatrix<f64>, s: &[usize]) -> Option<Vec<f64>> {
    let k = s.len();
    let sub = DMatrix::from_fn(k, k, |i, j| q[(s[i], s[j])]);
    let ones = DVector::from_element(k, 1.0);
    let x = match Cholesky::new(sub.clone()) {
        Some(ch) => ch.solve(&ones),
        None => sub.clone().lu().solve(&ones)?,
    };
    let total: f64 = x.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return None;
    }
    let p: Vec<f64> = x.iter().map(|v| v / total).collect();
    // Reject numerically meaningless solves.
    let resid = {
        let qp = &sub * DVector::from_column_slice(&p);
        let mean = qp.iter().sum::<f64>() / k as f64;
        qp.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean.abs().max(f64::MIN_POSITIVE)
    };
    if !resid.is_finite() || resid > 1e-6 {
        return None;
    }
    Some(p)
}

/// Primal active-set method started from `w0` restricted to `start`.
fn active_set(q: &DMatrix<f64>, w0: &[f64], start: Vec<usize>, tol: f64) -> Option<(Vec<f64>, usize)> {
    let n = q.nrows();
    if start.is_empty() {
        return None;
    }
    let mut in_set = vec![false; n];
    let mut w = vec![0.0; n];
    let mut total = 0.0;
    for &i in &start {
        in_set[i] = true;
        w[i] = w0[i];
        total += w0[i];
    }
    if total <= 0.0 {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= total);

    let max_steps = 4 * n + 20;
    let mut last_added = None;
    for step in 0..max_steps {
        let s: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
        let p = equality_minimizer(q, &s)?;
        if p.iter().all(|&x| x > 0.0) {
            for (&i, &pi) in s.iter().zip(&p) {
                w[i] = pi;
            }
            let g = matvec(q, &w);
            let e = dot(&w, &g);
            let mut j = usize::MAX;
            for i in 0..n {
                if !in_set[i] && (j == usize::MAX || g[i] < g[j]) {
                    j = i;
                }
            }
            if j == usize::MAX || g[j] >= e - 0.01 * tol * e {
                return Some((w, step + 1));
            }
            in_set[j] = true;
            last_added = Some(j);
        } else {
            // Move toward p until the first weight hits zero.
            let mut alpha = f64::INFINITY;
            let mut block = 0;
            for (k, (&i, &pi)) in s.iter().zip(&p).enumerate() {
                if pi <= 0.0 {
                    let a = w[i] / (w[i] - pi);
                    if a < alpha {
                        alpha = a;
                        block = k;
                    }
                }
            }
            if alpha == 0.0 && Some(s[block]) == last_added {
                // The entering index cannot carry mass: numerically stuck.
                return None;
            }
            for (&i, &pi) in s.iter().zip(&p) {
                w[i] += alpha * (pi - w[i]);
            }
            let b = s[block];
            w[b] = 0.0;
            in_set[b] = false;
            for &i in &s {
                if w[i] <= 0.0 {
                    w[i] = 0.0;
                    in_set[i] = false;
                }
            }
            if !in_set.iter().any(|&x| x) {
                return None;
            }
            let t: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= t);
        }
    }
    None
}

/// Solves the minimal-energy problem for a precomputed Gram matrix.
pub fn min_energy_gram(q: &DMatrix<f64>, u: Vec<f64>, opts: &SolverOptions) -> Result<CapacityReport> {
    let n = q.nrows();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {}", opts.tol)));
    }
    let sol = solve_simplex_qp(q, opts);
    let potential = matvec(q, &sol.w);
    let cert = certificate_from(&sol.w, &potential, opts.support_eps);
    let capacity = if sol.zero_energy || cert.energy <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / cert.energy
    };
    let report = CapacityReport {
        energy: cert.energy,
        capacity,
        measure: DiscreteMeasure { u, w: sol.w },
        potential,
        residual_min: cert.residual_min,
        residual_support: cert.residual_support,
        iterations: sol.iterations,
        n,
        tol: opts.tol,
        converged: sol.converged,
        zero_energy: sol.zero_energy,
        polished: sol.polished,
    };
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NonConvergence {
            max_iters: opts.max_iters.unwrap_or(200 * n),
            best: Box::new(report),
        })
    }
}

/// Gram matrix of a grid, supplying the cell width for singular kernels.
pub fn grid_gram(kernel: &Kernel, grid: &ParamGrid) -> Result<DMatrix<f64>> {
    let cell = kernel.singular_diagonal().then(|| grid.mean_step());
    gram(kernel, &grid.points, cell)
}

pub fn min_energy_on_grid(kernel: &Kernel, grid: &ParamGrid, opts: &SolverOptions) -> Result<CapacityReport> {
    let q = grid_gram(kernel, grid)?;
    min_energy_gram(&q, grid.u.clone(), opts)
}

/// Minimal energy of probability measures on `n` uniform parameter points
/// of `path`, with relative gap tolerance `tol`.
pub fn min_energy(kernel: &Kernel, path: &Path, n: usize, tol: f64) -> Result<CapacityReport> {
    if path.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: path.dim() });
    }
    let grid = discretize(path, n)?;
    min_energy_on_grid(kernel, &grid, &SolverOptions::with_tol(tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDecomposition {
    pub atoms: Vec<Atom>,
    pub diffuse_mass: f64,
}

/// Splits a grid measure into atoms and a diffuse remainder.
///
/// A grid point is concentrated when its weight exceeds
/// `min(atom_eps, 1/(atom_eps·n))`, i.e. `1/atom_eps` times the uniform level
/// on fine grids. Runs of consecutive concentrated points merge into one atom
/// at their mass-weighted centroid; all other mass is diffuse.
pub fn extract_atoms(m: &DiscreteMeasure, atom_eps: f64) -> AtomDecomposition {
    let n = m.len() as f64;
    let threshold = atom_eps.min(1.0 / (atom_eps * n));
    let mut atoms = Vec::new();
    let mut diffuse = 0.0;
    let mut run: Option<(f64, f64)> = None;
    for (&u, &w) in m.u.iter().zip(&m.w) {
        if w > threshold {
            let (mass, moment) = run.unwrap_or((0.0, 0.0));
            run = Some((mass + w, moment + w * u));
        } else {
            diffuse += w;
            if let Some((mass, moment)) = run.take() {
                atoms.push(Atom { location: moment / mass, mass });
            }
        }
    }
    if let Some((mass, moment)) = run {
        atoms.push(Atom { location: moment / mass, mass });
    }
    AtomDecomposition { atoms, diffuse_mass: diffuse }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::straight_line;
    use approx::assert_relative_eq;

    fn ou() -> Kernel {
        Kernel::ornstein_uhlenbeck(1.0, 1).unwrap()
    }

    fn gauss() -> Kernel {
        Kernel::gaussian_sq(1.0, 1).unwrap()
    }

    fn two_point_gram(k: &Kernel, a: f64) -> DMatrix<f64> {
        gram(k, &[vec![0.0], vec![a]], None).unwrap()
    }

    #[test]
    fn energy_of_two_atoms() {
        let m = DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let e = energy(&two_point_gram(&ou(), 1.0), &m).unwrap();
        assert_relative_eq!(e, (1.0 + (-1.0f64).exp()) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(e, 0.683940, epsilon = 1e-6);
        let e = energy(&two_point_gram(&gauss(), 1.0), &m).unwrap();
        assert_relative_eq!(e, 0.803265, epsilon = 1e-6);
    }

    #[test]
    fn energy_of_point_mass_is_variance() {
        let k = Kernel::long_memory(1.0, 0.4, 1).unwrap();
        let g = discretize(&straight_line(&[0.0], &[3.0]).unwrap(), 7).unwrap();
        let q = gram(&k, &g.points, None).unwrap();
        assert_eq!(energy(&q, &DiscreteMeasure::point_mass(7, 3)).unwrap(), 1.0);
        assert!(matches!(
            energy(&q, &DiscreteMeasure::uniform(5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn two_point_problem_is_balanced() {
        // On two points with equal variance the minimizer of
        // R0(w² + (1−w)²) + 2Ra w(1−w) is w = ½ whenever R0 > Ra.
        for k in [ou(), gauss(), Kernel::long_memory(1.0, 0.5, 1).unwrap()] {
            for a in [0.3, 1.0, 2.5] {
                let r = min_energy(&k, &straight_line(&[0.0], &[a]).unwrap(), 2, 1e-12).unwrap();
                assert_relative_eq!(r.measure.w[0], 0.5, epsilon = 1e-12);
                let ra = k.profile(a).unwrap();
                assert_relative_eq!(r.energy, (1.0 + ra) / 2.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn ou_capacity_matches_closed_form() {
        let r = min_energy(&ou(), &straight_line(&[0.0], &[2.0]).unwrap(), 401, 1e-9).unwrap();
        assert!(r.converged);
        assert!((r.capacity - 2.0).abs() / 2.0 < 0.01, "{}", r.capacity);
        assert!(r.residual_min <= 1e-8);
    }

    #[test]
    fn gaussian_two_atom_solution() {
        let r = min_energy(&gauss(), &straight_line(&[0.0], &[1.0]).unwrap(), 201, 1e-9).unwrap();
        let c = 2.0 / (1.0 + (-0.5f64).exp());
        assert_relative_eq!(r.capacity, c, max_relative = 1e-9);
        assert_relative_eq!(r.capacity, 1.24492, epsilon = 1e-5);
        let atoms = extract_atoms(&r.measure, 0.05);
        assert_eq!(atoms.atoms.len(), 2);
        assert_relative_eq!(atoms.atoms[0].location, 0.0);
        assert_relative_eq!(atoms.atoms[1].location, 1.0);
        assert_relative_eq!(atoms.atoms[0].mass, 0.5, epsilon = 1e-9);
        assert!(atoms.diffuse_mass < 1e-9);
    }

    #[test]
    fn certify_point_mass_on_wide_gaussian() {
        let n = 101;
        let g = discretize(&straight_line(&[0.0], &[3.0]).unwrap(), n).unwrap();
        let q = gram(&gauss(), &g.points, None).unwrap();
        let c = certify(&q, &DiscreteMeasure::point_mass(n, 0), 1e-12).unwrap();
        assert_relative_eq!(c.residual_min, 1.0 - (-4.5f64).exp(), max_relative = 1e-14);
        assert!(c.residual_min > 0.98);
        assert_eq!(c.residual_support, 0.0);
    }

    #[test]
    fn solver_output_certifies() {
        let k = Kernel::long_memory(0.5, 0.7, 1).unwrap();
        let tol = 1e-9;
        let r = min_energy(&k, &straight_line(&[0.0], &[4.0]).unwrap(), 151, tol).unwrap();
        let g = discretize(&straight_line(&[0.0], &[4.0]).unwrap(), 151).unwrap();
        let q = gram(&k, &g.points, None).unwrap();
        let c = certify(&q, &r.measure, 1e-12).unwrap();
        assert!(c.residual_min <= 10.0 * tol);
        assert!(c.energy > 0.0);
    }

    #[test]
    fn zero_energy_is_flagged() {
        // Brownian motion started at the origin: R(0, ·) = 0, so δ₀ has
        // zero energy.
        let k = Kernel::brownian_sheet(1).unwrap();
        let r = min_energy(&k, &straight_line(&[0.0], &[1.0]).unwrap(), 21, 1e-9).unwrap();
        assert!(r.zero_energy);
        assert!(r.capacity.is_infinite());
        assert!(r.energy.abs() < 1e-9);
    }

    #[test]
    fn brownian_motion_point_mass_at_left_end() {
        // On [a, b] with 0 < a < b the measure δ_a is optimal and E* = a.
        let k = Kernel::brownian_sheet(1).unwrap();
        let r = min_energy(&k, &straight_line(&[0.5], &[2.0]).unwrap(), 61, 1e-10).unwrap();
        assert_relative_eq!(r.energy, 0.5, max_relative = 1e-10);
        assert_relative_eq!(r.measure.w[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn extract_atoms_examples() {
        let d = extract_atoms(&DiscreteMeasure::uniform(401), 0.05);
        assert!(d.atoms.is_empty());
        assert_relative_eq!(d.diffuse_mass, 1.0, epsilon = 1e-12);

        let mut w = vec![0.0; 11];
        w[4] = 0.3;
        w[5] = 0.3;
        w[10] = 0.4;
        let d = extract_atoms(&DiscreteMeasure::new(crate::geometry::uniform_params(11), w).unwrap(), 0.05);
        assert_eq!(d.atoms.len(), 2);
        assert_relative_eq!(d.atoms[0].location, 0.45, epsilon = 1e-12);
        assert_relative_eq!(d.atoms[0].mass, 0.6, epsilon = 1e-12);
        assert_relative_eq!(d.atoms[1].location, 1.0);
    }

    #[test]
    fn ou_atoms_and_diffuse_part() {
        let r = min_energy(&ou(), &straight_line(&[0.0], &[1.0]).unwrap(), 401, 1e-9).unwrap();
        let d = extract_atoms(&r.measure, 0.05);
        assert_eq!(d.atoms.len(), 2);
        for atom in &d.atoms {
            assert!((atom.mass - 1.0 / 3.0).abs() < 0.01, "{atom:?}");
        }
        assert!((d.diffuse_mass - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn nonconvergence_carries_best_iterate() {
        let g = discretize(&straight_line(&[0.0], &[5.0]).unwrap(), 101).unwrap();
        let q = gram(&ou(), &g.points, None).unwrap();
        let opts = SolverOptions { tol: 1e-12, max_iters: Some(3), support_eps: 1e-12, polish: false };
        match min_energy_gram(&q, g.u.clone(), &opts) {
            Err(Error::NonConvergence { max_iters, best }) => {
                assert_eq!(max_iters, 3);
                assert!(!best.converged);
                assert_eq!(best.iterations, 3);
                assert_relative_eq!(best.measure.total_mass(), 1.0, epsilon = 1e-12);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.2], vec![0.5, 0.5]).is_err());
        let m = DiscreteMeasure::new(vec![0.0, 0.5, 1.0], vec![0.5, 0.3, 0.2]).unwrap();
        assert_relative_eq!(m.asymmetry(), 0.3, epsilon = 1e-15);
        assert_eq!(m.symmetrized().asymmetry(), 0.0);
        assert_eq!(m.to_csv().lines().count(), 4);
    }
}
