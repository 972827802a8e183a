//! Polyline paths `ξ: [0, 1] → ℝ^d` and uniform parameter grids on them.

use serde::{Deserialize, Serialize};

use crate::kernel::Point;
use crate::{Error, Result};

/// A continuous polyline with parameter breakpoints.
///
/// `param` is strictly increasing from 0 to 1 and assigns a parameter value
/// to each vertex; `ξ(v)` interpolates linearly in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathSpec", into = "PathSpec")]
pub struct Path {
    vertices: Vec<Point>,
    param: Vec<f64>,
}

impl Path {
    /// Builds a path; `param` defaults to uniform spacing by vertex index.
    pub fn new(vertices: Vec<Point>, param: Option<Vec<f64>>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::DegeneratePath("a path needs at least two vertices".into()));
        }
        let dim = vertices[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("vertices must have at least one coordinate".into()));
        }
        for v in &vertices {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite vertex {v:?}")));
            }
        }
        let last = vertices.len() - 1;
        let param = match param {
            Some(p) => p,
            None => (0..=last).map(|i| i as f64 / last as f64).collect(),
        };
        if param.len() != vertices.len() {
            return Err(Error::DimensionMismatch { expected: vertices.len(), got: param.len() });
        }
        if param[0] != 0.0 || param[last] != 1.0 {
            return Err(Error::InvalidInput("param must start at 0 and end at 1".into()));
        }
        if param.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("param must be strictly increasing".into()));
        }
        if vertices[0] == vertices[last] {
            return Err(Error::DegeneratePath("endpoints coincide".into()));
        }
        Ok(Self { vertices, param })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn param(&self) -> &[f64] {
        &self.param
    }

    /// Starting point `a = ξ(0)`.
    pub fn start(&self) -> &[f64] {
        &self.vertices[0]
    }

    /// End point `b = ξ(1)`.
    pub fn end(&self) -> &[f64] {
        &self.vertices[self.vertices.len() - 1]
    }

    /// Euclidean length of the polyline.
    pub fn length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| crate::kernel::distance(&w[0], &w[1]))
            .sum()
    }

    /// `ξ(v)` for `v ∈ [0, 1]` (clamped outside).
    pub fn eval(&self, v: f64) -> Point {
        let v = v.clamp(0.0, 1.0);
        let k = (self.param.partition_point(|&p| p <= v)).clamp(1, self.param.len() - 1) - 1;
        let (p0, p1) = (self.param[k], self.param[k + 1]);
        let t = (v - p0) / (p1 - p0);
        self.vertices[k]
            .iter()
            .zip(&self.vertices[k + 1])
            .map(|(x0, x1)| (1.0 - t) * x0 + t * x1)
            .collect()
    }
}

/// Segment `ξ(v) = a + v(b − a)`.
pub fn straight_line(a: &[f64], b: &[f64]) -> Result<Path> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a == b {
        return Err(Error::DegeneratePath("a = b".into()));
    }
    Path::new(vec![a.to_vec(), b.to_vec()], None)
}

/// Staircase path inside `[0, d]^d` from `(1, 2, …, d)` to `(d, 1, …, d−1)`.
///
/// The first segment moves coordinate 1 from 1 to `d`; segment `j ≥ 2` then
/// lowers coordinate `j` from `j` to `j − 1`. Along it the Brownian-sheet
/// covariance keeps `R(a, ξ) + R(ξ, b)` above its endpoint value.
pub fn sheet_staircase(d: usize) -> Result<Path> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("staircase needs d ≥ 2, got {d}")));
    }
    let a: Point = (1..=d).map(|j| j as f64).collect();
    let mut vertices = vec![a.clone()];
    let mut current = a;
    current[0] = d as f64;
    vertices.push(current.clone());
    for j in 2..=d {
        current[j - 1] = (j - 1) as f64;
        vertices.push(current.clone());
    }
    let param = (0..=d).map(|j| j as f64 / d as f64).collect();
    Path::new(vertices, Some(param))
}

/// Uniform grid `u_i = i/(n−1)` on a path, with the points `ξ(u_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub u: Vec<f64>,
    pub points: Vec<Point>,
}

impl ParamGrid {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Parameter spacing `1/(n−1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.u.len() - 1) as f64
    }

    /// Mean distance between consecutive points in space.
    pub fn mean_step(&self) -> f64 {
        let total: f64 = self
            .points
            .windows(2)
            .map(|w| crate::kernel::distance(&w[0], &w[1]))
            .sum();
        total / (self.points.len() - 1) as f64
    }
}

/// Uniform parameter values `i/(n−1)`, `i = 0..n`.
pub fn uniform_params(n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n).map(|i| i as f64 / m).collect()
}

pub fn discretize(path: &Path, n: usize) -> Result<ParamGrid> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("grid needs n ≥ 2, got {n}")));
    }
    let u = uniform_params(n);
    let points = u.iter().map(|&v| path.eval(v)).collect();
    Ok(ParamGrid { u, points })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathSpec {
    vertices: Vec<Point>,
    #[serde(default)]
    param: Option<Vec<f64>>,
}

impl TryFrom<PathSpec> for Path {
    type Error = Error;

    fn try_from(s: PathSpec) -> Result<Self> {
        Path::new(s.vertices, s.param)
    }
}

impl From<Path> for PathSpec {
    fn from(p: Path) -> Self {
        PathSpec { vertices: p.vertices, param: Some(p.param) }
    }
}
