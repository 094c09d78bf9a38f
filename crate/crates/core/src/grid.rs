//! Uniform space-time meshes on `(0, l) x (0, T]` and sampling of the
//! principal coefficient `a(x)` at nodes and cell faces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold under which an endpoint value of `a` counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Uniform mesh with `cells + 1` nodes in space and `steps + 1` time levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    length: f64,
    cells: usize,
    final_time: f64,
    steps: usize,
    h: f64,
    dt: f64,
}

impl Mesh {
    pub fn new(length: f64, cells: usize, final_time: f64, steps: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidMesh(format!("length must be positive and finite, got {length}")));
        }
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::InvalidMesh(format!("final time must be positive and finite, got {final_time}")));
        }
        if cells < 2 {
            return Err(Error::InvalidMesh(format!("need at least 2 cells, got {cells}")));
        }
        if steps < 1 {
            return Err(Error::InvalidMesh("need at least 1 time step".into()));
        }
        Ok(Self { length, cells, final_time, steps, h: length / cells as f64, dt: final_time / steps as f64 })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes_len(&self) -> usize {
        self.cells + 1
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Position of node `i`; the last node sits exactly at `l`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            self.length
        } else {
            i as f64 * self.h
        }
    }

    /// Position of face `i + 1/2`.
    pub fn face(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.final_time
        } else {
            n as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.node(i)).collect()
    }

    /// Trapezoid quadrature weights: `h/2` at the endpoints, `h` inside.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.cells + 1];
        w[0] = 0.5 * self.h;
        w[self.cells] = 0.5 * self.h;
        w
    }

    /// Mesh with twice the cells and twice the time steps.
    pub fn refined(&self) -> Self {
        Self::new(self.length, 2 * self.cells, self.final_time, 2 * self.steps)
            .expect("refining a valid mesh stays valid")
    }

    /// Trapezoid inner product of two nodal vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let m = self.cells;
        let interior: f64 = (1..m).map(|i| a[i] * b[i]).sum();
        self.h * (interior + 0.5 * (a[0] * b[0] + a[m] * b[m]))
    }

    /// Trapezoid `L^2(0, l)` norm of a nodal vector.
    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..=self.cells).map(|i| f(self.node(i))).collect()
    }
}

/// How the principal coefficient behaves at `x = 0` and `x = l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegeneracyMode {
    /// `a` vanishes at both ends with a finite derivative; no boundary data.
    StrongDegenerate,
    /// `a = x^p (l - x)^r` with `0 < p, r < 1`; homogeneous Dirichlet data.
    WeakDegenerate,
    /// `a >= a0 > 0` on `[0, l]`; homogeneous Dirichlet data.
    UniformlyElliptic,
}

/// Named catalog of principal coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Coefficient {
    /// `x (l - x)`
    Quadratic,
    /// `x^alpha (l - x)^beta`
    Power { alpha: f64, beta: f64 },
    /// `a(x) = value`
    Constant { value: f64 },
}

impl Coefficient {
    pub fn value(&self, x: f64, l: f64) -> f64 {
        match *self {
            Coefficient::Quadratic => x * (l - x),
            Coefficient::Power { alpha, beta } => x.powf(alpha) * (l - x).powf(beta),
            Coefficient::Constant { value } => value,
        }
    }

    /// Analytic derivative. Infinite at an endpoint where a power coefficient
    /// has exponent below one.
    pub fn derivative(&self, x: f64, l: f64) -> f64 {
        match *self {
            Coefficient::Quadratic => l - 2.0 * x,
            Coefficient::Power { alpha, beta } => {
                let left = if x == 0.0 && alpha < 1.0 {
                    f64::INFINITY
                } else {
                    alpha * x.powf(alpha - 1.0) * (l - x).powf(beta)
                };
                let right =
                    if x == l && beta < 1.0 { f64::INFINITY } else { beta * x.powf(alpha) * (l - x).powf(beta - 1.0) };
                left - right
            }
            Coefficient::Constant { .. } => 0.0,
        }
    }

    /// Mode a coefficient from the catalog is expected to satisfy.
    pub fn natural_mode(&self) -> DegeneracyMode {
        match *self {
            Coefficient::Quadratic => DegeneracyMode::StrongDegenerate,
            Coefficient::Power { alpha, beta } if alpha < 1.0 || beta < 1.0 => DegeneracyMode::WeakDegenerate,
            Coefficient::Power { .. } => DegeneracyMode::StrongDegenerate,
            Coefficient::Constant { .. } => DegeneracyMode::UniformlyElliptic,
        }
    }

    pub fn sample(&self, mesh: &Mesh) -> Result<CoefficientSamples> {
        self.sample_with_mode(mesh, self.natural_mode())
    }

    pub fn sample_with_mode(&self, mesh: &Mesh, mode: DegeneracyMode) -> Result<CoefficientSamples> {
        let l = mesh.length();
        sample_coefficient(|x| self.value(x, l), mesh, mode)
    }
}

/// Nodal and face samples of `a`, certified against a [`DegeneracyMode`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSamples {
    nodal: Vec<f64>,
    faces: Vec<f64>,
    mode: DegeneracyMode,
}

impl CoefficientSamples {
    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    /// Face values `a_{i+1/2}`, `i = 0..M-1`.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn mode(&self) -> DegeneracyMode {
        self.mode
    }

    /// Lower bound `a0` in the uniformly elliptic mode, zero otherwise.
    pub fn ellipticity(&self) -> f64 {
        match self.mode {
            DegeneracyMode::UniformlyElliptic => self.nodal.iter().copied().fold(f64::INFINITY, f64::min),
            _ => 0.0,
        }
    }

    /// `a + eps` everywhere; the result is uniformly elliptic.
    pub fn shifted(&self, eps: f64) -> Self {
        Self {
            nodal: self.nodal.iter().map(|a| a + eps).collect(),
            faces: self.faces.iter().map(|a| a + eps).collect(),
            mode: DegeneracyMode::UniformlyElliptic,
        }
    }

    /// Mirror `x -> l - x`.
    pub fn reversed(&self) -> Self {
        let mut nodal = self.nodal.clone();
        let mut faces = self.faces.clone();
        nodal.reverse();
        faces.reverse();
        Self { nodal, faces, mode: self.mode }
    }
}

/// Samples `a` at the mesh nodes and averages adjacent nodes onto the faces,
/// then checks the invariants of `mode`.
pub fn sample_coefficient(a: impl Fn(f64) -> f64, mesh: &Mesh, mode: DegeneracyMode) -> Result<CoefficientSamples> {
    let mut nodal = mesh.sample(a);
    if let Some(i) = nodal.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidCoefficient(format!("a is not finite at node {i} (x = {})", mesh.node(i))));
    }
    let scale = nodal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = DEGENERACY_TOL * scale;
    for (i, v) in nodal.iter_mut().enumerate() {
        if *v < -tol {
            return Err(Error::InvalidCoefficient(format!("a = {v} < 0 at node {i} (x = {})", mesh.node(i))));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let last = mesh.cells();
    match mode {
        DegeneracyMode::StrongDegenerate | DegeneracyMode::WeakDegenerate => {
            for end in [0, last] {
                if nodal[end] > tol {
                    return Err(Error::InvalidCoefficient(format!(
                        "{mode:?} mode needs a = 0 at x = {}, got {}",
                        mesh.node(end),
                        nodal[end]
                    )));
                }
                nodal[end] = 0.0;
            }
            if let Some(i) = (1..last).find(|&i| nodal[i] <= 0.0) {
                return Err(Error::InvalidCoefficient(format!("a must be positive inside (0, l); a = 0 at node {i}")));
            }
        }
        DegeneracyMode::UniformlyElliptic => {
            if let Some(i) = nodal.iter().position(|&v| v <= 0.0) {
                return Err(Error::InvalidCoefficient(format!(
                    "uniformly elliptic mode needs a > 0 everywhere; a = 0 at node {i}"
                )));
            }
        }
    }

    let faces = nodal.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    Ok(CoefficientSamples { nodal, faces, mode })
}
