//! Implicit conservative finite-volume solver for
//! `u_t - (a u_x)_x + q u = f` on `(0, l) x (0, T]`.
//!
//! Each node `i` owns the control volume `[x_{i-1/2}, x_{i+1/2}]` clipped to
//! `[0, l]`, so the volumes carry the trapezoid weights `w_i`. With the face
//! fluxes `F_{i+1/2} = a_{i+1/2} (u_{i+1} - u_i) / h` one backward Euler step
//! reads
//!
//! ```text
//! w_i (u_i^{n+1} - u_i^n) = dt (F_{i+1/2} - F_{i-1/2}) - dt w_i q_i u_i^{n+1} + dt w_i f_i^{n+1}
//! ```
//!
//! i.e. `A u^{n+1} = W (u^n + dt f^{n+1})` with `A = W (I + dt Q) + dt S`
//! symmetric and an M-matrix. In the degenerate case the fluxes through
//! `x = 0` and `x = l` are zero and no boundary rows are eliminated; in the
//! Dirichlet case the endpoint rows and columns are replaced by the identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CoefficientSamples, DegeneracyMode, Mesh};
use crate::tridiag::{SymTridiag, TridiagFactor};

/// Treatment of the lateral sides `x = 0` and `x = l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTreatment {
    /// No data; the flux through the endpoint vanishes.
    ZeroFlux,
    /// Homogeneous Dirichlet data `u = 0`.
    Dirichlet,
}

impl BoundaryTreatment {
    pub fn for_mode(mode: DegeneracyMode) -> Self {
        match mode {
            DegeneracyMode::StrongDegenerate => BoundaryTreatment::ZeroFlux,
            DegeneracyMode::WeakDegenerate | DegeneracyMode::UniformlyElliptic => BoundaryTreatment::Dirichlet,
        }
    }
}

/// Nodal values on every time level; row `n` is `t_n = n dt`.
///
/// Adjoint fields use the same indexing, so their terminal datum sits in
/// the last row; [`SpaceTimeField::time_reversed`] gives the `tau = T - t`
/// view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    levels: usize,
    nodes: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(mesh: &Mesh) -> Self {
        let levels = mesh.steps() + 1;
        let nodes = mesh.nodes_len();
        Self { levels, nodes, values: vec![0.0; levels * nodes] }
    }

    /// Samples `f(x, t)` on every node and time level.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(mesh);
        for n in 0..field.levels {
            let t = mesh.time(n);
            for (i, v) in field.row_mut(n).iter_mut().enumerate() {
                *v = f(mesh.node(i), t);
            }
        }
        field
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let levels = rows.len();
        let nodes = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != nodes) {
            return Err(Error::ShapeMismatch { expected: format!("{nodes} nodes"), got: format!("{}", bad.len()) });
        }
        Ok(Self { levels, nodes, values: rows.into_iter().flatten().collect() })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.values[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.levels - 1)
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> {
        self.values.chunks(self.nodes)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn time_reversed(&self) -> Self {
        let rows: Vec<Vec<f64>> = self.rows().rev().map(<[f64]>::to_vec).collect();
        Self::from_rows(rows).expect("rows have equal length")
    }

    pub fn check_shape(&self, mesh: &Mesh) -> Result<()> {
        if self.levels != mesh.steps() + 1 || self.nodes != mesh.nodes_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", mesh.steps() + 1, mesh.nodes_len()),
                got: format!("{} x {}", self.levels, self.nodes),
            });
        }
        Ok(())
    }
}

/// Coefficients and data of one direct problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub mesh: Mesh,
    pub coeff: CoefficientSamples,
    pub q: Vec<f64>,
    pub phi: Vec<f64>,
    /// `f` on every time level; `None` means `f = 0`.
    pub source: Option<SpaceTimeField>,
    pub boundary: BoundaryTreatment,
}

fn check_nodal(name: &str, v: &[f64], mesh: &Mesh) -> Result<()> {
    if v.len() != mesh.nodes_len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values of {name}", mesh.nodes_len()),
            got: v.len().to_string(),
        });
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} is not finite at node {i}")));
    }
    Ok(())
}

impl ProblemSpec {
    pub fn new(mesh: Mesh, coeff: CoefficientSamples, q: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        check_nodal("a", coeff.nodal(), &mesh)?;
        check_nodal("q", &q, &mesh)?;
        check_nodal("phi", &phi, &mesh)?;
        if let Some(i) = q.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!("q must be non-negative; q = {} at node {i}", q[i])));
        }
        let boundary = BoundaryTreatment::for_mode(coeff.mode());
        Ok(Self { mesh, coeff, q, phi, source: None, boundary })
    }

    pub fn with_source(mut self, source: SpaceTimeField) -> Result<Self> {
        source.check_shape(&self.mesh)?;
        self.source = Some(source);
        Ok(self)
    }

    pub fn with_boundary(mut self, boundary: BoundaryTreatment) -> Self {
        self.boundary = boundary;
        self
    }

    /// Same problem with a different radiative coefficient.
    pub fn with_q(&self, q: Vec<f64>) -> Result<Self> {
        check_nodal("q", &q, &self.mesh)?;
        if let Some(i) = q.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!("q must be non-negative; q = {} at node {i}", q[i])));
        }
        Ok(Self { q, ..self.clone() })
    }

    pub fn with_phi(&self, phi: Vec<f64>) -> Result<Self> {
        check_nodal("phi", &phi, &self.mesh)?;
        Ok(Self { phi, ..self.clone() })
    }

    /// The initial datum must be non-negative and not identically zero for
    /// the identification problem to make sense.
    pub fn validate_for_inversion(&self) -> Result<()> {
        if let Some(i) = self.phi.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!("phi must be non-negative; phi < 0 at node {i}")));
        }
        if self.phi.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter("phi must not vanish identically".into()));
        }
        Ok(())
    }

    pub fn phi_sup(&self) -> f64 {
        self.phi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One backward Euler step, `u^{n+1} = A^{-1} W (u^n + dt f^{n+1})`.
///
/// The same operator advances the adjoint backward in time: `A` is
/// symmetric, so the transposed step is `A^{-1} W` again.
#[derive(Debug, Clone)]
pub struct StepOperator {
    matrix: SymTridiag,
    factor: TridiagFactor,
    weights: Vec<f64>,
    dt: f64,
    dirichlet: bool,
}

impl StepOperator {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        let mesh = &spec.mesh;
        let m = mesh.cells();
        let (h, dt) = (mesh.h(), mesh.dt());
        let weights = mesh.weights();
        let faces = spec.coeff.faces();

        let mut diag: Vec<f64> = (0..=m).map(|i| weights[i] * (1.0 + dt * spec.q[i])).collect();
        let mut off = vec![0.0; m];
        for (i, &a) in faces.iter().enumerate() {
            let c = dt * a / h;
            diag[i] += c;
            diag[i + 1] += c;
            off[i] = -c;
        }
        let dirichlet = spec.boundary == BoundaryTreatment::Dirichlet;
        if dirichlet {
            diag[0] = 1.0;
            diag[m] = 1.0;
            off[0] = 0.0;
            off[m - 1] = 0.0;
        }
        let matrix = SymTridiag::new(diag, off);
        let factor = matrix.factor()?;
        Ok(Self { matrix, factor, weights, dt, dirichlet })
    }

    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `out = A^{-1} W (prev + dt source)`.
    pub fn advance(&self, prev: &[f64], source: Option<&[f64]>, out: &mut [f64]) {
        let n = out.len();
        match source {
            Some(f) => {
                for i in 0..n {
                    out[i] = self.weights[i] * (prev[i] + self.dt * f[i]);
                }
            }
            None => {
                for i in 0..n {
                    out[i] = self.weights[i] * prev[i];
                }
            }
        }
        if self.dirichlet {
            out[0] = 0.0;
            out[n - 1] = 0.0;
        }
        self.factor.solve_in_place(out);
    }
}

fn check_level(row: &[f64], level: usize) -> Result<()> {
    if row.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { level })
    }
}

/// Backward Euler finite-volume solution; row 0 is `phi`.
pub fn solve_forward(spec: &ProblemSpec) -> Result<SpaceTimeField> {
    let step = StepOperator::new(spec)?;
    let mut field = SpaceTimeField::zeros(&spec.mesh);
    field.row_mut(0).copy_from_slice(&spec.phi);
    let nodes = field.nodes();
    let mut next = vec![0.0; nodes];
    for n in 0..spec.mesh.steps() {
        let source = spec.source.as_ref().map(|f| f.row(n + 1));
        step.advance(field.row(n), source, &mut next);
        check_level(&next, n + 1)?;
        field.row_mut(n + 1).copy_from_slice(&next);
    }
    Ok(field)
}

/// Solution of the regularized problem with coefficient `a + eps` and
/// homogeneous Dirichlet data at both ends.
pub fn solve_forward_viscous(spec: &ProblemSpec, eps: f64) -> Result<SpaceTimeField> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("viscosity must lie in (0, 1), got {eps}")));
    }
    let viscous =
        ProblemSpec { coeff: spec.coeff.shifted(eps), boundary: BoundaryTreatment::Dirichlet, ..spec.clone() };
    solve_forward(&viscous)
}

/// Forward Euler with the same fluxes. Not monotone for large `dt`; exists
/// only so the property suite can demonstrate that it catches a broken
/// scheme.
#[doc(hidden)]
pub fn solve_forward_explicit(spec: &ProblemSpec) -> Result<SpaceTimeField> {
    let mesh = &spec.mesh;
    let (h, dt) = (mesh.h(), mesh.dt());
    let w = mesh.weights();
    let faces = spec.coeff.faces();
    let mut field = SpaceTimeField::zeros(mesh);
    field.row_mut(0).copy_from_slice(&spec.phi);
    let m = mesh.cells();
    for n in 0..mesh.steps() {
        let u = field.row(n).to_vec();
        let mut next = vec![0.0; m + 1];
        for i in 0..=m {
            let mut div = 0.0;
            if i < m {
                div += faces[i] * (u[i + 1] - u[i]) / h;
            }
            if i > 0 {
                div -= faces[i - 1] * (u[i] - u[i - 1]) / h;
            }
            let f = spec.source.as_ref().map_or(0.0, |s| s.row(n)[i]);
            next[i] = u[i] + dt * (div / w[i] - spec.q[i] * u[i] + f);
        }
        if spec.boundary == BoundaryTreatment::Dirichlet {
            next[0] = 0.0;
            next[m] = 0.0;
        }
        check_level(&next, n + 1)?;
        field.row_mut(n + 1).copy_from_slice(&next);
    }
    Ok(field)
}

/// `max { sup|f| / q0, sup|phi| }` with `q0 = min q`.
pub fn max_principle_bound(spec: &ProblemSpec) -> Result<f64> {
    let phi_sup = spec.phi_sup();
    let f_sup = spec.source.as_ref().map_or(0.0, SpaceTimeField::max_abs);
    if f_sup == 0.0 {
        return Ok(phi_sup);
    }
    let q0 = spec.q.iter().copied().fold(f64::INFINITY, f64::min);
    if q0 <= 0.0 {
        return Err(Error::InvalidParameter("maximum principle bound with a source needs q >= q0 > 0".into()));
    }
    Ok((f_sup / q0).max(phi_sup))
}

/// Discrete energy norms of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `max_n ||u(., t_n)||_{L^2}`
    pub sup_l2: f64,
    /// `sum_n sum_faces a |D_x u|^2 h dt`
    pub grad_energy: f64,
    /// `sum_n sum_i w_i |D_t u|^2 dt`
    pub dt_energy: f64,
}

/// Trapezoid in space, left Riemann sums in time.
pub fn energy_report(field: &SpaceTimeField, spec: &ProblemSpec) -> Result<EnergyReport> {
    let mesh = &spec.mesh;
    field.check_shape(mesh)?;
    let (h, dt) = (mesh.h(), mesh.dt());
    let faces = spec.coeff.faces();
    let sup_l2 = field.rows().map(|r| mesh.norm(r)).fold(0.0, f64::max);
    let mut grad_energy = 0.0;
    let mut dt_energy = 0.0;
    for n in 0..mesh.steps() {
        let u = field.row(n);
        grad_energy += faces
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = (u[i + 1] - u[i]) / h;
                a * d * d * h
            })
            .sum::<f64>()
            * dt;
        let du: Vec<f64> = field.row(n + 1).iter().zip(u).map(|(b, a)| (b - a) / dt).collect();
        dt_energy += mesh.inner(&du, &du) * dt;
    }
    Ok(EnergyReport { sup_l2, grad_energy, dt_energy })
}

/// Discrete `L^2(Q)` norm: trapezoid in space, left Riemann in time.
pub fn space_time_norm(mesh: &Mesh, field: &SpaceTimeField) -> f64 {
    let dt = mesh.dt();
    (0..mesh.steps()).map(|n| mesh.inner(field.row(n), field.row(n)) * dt).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Coefficient;

    fn quadratic_spec(m: usize, k: usize, q: f64) -> ProblemSpec {
        let mesh = Mesh::new(1.0, m, 1.0, k).unwrap();
        let coeff = Coefficient::Quadratic.sample(&mesh).unwrap();
        ProblemSpec::new(mesh, coeff, vec![q; m + 1], vec![1.0; m + 1]).unwrap()
    }

    /// `w u (1 + dt q) - dt (F_{i+1/2} - F_{i-1/2})` built from the fluxes.
    fn flux_form_action(spec: &ProblemSpec, u: &[f64]) -> Vec<f64> {
        let mesh = &spec.mesh;
        let (h, dt) = (mesh.h(), mesh.dt());
        let w = mesh.weights();
        let a = spec.coeff.faces();
        let m = mesh.cells();
        (0..=m)
            .map(|i| {
                let right = if i < m { a[i] * (u[i + 1] - u[i]) / h } else { 0.0 };
                let left = if i > 0 { a[i - 1] * (u[i] - u[i - 1]) / h } else { 0.0 };
                w[i] * u[i] * (1.0 + dt * spec.q[i]) - dt * (right - left)
            })
            .collect()
    }

    #[test]
    fn constant_profile_follows_scalar_recursion() {
        let spec = quadratic_spec(100, 1000, 1.0);
        let u = solve_forward(&spec).unwrap();
        let dt = spec.mesh.dt();
        let mut err = 0.0_f64;
        for n in 0..=1000 {
            let scalar = (1.0 + dt).powi(-(n as i32));
            let exact = (-spec.mesh.time(n)).exp();
            for &v in u.row(n) {
                assert!((v - scalar).abs() < 1e-12);
                err = err.max((v - exact).abs());
            }
        }
        assert!(err <= 2e-3, "max error {err}");
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let spec = quadratic_spec(20, 10, 0.7);
        let spec = spec.with_phi(vec![0.0; 21]).unwrap();
        let u = solve_forward(&spec).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn step_matrix_is_symmetric_m_matrix() {
        let mesh = Mesh::new(1.3, 12, 0.8, 5).unwrap();
        let coeff = Coefficient::Power { alpha: 1.5, beta: 1.2 }.sample(&mesh).unwrap();
        let q: Vec<f64> = mesh.nodes().iter().map(|x| 0.3 + x * x).collect();
        let spec = ProblemSpec::new(mesh, coeff, q, vec![1.0; 13]).unwrap();
        let step = StepOperator::new(&spec).unwrap();
        let n = 13;
        let mut dense = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = flux_form_action(&spec, &e);
            for (a, b) in col.iter().zip(step.matrix().mul_vec(&e)) {
                assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
            }
            for i in 0..n {
                dense[i][j] = col[i];
            }
        }
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, dense[j][i], "A[{i}][{j}] != A[{j}][{i}]");
            }
        }
        assert!(step.matrix().is_m_matrix());
    }

    #[test]
    fn dirichlet_rows_hold_zero() {
        let mesh = Mesh::new(1.0, 10, 0.5, 10).unwrap();
        let coeff = Coefficient::Power { alpha: 0.5, beta: 0.5 }.sample(&mesh).unwrap();
        let spec = ProblemSpec::new(mesh, coeff, vec![1.0; 11], vec![1.0; 11]).unwrap();
        assert_eq!(spec.boundary, BoundaryTreatment::Dirichlet);
        let u = solve_forward(&spec).unwrap();
        assert_eq!(u.row(0)[0], 1.0);
        for n in 1..=10 {
            assert_eq!(u.row(n)[0], 0.0);
            assert_eq!(u.row(n)[10], 0.0);
        }
    }

    #[test]
    fn viscous_rejects_bad_eps() {
        let spec = quadratic_spec(10, 5, 1.0);
        assert!(solve_forward_viscous(&spec, 0.0).is_err());
        assert!(solve_forward_viscous(&spec, 1.0).is_err());
        assert!(solve_forward_viscous(&spec, 0.1).is_ok());
    }

    #[test]
    fn max_principle_bound_cases() {
        let spec = quadratic_spec(10, 5, 0.5);
        assert_eq!(max_principle_bound(&spec).unwrap(), 1.0);
        let f = SpaceTimeField::from_fn(&spec.mesh, |_, _| 2.0);
        let forced = spec.clone().with_source(f.clone()).unwrap();
        assert_eq!(max_principle_bound(&forced).unwrap(), 4.0);
        let unforced_q = spec.with_q(vec![0.0; 11]).unwrap().with_source(f).unwrap();
        assert!(max_principle_bound(&unforced_q).is_err());
    }

    #[test]
    fn forced_solution_respects_bound() {
        let spec = quadratic_spec(30, 40, 0.5);
        let f = SpaceTimeField::from_fn(&spec.mesh, |x, t| 2.0 * (3.0 * x + t).sin());
        let spec = spec.with_source(f).unwrap();
        let bound = max_principle_bound(&spec).unwrap();
        let u = solve_forward(&spec).unwrap();
        assert!(u.max_abs() <= bound + 1e-12);
    }

    #[test]
    fn energy_of_zero_and_decaying_fields() {
        let spec = quadratic_spec(10, 10, 1.0);
        let zero = SpaceTimeField::zeros(&spec.mesh);
        let r = energy_report(&zero, &spec).unwrap();
        assert_eq!((r.sup_l2, r.grad_energy, r.dt_energy), (0.0, 0.0, 0.0));

        let decay = SpaceTimeField::from_fn(&spec.mesh, |_, t| (-t).exp());
        let r = energy_report(&decay, &spec).unwrap();
        assert!((r.sup_l2 - 1.0).abs() < 1e-15);
        assert_eq!(r.grad_energy, 0.0);

        let other = Mesh::new(1.0, 11, 1.0, 10).unwrap();
        assert!(energy_report(&SpaceTimeField::zeros(&other), &spec).is_err());
    }

    #[test]
    fn nan_is_reported_with_level() {
        let spec = quadratic_spec(10, 5, 1.0);
        let mut f = SpaceTimeField::zeros(&spec.mesh);
        f.row_mut(3)[4] = f64::NAN;
        let spec = spec.with_source(f).unwrap();
        assert_eq!(solve_forward(&spec).unwrap_err(), Error::NonFinite { level: 3 });
    }

    #[test]
    fn explicit_scheme_breaks_max_principle_for_large_steps() {
        let mesh = Mesh::new(1.0, 40, 1.0, 20).unwrap();
        let coeff = Coefficient::Quadratic.sample(&mesh).unwrap();
        let phi: Vec<f64> = mesh.nodes().iter().map(|&x| if x < 0.5 { 1.0 } else { 0.0 }).collect();
        let spec = ProblemSpec::new(mesh, coeff, vec![0.1; 41], phi).unwrap();
        match solve_forward_explicit(&spec) {
            Ok(u) => assert!(u.values().iter().any(|&v| !(0.0..=1.0).contains(&v))),
            Err(e) => assert!(matches!(e, Error::NonFinite { .. })),
        }
    }
}
