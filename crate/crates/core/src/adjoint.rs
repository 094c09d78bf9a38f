//! Backward-in-time adjoint of the discrete forward scheme.
//!
//! The forward step is `u^{n+1} = B u^n` with `B = A^{-1} W`, which is
//! self-adjoint in the trapezoid inner product. Running `B` backward from
//! the terminal datum therefore yields the exact discrete adjoint:
//!
//! ```text
//! v^K = s^K,   v^n = B (v^{n+1} + s^{n+1})   for n = K-1, ..., 0
//! ```
//!
//! where `s^n` collects the misfit sources (`u^K - g` for the terminal
//! functional, `(dt / sigma) (u^n - g)` on the window for the averaged one).
//! Row `K` of the returned field holds `s^K`; rows `n < K` hold `v^n`, the
//! values paired with `u^{n+1}` in the gradient.

use crate::error::{Error, Result};
use crate::forward::{ProblemSpec, SpaceTimeField, StepOperator};
use crate::grid::Mesh;

/// Number of whole time steps in `sigma`, or an error when `sigma` is not
/// aligned with the mesh or lies outside `(0, T]`.
pub fn window_steps(mesh: &Mesh, sigma: f64) -> Result<usize> {
    let dt = mesh.dt();
    let k = (sigma / dt).round();
    let aligned = sigma.is_finite() && k >= 1.0 && (k * dt - sigma).abs() <= 1e-9 * sigma.max(dt);
    if !aligned || k as usize > mesh.steps() {
        return Err(Error::MisalignedWindow { sigma, dt });
    }
    Ok(k as usize)
}

/// Misfit data driving the adjoint.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalData {
    /// `v(T) = u(T) - g`.
    Terminal { residual: Vec<f64> },
    /// Distributed source `(1/sigma)(u - g)` on `[T - sigma, T)`, `v(T) = 0`.
    /// `residuals[j]` is `u^n - g` for `n = K - window + j`.
    Windowed { sigma: f64, window: usize, residuals: Vec<Vec<f64>> },
}

impl TerminalData {
    pub fn terminal(residual: Vec<f64>) -> Self {
        TerminalData::Terminal { residual }
    }

    /// Windowed residuals of `field` against `g`.
    pub fn windowed(mesh: &Mesh, field: &SpaceTimeField, g: &[f64], sigma: f64) -> Result<Self> {
        field.check_shape(mesh)?;
        let window = window_steps(mesh, sigma)?;
        let k = mesh.steps();
        let residuals = (k - window..k).map(|n| field.row(n).iter().zip(g).map(|(u, g)| u - g).collect()).collect();
        Ok(TerminalData::Windowed { sigma, window, residuals })
    }

    pub fn sigma(&self) -> f64 {
        match self {
            TerminalData::Terminal { .. } => 0.0,
            TerminalData::Windowed { sigma, .. } => *sigma,
        }
    }

    /// Source `s^n` at level `n`, if any.
    fn source(&self, mesh: &Mesh, n: usize) -> Option<Vec<f64>> {
        let k = mesh.steps();
        match self {
            TerminalData::Terminal { residual } => (n == k).then(|| residual.clone()),
            TerminalData::Windowed { sigma, window, residuals } => {
                if n < k && n >= k - window {
                    let scale = mesh.dt() / sigma;
                    Some(residuals[n - (k - window)].iter().map(|r| r * scale).collect())
                } else {
                    None
                }
            }
        }
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        let nodes = mesh.nodes_len();
        let lens: Vec<usize> = match self {
            TerminalData::Terminal { residual } => vec![residual.len()],
            TerminalData::Windowed { sigma, window, residuals } => {
                if window_steps(mesh, *sigma)? != *window || residuals.len() != *window {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{window} window levels"),
                        got: residuals.len().to_string(),
                    });
                }
                residuals.iter().map(Vec::len).collect()
            }
        };
        if let Some(&bad) = lens.iter().find(|&&l| l != nodes) {
            return Err(Error::ShapeMismatch { expected: format!("{nodes} nodes"), got: bad.to_string() });
        }
        Ok(())
    }
}

/// Adjoint field for `spec` (whose `source` is ignored) and misfit `data`.
pub fn solve_adjoint(spec: &ProblemSpec, data: &TerminalData) -> Result<SpaceTimeField> {
    let mesh = &spec.mesh;
    data.check(mesh)?;
    let step = StepOperator::new(spec)?;
    let k = mesh.steps();
    let nodes = mesh.nodes_len();
    let mut field = SpaceTimeField::zeros(mesh);
    if let Some(s) = data.source(mesh, k) {
        field.row_mut(k).copy_from_slice(&s);
    }
    let mut carry = field.row(k).to_vec();
    let mut next = vec![0.0; nodes];
    for n in (0..k).rev() {
        step.advance(&carry, None, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { level: n });
        }
        field.row_mut(n).copy_from_slice(&next);
        carry.copy_from_slice(&next);
        if let Some(s) = data.source(mesh, n) {
            for (c, s) in carry.iter_mut().zip(&s) {
                *c += s;
            }
        }
    }
    Ok(field)
}

/// Sensitivity `xi` of the forward solution to a perturbation of `q` in
/// the direction `p`: `xi_t - (a xi_x)_x + q xi = p u`, `xi(0) = 0`.
/// The derivative of `u` in the direction `p` is `-xi`.
pub fn solve_sensitivity(spec: &ProblemSpec, u: &SpaceTimeField, direction: &[f64]) -> Result<SpaceTimeField> {
    u.check_shape(&spec.mesh)?;
    let mut source = SpaceTimeField::zeros(&spec.mesh);
    for n in 0..u.levels() {
        for ((s, &ui), &p) in source.row_mut(n).iter_mut().zip(u.row(n)).zip(direction) {
            *s = p * ui;
        }
    }
    let zero = ProblemSpec { phi: vec![0.0; spec.mesh.nodes_len()], source: None, ..spec.clone() };
    crate::forward::solve_forward(&zero.with_source(source)?)
}

/// Both sides of the discrete Green identity for the sensitivity `xi` with
/// source `p u` and the adjoint `v` with terminal datum `v^K`:
/// `(xi^K, v^K)` and `sum_n dt (p u^{n+1}, v^n)`.
pub fn duality_pair(mesh: &Mesh, u: &SpaceTimeField, xi: &SpaceTimeField, v: &SpaceTimeField, p: &[f64]) -> (f64, f64) {
    let k = mesh.steps();
    let lhs = mesh.inner(xi.row(k), v.row(k));
    let rhs = (0..k)
        .map(|n| {
            let pu: Vec<f64> = u.row(n + 1).iter().zip(p).map(|(u, p)| u * p).collect();
            mesh.inner(&pu, v.row(n)) * mesh.dt()
        })
        .sum();
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_forward;
    use crate::grid::Coefficient;

    fn spec(m: usize, k: usize, q: Vec<f64>, phi: Vec<f64>) -> ProblemSpec {
        let mesh = Mesh::new(1.0, m, 1.0, k).unwrap();
        let coeff = Coefficient::Quadratic.sample(&mesh).unwrap();
        ProblemSpec::new(mesh, coeff, q, phi).unwrap()
    }

    #[test]
    fn zero_residual_gives_zero_adjoint() {
        let s = spec(10, 8, vec![1.0; 11], vec![1.0; 11]);
        let v = solve_adjoint(&s, &TerminalData::terminal(vec![0.0; 11])).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn constant_residual_decays_like_scalar_recursion() {
        let q0 = 0.7;
        let c = 0.3;
        let s = spec(20, 50, vec![q0; 21], vec![1.0; 21]);
        let v = solve_adjoint(&s, &TerminalData::terminal(vec![c; 21])).unwrap();
        let dt = s.mesh.dt();
        for n in 0..=50 {
            let expected = c * (1.0 + dt * q0).powi(-((50 - n) as i32));
            for &x in v.row(n) {
                assert!((x - expected).abs() < 1e-14, "level {n}: {x} vs {expected}");
            }
        }
        let continuum = c * (-q0 * 1.0_f64).exp();
        assert!((v.row(0)[5] - continuum).abs() < 2e-3);
    }

    #[test]
    fn window_alignment() {
        let mesh = Mesh::new(1.0, 4, 1.0, 10).unwrap();
        assert_eq!(window_steps(&mesh, 0.4).unwrap(), 4);
        assert_eq!(window_steps(&mesh, 1.0).unwrap(), 10);
        assert!(window_steps(&mesh, 0.25).is_err());
        assert!(window_steps(&mesh, 0.0).is_err());
        assert!(window_steps(&mesh, 1.1).is_err());
    }

    #[test]
    fn duality_holds_to_roundoff() {
        let m = 24;
        let mesh = Mesh::new(1.0, m, 1.0, 30).unwrap();
        let q = mesh.sample(|x| 1.0 + 0.5 * (3.0 * x).sin());
        let phi = mesh.sample(|x| 1.0 + x);
        let s = spec(m, 30, q, phi);
        let u = solve_forward(&s).unwrap();
        let p = mesh.sample(|x| (5.0 * x).cos());
        let xi = solve_sensitivity(&s, &u, &p).unwrap();
        let r = mesh.sample(|x| x * x - 0.2);
        let v = solve_adjoint(&s, &TerminalData::terminal(r)).unwrap();
        let (lhs, rhs) = duality_pair(&mesh, &u, &xi, &v, &p);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn adjoint_of_adjoint_is_forward() {
        // Feeding the terminal datum in as an initial datum and reversing
        // time reproduces a forward solve, since the step is self-adjoint.
        let mesh = Mesh::new(1.0, 16, 0.5, 12).unwrap();
        let r = mesh.sample(|x| (2.0 * x).sin() + 1.0);
        let q = mesh.sample(|x| 0.5 + x);
        let s = spec(16, 12, q, r.clone());
        let s = ProblemSpec { mesh, ..s };
        let v = solve_adjoint(&s, &TerminalData::terminal(r)).unwrap();
        let u = solve_forward(&s).unwrap();
        let back = v.time_reversed();
        for n in 0..=12 {
            for (a, b) in back.row(n).iter().zip(u.row(n)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let s = spec(10, 8, vec![1.0; 11], vec![1.0; 11]);
        assert!(solve_adjoint(&s, &TerminalData::terminal(vec![0.0; 10])).is_err());
    }
}
