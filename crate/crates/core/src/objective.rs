//! Tikhonov cost functionals and their adjoint gradients.
//!
//! Gradients are returned as nodal densities with respect to the trapezoid
//! inner product: `<G, d>_W = sum_i w_i G_i d_i` is the directional
//! derivative of the discrete cost. The misfit part is
//! `-sum_n dt v^n_i u^{n+1}_i` (the discrete `-int_0^T u v dt`), the
//! regularizer part `N (K q)_i / w_i` with `K` the Neumann stiffness matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::{solve_adjoint, window_steps, TerminalData};
use crate::error::{Error, Result};
use crate::forward::{solve_forward, ProblemSpec, SpaceTimeField};
use crate::grid::Mesh;

/// Values `q(0)` and `q(l)` held fixed during the inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointPin {
    pub left: f64,
    pub right: f64,
}

/// Box `alpha <= q <= beta` together with the regularization weight `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub alpha: f64,
    pub beta: f64,
    pub regularization: f64,
    pub pin: Option<EndpointPin>,
}

impl AdmissibleSet {
    pub fn new(alpha: f64, beta: f64, regularization: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("need 0 < alpha <= beta, got [{alpha}, {beta}]")));
        }
        if !(regularization >= 0.0 && regularization.is_finite()) {
            return Err(Error::InvalidParameter(format!("regularization must be >= 0, got {regularization}")));
        }
        Ok(Self { alpha, beta, regularization, pin: None })
    }

    pub fn with_pin(mut self, left: f64, right: f64) -> Self {
        self.pin = Some(EndpointPin { left, right });
        self
    }

    pub fn with_regularization(mut self, regularization: f64) -> Self {
        self.regularization = regularization;
        self
    }

    /// Error listing every node outside `[alpha, beta]`.
    pub fn check(&self, q: &[f64]) -> Result<()> {
        let nodes: Vec<usize> =
            q.iter().enumerate().filter(|(_, &v)| !(v >= self.alpha && v <= self.beta)).map(|(i, _)| i).collect();
        if nodes.is_empty() {
            Ok(())
        } else {
            Err(Error::OutOfBounds { alpha: self.alpha, beta: self.beta, nodes })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub misfit: f64,
    pub regularizer: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn new(misfit: f64, regularizer: f64) -> Self {
        Self { misfit, regularizer, total: misfit + regularizer }
    }
}

/// Which misfit is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Functional {
    /// `1/2 int |u(T) - g|^2`
    Terminal,
    /// `1/(2 sigma) int_{T-sigma}^T int |u - g|^2`
    Windowed { sigma: f64 },
}

/// Everything needed to evaluate a cost: the direct problem (its `q` is
/// replaced per evaluation), the data `g` and the admissible set.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub spec: ProblemSpec,
    pub data: Vec<f64>,
    pub set: AdmissibleSet,
    pub functional: Functional,
}

/// Cost, gradient density and the states they came from.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: CostBreakdown,
    pub gradient: Vec<f64>,
    pub state: SpaceTimeField,
}

impl InverseProblem {
    pub fn new(spec: ProblemSpec, data: Vec<f64>, set: AdmissibleSet, functional: Functional) -> Result<Self> {
        if data.len() != spec.mesh.nodes_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} data values", spec.mesh.nodes_len()),
                got: data.len().to_string(),
            });
        }
        if let Functional::Windowed { sigma } = functional {
            window_steps(&spec.mesh, sigma)?;
        }
        Ok(Self { spec, data, set, functional })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.spec.mesh
    }

    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.spec.clone(), data, self.set, self.functional)
    }

    pub fn with_set(&self, set: AdmissibleSet) -> Self {
        Self { set, ..self.clone() }
    }

    pub fn with_functional(&self, functional: Functional) -> Result<Self> {
        Self::new(self.spec.clone(), self.data.clone(), self.set, functional)
    }

    /// Forward state for `q`; no box check.
    pub fn state(&self, q: &[f64]) -> Result<SpaceTimeField> {
        solve_forward(&self.spec.with_q(q.to_vec())?)
    }

    pub fn cost(&self, q: &[f64]) -> Result<CostBreakdown> {
        self.set.check(q)?;
        self.cost_unchecked(q)
    }

    pub(crate) fn cost_unchecked(&self, q: &[f64]) -> Result<CostBreakdown> {
        let u = self.state(q)?;
        Ok(self.cost_of_state(q, &u))
    }

    fn cost_of_state(&self, q: &[f64], u: &SpaceTimeField) -> CostBreakdown {
        let mesh = self.mesh();
        let misfit = match self.functional {
            Functional::Terminal => 0.5 * residual_norm_sq(mesh, u.last(), &self.data),
            Functional::Windowed { sigma } => {
                let k = mesh.steps();
                let window = window_steps(mesh, sigma).expect("validated at construction");
                let sum: f64 = (k - window..k).map(|n| residual_norm_sq(mesh, u.row(n), &self.data)).sum();
                sum * mesh.dt() / (2.0 * sigma)
            }
        };
        CostBreakdown::new(misfit, regularizer(mesh, q, self.set.regularization))
    }

    pub fn evaluate(&self, q: &[f64]) -> Result<Evaluation> {
        self.set.check(q)?;
        self.evaluate_unchecked(q)
    }

    pub(crate) fn evaluate_unchecked(&self, q: &[f64]) -> Result<Evaluation> {
        let spec = self.spec.with_q(q.to_vec())?;
        let u = solve_forward(&spec)?;
        let cost = self.cost_of_state(q, &u);
        let mesh = self.mesh();
        let data = match self.functional {
            Functional::Terminal => {
                TerminalData::terminal(u.last().iter().zip(&self.data).map(|(u, g)| u - g).collect())
            }
            Functional::Windowed { sigma } => TerminalData::windowed(mesh, &u, &self.data, sigma)?,
        };
        let v = solve_adjoint(&spec, &data)?;
        let mut gradient = vec![0.0; mesh.nodes_len()];
        let dt = mesh.dt();
        for n in 0..mesh.steps() {
            for ((g, un), vn) in gradient.iter_mut().zip(u.row(n + 1)).zip(v.row(n)) {
                *g -= dt * un * vn;
            }
        }
        let n_reg = self.set.regularization;
        if n_reg != 0.0 {
            let w = mesh.weights();
            for (i, s) in stiffness_action(mesh, q).into_iter().enumerate() {
                gradient[i] += n_reg * s / w[i];
            }
        }
        if self.set.pin.is_some() {
            let last = gradient.len() - 1;
            gradient[0] = 0.0;
            gradient[last] = 0.0;
        }
        Ok(Evaluation { cost, gradient, state: u })
    }

    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(q)?.gradient)
    }
}

fn residual_norm_sq(mesh: &Mesh, u: &[f64], g: &[f64]) -> f64 {
    let r: Vec<f64> = u.iter().zip(g).map(|(u, g)| u - g).collect();
    mesh.inner(&r, &r)
}

/// `(N/2) sum_faces ((q_{i+1} - q_i)/h)^2 h`
pub fn regularizer(mesh: &Mesh, q: &[f64], weight: f64) -> f64 {
    let h = mesh.h();
    let sum: f64 = q.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0]) / h).sum();
    0.5 * weight * sum
}

/// `K q` for the Neumann stiffness matrix `K`, so that
/// `d/dq (1/2) sum_faces (dq/h)^2 h = K q`.
pub fn stiffness_action(mesh: &Mesh, q: &[f64]) -> Vec<f64> {
    let h = mesh.h();
    let mut out = vec![0.0; q.len()];
    for (i, w) in q.windows(2).enumerate() {
        let flux = (w[1] - w[0]) / h;
        out[i] -= flux;
        out[i + 1] += flux;
    }
    out
}

fn terminal_problem(
    spec: &ProblemSpec,
    g: &[f64],
    set: &AdmissibleSet,
    functional: Functional,
) -> Result<InverseProblem> {
    InverseProblem::new(spec.clone(), g.to_vec(), *set, functional)
}

/// `J(q) = 1/2 int |u(T; q) - g|^2 + N/2 int |q'|^2`
pub fn cost_j(q: &[f64], g: &[f64], set: &AdmissibleSet, spec: &ProblemSpec) -> Result<CostBreakdown> {
    terminal_problem(spec, g, set, Functional::Terminal)?.cost(q)
}

/// `J_sigma(q) = 1/(2 sigma) int_{T-sigma}^T int |u - g|^2 + N/2 int |q'|^2`
pub fn cost_j_sigma(
    q: &[f64],
    g: &[f64],
    set: &AdmissibleSet,
    sigma: f64,
    spec: &ProblemSpec,
) -> Result<CostBreakdown> {
    terminal_problem(spec, g, set, Functional::Windowed { sigma })?.cost(q)
}

pub fn gradient_j(q: &[f64], g: &[f64], set: &AdmissibleSet, spec: &ProblemSpec) -> Result<Vec<f64>> {
    terminal_problem(spec, g, set, Functional::Terminal)?.gradient(q)
}

pub fn gradient_j_sigma(q: &[f64], g: &[f64], set: &AdmissibleSet, sigma: f64, spec: &ProblemSpec) -> Result<Vec<f64>> {
    terminal_problem(spec, g, set, Functional::Windowed { sigma })?.gradient(q)
}

/// Random admissible coefficient: uniform nodal values in the box, smoothed
/// by a few passes of a three-point average, endpoints pinned if required.
pub fn random_admissible(mesh: &Mesh, set: &AdmissibleSet, rng: &mut impl Rng) -> Vec<f64> {
    let n = mesh.nodes_len();
    let mut h: Vec<f64> = (0..n).map(|_| rng.random_range(set.alpha..=set.beta)).collect();
    for _ in 0..3 {
        let prev = h.clone();
        for i in 0..n {
            let lo = prev[i.saturating_sub(1)];
            let hi = prev[(i + 1).min(n - 1)];
            h[i] = (lo + 2.0 * prev[i] + hi) / 4.0;
        }
    }
    if let Some(pin) = set.pin {
        h[0] = pin.left;
        h[n - 1] = pin.right;
    }
    h
}

/// Most negative value of the discrete variational inequality
/// `int int u v (q - h) - N int q' (q - h)' = <G, h - q>_W` over `samples`
/// random `h` in the admissible set. Non-negative (up to round-off) at a
/// minimizer over the box.
pub fn check_necessary_condition(problem: &InverseProblem, q: &[f64], samples: usize, seed: u64) -> Result<f64> {
    let g = problem.gradient(q)?;
    let mesh = problem.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let h = random_admissible(mesh, &problem.set, &mut rng);
        let dir: Vec<f64> = h.iter().zip(q).map(|(h, q)| h - q).collect();
        worst = worst.min(mesh.inner(&g, &dir));
    }
    Ok(worst)
}
