//! Projected gradient descent over the admissible box and the fixed-point
//! iteration `q <- q + lambda (u(T; q) - g)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mesh;
use crate::objective::{AdmissibleSet, CostBreakdown, Functional, InverseProblem};
use crate::tridiag::SymTridiag;

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_HALVINGS: usize = 60;
/// Below this value of `u(T)` the fixed-point update carries no information.
pub const IDENTIFIABILITY_FLOOR: f64 = 1e-10;
const DIVERGENCE_RUN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    StalledLineSearch,
    ContractionConverged,
    ContractionViolated,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient-tolerance",
            Termination::MaxIterations => "max-iterations",
            Termination::StalledLineSearch => "stalled-line-search",
            Termination::ContractionConverged => "contraction-converged",
            Termination::ContractionViolated => "contraction-violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub q_final: Vec<f64>,
    pub iterations: usize,
    pub cost_history: Vec<CostBreakdown>,
    /// Projected-gradient norms (descent) per iterate.
    pub grad_norm_history: Vec<f64>,
    /// `||q_{k+1} - q_k||_inf` per fixed-point iteration.
    pub update_history: Vec<f64>,
    pub termination: Termination,
    /// Nodes sitting on a bound with the gradient pointing out of the box.
    pub active_bounds: Vec<usize>,
    /// Nodes where `u(T)` is below the identifiability floor.
    pub unidentifiable: Vec<usize>,
}

/// Inner product in which the descent direction is the Riesz
/// representative of the derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GradientMetric {
    /// Trapezoid `L^2`: the direction is the gradient density itself.
    L2,
    /// `(p, r) = int p r + smoothing int p' r'`.
    Sobolev { smoothing: f64 },
    /// `(p, r) = mass int p r + N int p' r'` with `N` the regularization
    /// weight of the problem. `mass` should approximate the curvature of
    /// the misfit, roughly `T^2 |u(T)|^2`, so that unit steps are close
    /// to Newton steps for the smooth components.
    Regularized { mass: f64 },
    /// `Regularized` with `mass = T^2 ||g||^2 / l` taken from the data.
    Adaptive,
}

impl GradientMetric {
    fn resolve(self, problem: &InverseProblem) -> Self {
        match self {
            GradientMetric::Adaptive => {
                let mesh = problem.mesh();
                let t = mesh.final_time();
                let mass = t * t * mesh.inner(&problem.data, &problem.data) / mesh.length();
                GradientMetric::Regularized { mass: if mass > 0.0 { mass } else { 1.0 } }
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Absolute tolerance on the projected-gradient norm; `None` means
    /// `rel_grad_tol` times its initial value.
    pub grad_tol: Option<f64>,
    pub rel_grad_tol: f64,
    pub max_iter: usize,
    pub metric: GradientMetric,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { grad_tol: None, rel_grad_tol: 1e-8, max_iter: 500, metric: GradientMetric::L2 }
    }
}

/// Nodewise clamp to `[alpha, beta]`, then pinned endpoints.
pub fn project(q: &[f64], set: &AdmissibleSet) -> Vec<f64> {
    let mut p: Vec<f64> = q.iter().map(|v| v.clamp(set.alpha, set.beta)).collect();
    if let Some(pin) = set.pin {
        let last = p.len() - 1;
        p[0] = pin.left;
        p[last] = pin.right;
    }
    p
}

fn direction(mesh: &Mesh, set: &AdmissibleSet, gradient: &[f64], metric: GradientMetric) -> Result<Vec<f64>> {
    let (mass, smoothing) = match metric {
        GradientMetric::L2 => return Ok(gradient.to_vec()),
        GradientMetric::Sobolev { smoothing } => (1.0, smoothing),
        GradientMetric::Regularized { mass } => (mass, set.regularization),
        GradientMetric::Adaptive => unreachable!("resolved before use"),
    };
    if smoothing == 0.0 {
        return Ok(gradient.iter().map(|g| g / mass).collect());
    }
    let w = mesh.weights();
    let m = mesh.cells();
    let c = smoothing / mesh.h();
    let mut diag: Vec<f64> = w.iter().map(|w| mass * w).collect();
    let mut off = vec![-c; m];
    for i in 0..m {
        diag[i] += c;
        diag[i + 1] += c;
    }
    let mut rhs: Vec<f64> = gradient.iter().zip(&w).map(|(g, w)| g * w).collect();
    if set.pin.is_some() {
        diag[0] = 1.0;
        diag[m] = 1.0;
        off[0] = 0.0;
        off[m - 1] = 0.0;
        rhs[0] = 0.0;
        rhs[m] = 0.0;
    }
    SymTridiag::new(diag, off).factor()?.solve_in_place(&mut rhs);
    Ok(rhs)
}

fn projected_step(q: &[f64], dir: &[f64], s: f64, set: &AdmissibleSet) -> Vec<f64> {
    let trial: Vec<f64> = q.iter().zip(dir).map(|(q, d)| q - s * d).collect();
    project(&trial, set)
}

fn projected_gradient_norm(mesh: &Mesh, q: &[f64], dir: &[f64], set: &AdmissibleSet) -> f64 {
    let p = projected_step(q, dir, 1.0, set);
    let diff: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
    mesh.norm(&diff)
}

fn active_bounds(q: &[f64], gradient: &[f64], set: &AdmissibleSet) -> Vec<usize> {
    q.iter()
        .zip(gradient)
        .enumerate()
        .filter(|(_, (&q, &g))| (q <= set.alpha && g > 0.0) || (q >= set.beta && g < 0.0))
        .map(|(i, _)| i)
        .collect()
}

/// Projected gradient descent with Armijo backtracking: start at `s = 1`,
/// halve until `J(P(q - s D)) <= J(q) - 1e-4 <G, q - P(q - s D)>`.
pub fn minimize(problem: &InverseProblem, q0: &[f64], options: &MinimizeOptions) -> Result<InversionResult> {
    let set = &problem.set;
    let mesh = *problem.mesh();
    let metric = options.metric.resolve(problem);
    match metric {
        GradientMetric::Sobolev { smoothing } if !(smoothing >= 0.0 && smoothing.is_finite()) => {
            return Err(Error::InvalidParameter(format!("smoothing must be >= 0, got {smoothing}")));
        }
        GradientMetric::Regularized { mass } if !(mass > 0.0 && mass.is_finite()) => {
            return Err(Error::InvalidParameter(format!("metric mass must be positive, got {mass}")));
        }
        _ => {}
    }
    let mut q = project(q0, set);
    let mut eval = problem.evaluate(&q)?;
    let mut dir = direction(&mesh, set, &eval.gradient, metric)?;
    let mut pg_norm = projected_gradient_norm(&mesh, &q, &dir, set);
    let tol = options.grad_tol.unwrap_or(options.rel_grad_tol * pg_norm);

    let mut cost_history = vec![eval.cost];
    let mut grad_norm_history = vec![pg_norm];
    let mut iterations = 0;
    let termination = loop {
        if pg_norm <= tol {
            break Termination::GradientTolerance;
        }
        if iterations >= options.max_iter {
            break Termination::MaxIterations;
        }
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = projected_step(&q, &dir, s, set);
            let moved: Vec<f64> = q.iter().zip(&trial).map(|(a, b)| a - b).collect();
            let decrease = ARMIJO * mesh.inner(&eval.gradient, &moved);
            let cost = problem.cost_unchecked(&trial)?;
            if cost.total <= eval.cost.total - decrease && cost.total < eval.cost.total {
                accepted = Some(trial);
                break;
            }
            s *= BACKTRACK;
        }
        let Some(next) = accepted else {
            break Termination::StalledLineSearch;
        };
        q = next;
        eval = problem.evaluate_unchecked(&q)?;
        dir = direction(&mesh, set, &eval.gradient, metric)?;
        pg_norm = projected_gradient_norm(&mesh, &q, &dir, set);
        cost_history.push(eval.cost);
        grad_norm_history.push(pg_norm);
        iterations += 1;
    };

    Ok(InversionResult {
        active_bounds: active_bounds(&q, &eval.gradient, set),
        q_final: q,
        iterations,
        cost_history,
        grad_norm_history,
        update_history: Vec::new(),
        termination,
        unidentifiable: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { lambda: 1.0, tol: 1e-10, max_iter: 500 }
    }
}

/// Rejects `lambda` unless `lambda > 0` and `lambda ||phi||_inf < 2`.
pub fn check_contraction_guard(problem: &InverseProblem, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let product = lambda * problem.spec.phi_sup();
    if product >= 2.0 {
        return Err(Error::ContractionGuard { product });
    }
    Ok(())
}

/// One application of the projected map; returns `P[q]` and the nodes
/// where the update was suppressed.
pub fn fixed_point_map(problem: &InverseProblem, q: &[f64], lambda: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    let u = problem.state(q)?;
    let mut flagged = Vec::new();
    let raw: Vec<f64> = u
        .last()
        .iter()
        .zip(&problem.data)
        .zip(q)
        .enumerate()
        .map(|(i, ((&u, &g), &q))| {
            if u < IDENTIFIABILITY_FLOOR {
                flagged.push(i);
                q
            } else {
                q + lambda * (u - g)
            }
        })
        .collect();
    Ok((project(&raw, &problem.set), flagged))
}

pub fn fixed_point(problem: &InverseProblem, q0: &[f64], options: &FixedPointOptions) -> Result<InversionResult> {
    check_contraction_guard(problem, options.lambda)?;
    let terminal = problem.with_functional(Functional::Terminal)?;
    let mut q = project(q0, &problem.set);
    let mut cost_history = vec![terminal.cost_unchecked(&q)?];
    let mut update_history = Vec::new();
    let mut unidentifiable = Vec::new();
    let mut growth_run = 0;
    let mut iterations = 0;
    let termination = loop {
        if iterations >= options.max_iter {
            break Termination::MaxIterations;
        }
        let (next, flagged) = fixed_point_map(problem, &q, options.lambda)?;
        unidentifiable = flagged;
        let update = q.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if update_history.last().is_some_and(|&prev| update > prev) {
            growth_run += 1;
        } else {
            growth_run = 0;
        }
        update_history.push(update);
        q = next;
        iterations += 1;
        cost_history.push(terminal.cost_unchecked(&q)?);
        if update <= options.tol {
            break Termination::ContractionConverged;
        }
        if growth_run >= DIVERGENCE_RUN {
            break Termination::ContractionViolated;
        }
    };
    Ok(InversionResult {
        q_final: q,
        iterations,
        cost_history,
        grad_norm_history: Vec::new(),
        update_history,
        termination,
        active_bounds: Vec::new(),
        unidentifiable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{solve_forward, ProblemSpec};
    use crate::grid::Coefficient;

    fn problem(m: usize, k: usize, q_star: f64, n_reg: f64) -> InverseProblem {
        let mesh = Mesh::new(1.0, m, 1.0, k).unwrap();
        let coeff = Coefficient::Quadratic.sample(&mesh).unwrap();
        let spec = ProblemSpec::new(mesh, coeff, vec![q_star; m + 1], vec![1.0; m + 1]).unwrap();
        let g = solve_forward(&spec).unwrap().last().to_vec();
        let set = AdmissibleSet::new(0.1, 5.0, n_reg).unwrap();
        InverseProblem::new(spec, g, set, Functional::Terminal).unwrap()
    }

    #[test]
    fn projection() {
        let set = AdmissibleSet::new(0.5, 2.0, 0.0).unwrap();
        let inside = vec![0.5, 1.0, 2.0];
        assert_eq!(project(&inside, &set), inside);
        assert_eq!(project(&[3.0; 3], &set), vec![2.0; 3]);
        let q = vec![-1.0, 0.7, 9.0, 1.2];
        let once = project(&q, &set);
        assert_eq!(project(&once, &set), once);
        let pinned = set.with_pin(1.0, 1.5);
        assert_eq!(project(&q, &pinned), vec![1.0, 0.7, 2.0, 1.5]);
    }

    #[test]
    fn starting_at_minimizer_stops_immediately() {
        let p = problem(20, 40, 1.0, 1e-6);
        let r = minimize(&p, &[1.0; 21], &MinimizeOptions::default()).unwrap();
        assert_eq!(r.termination, Termination::GradientTolerance);
        assert!(r.iterations <= 1);
    }

    #[test]
    fn recovers_constant_target() {
        let p = problem(40, 200, 1.0, 1e-8);
        let r = minimize(&p, &[2.0; 41], &MinimizeOptions::default()).unwrap();
        let err: Vec<f64> = r.q_final.iter().map(|q| q - 1.0).collect();
        assert!(p.mesh().norm(&err) <= 1e-2, "{:?}", r.termination);
        for w in r.cost_history.windows(2) {
            assert!(w[1].total < w[0].total);
        }
    }

    #[test]
    fn guard_rejects_large_lambda() {
        let p = problem(10, 10, 1.0, 0.0);
        assert!(matches!(
            fixed_point(&p, &[1.0; 11], &FixedPointOptions { lambda: 2.0, ..Default::default() }),
            Err(Error::ContractionGuard { .. })
        ));
        assert!(check_contraction_guard(&p, 1.99).is_ok());
        assert!(check_contraction_guard(&p, 0.0).is_err());
    }

    #[test]
    fn fixed_point_is_stationary_at_target() {
        let p = problem(10, 20, 1.0, 0.0);
        let r = fixed_point(&p, &[1.0; 11], &FixedPointOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.update_history, vec![0.0]);
        assert_eq!(r.termination, Termination::ContractionConverged);
    }

    #[test]
    fn dirichlet_endpoints_are_unidentifiable() {
        let mesh = Mesh::new(1.0, 10, 1.0, 20).unwrap();
        let coeff = Coefficient::Power { alpha: 0.5, beta: 0.5 }.sample(&mesh).unwrap();
        let spec = ProblemSpec::new(mesh, coeff, vec![1.0; 11], vec![1.0; 11]).unwrap();
        let g = solve_forward(&spec).unwrap().last().to_vec();
        let p = InverseProblem::new(spec, g, AdmissibleSet::new(0.1, 5.0, 0.0).unwrap(), Functional::Terminal).unwrap();
        let r = fixed_point(&p, &[1.5; 11], &FixedPointOptions::default()).unwrap();
        assert_eq!(r.unidentifiable, vec![0, 10]);
        assert_eq!(r.q_final[0], 1.5);
    }
}
