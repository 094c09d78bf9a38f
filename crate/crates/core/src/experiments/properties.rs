use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::{duality_pair, solve_adjoint, solve_sensitivity, TerminalData};
use crate::error::Result;
use crate::forward::{solve_forward, solve_forward_explicit, ProblemSpec, SpaceTimeField};
use crate::grid::{Coefficient, Mesh};
use crate::objective::{AdmissibleSet, Functional, InverseProblem};
use crate::optimize::fixed_point_map;

const SUP_TOL: f64 = 1e-12;
const GRADIENT_TOL: f64 = 1e-6;
const DUALITY_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-5;

/// Trial counts per check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySuite {
    pub max_principle: usize,
    pub adjoint_bound: usize,
    pub contraction: usize,
    pub gradient: usize,
    pub duality: usize,
    pub seed: u64,
    /// Swap the implicit solver for forward Euler in the maximum-principle
    /// check. Test hook for the failure path.
    pub inject_fault: bool,
}

impl Default for PropertySuite {
    fn default() -> Self {
        Self {
            max_principle: 100,
            adjoint_bound: 50,
            contraction: 20,
            gradient: 10,
            duality: 10,
            seed: 0,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Worst observed value of the checked quantity (see `tolerance`).
    pub worst: f64,
    pub tolerance: f64,
    /// First failing trial, if any.
    pub counterexample: Option<String>,
}

impl CheckOutcome {
    fn new(name: &str, tolerance: f64) -> Self {
        Self { name: name.into(), trials: 0, failures: 0, worst: 0.0, tolerance, counterexample: None }
    }

    fn record(&mut self, trial: usize, value: f64, ok: bool, describe: impl FnOnce() -> String) {
        self.trials += 1;
        if !(value <= self.worst) {
            self.worst = value;
        }
        if !ok {
            self.failures += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(format!("trial {trial}: {}", describe()));
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Random strong-degenerate problem without source: random mesh, length,
/// horizon, coefficient exponents, `q >= 0` and `phi >= 0`.
pub fn random_strong_spec(rng: &mut impl Rng) -> Result<ProblemSpec> {
    let m = rng.random_range(8..=40);
    let k = rng.random_range(5..=60);
    let l = rng.random_range(0.5..=2.0);
    let t = rng.random_range(0.05..=1.0);
    let mesh = Mesh::new(l, m, t, k)?;
    let coefficient = if rng.random_bool(0.5) {
        Coefficient::Quadratic
    } else {
        Coefficient::Power { alpha: rng.random_range(1.0..=2.5), beta: rng.random_range(1.0..=2.5) }
    };
    let coeff = coefficient.sample(&mesh)?;
    let q = (0..=m).map(|_| rng.random_range(0.0..=3.0)).collect();
    let phi = (0..=m).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..=2.0) }).collect();
    ProblemSpec::new(mesh, coeff, q, phi)
}

fn describe(spec: &ProblemSpec) -> String {
    let m = &spec.mesh;
    format!("l={} T={} M={} K={}", m.length(), m.final_time(), m.cells(), m.steps())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn max_principle(suite: &PropertySuite, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("max-principle", SUP_TOL);
    for trial in 0..suite.max_principle {
        let spec = random_strong_spec(rng)?;
        let bound = spec.phi_sup();
        let field = if suite.inject_fault { solve_forward_explicit(&spec) } else { solve_forward(&spec) };
        // Excess over [0, ||phi||]; a blow-up counts as unbounded.
        let excess = match &field {
            Ok(u) => u.values().iter().fold(0.0_f64, |e, &v| e.max(-v).max(v - bound)),
            Err(_) => f64::INFINITY,
        };
        out.record(trial, excess, excess <= SUP_TOL, || format!("{} excess={excess:e}", describe(&spec)));
    }
    Ok(out)
}

fn adjoint_bound(suite: &PropertySuite, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("adjoint-sup-bound", SUP_TOL);
    for trial in 0..suite.adjoint_bound {
        let spec = random_strong_spec(rng)?;
        let scale = rng.random_range(1e-3..=10.0);
        let residual: Vec<f64> = (0..spec.mesh.nodes_len()).map(|_| scale * rng.random_range(-1.0..=1.0)).collect();
        let v = solve_adjoint(&spec, &TerminalData::terminal(residual.clone()))?;
        let excess = v.max_abs() - sup(&residual);
        out.record(trial, excess, excess <= SUP_TOL, || format!("{} excess={excess:e}", describe(&spec)));
    }
    Ok(out)
}

/// Ordered pairs `q1 >= q2`; the returned value is
/// `||P q1 - P q2|| / ||q1 - q2||`, which must stay below one.
fn contraction(suite: &PropertySuite, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("monotone-contraction", 1.0);
    out.worst = f64::NEG_INFINITY;
    for trial in 0..suite.contraction {
        let mut spec = random_strong_spec(rng)?;
        let nodes = spec.mesh.nodes_len();
        spec.phi = (0..nodes).map(|_| rng.random_range(0.2..=1.0)).collect();
        let lambda = rng.random_range(0.5..=1.9) / spec.phi_sup();
        let g = solve_forward(&spec)?.last().to_vec();
        let set = AdmissibleSet::new(1e-3, 100.0, 0.0)?;
        let problem = InverseProblem::new(spec, g, set, Functional::Terminal)?;
        let q2: Vec<f64> = (0..nodes).map(|_| rng.random_range(0.01..=3.0)).collect();
        let q1: Vec<f64> = q2.iter().map(|q| q + rng.random_range(0.0..=1.0)).collect();
        let (p1, _) = fixed_point_map(&problem, &q1, lambda)?;
        let (p2, _) = fixed_point_map(&problem, &q2, lambda)?;
        let before = q1.iter().zip(&q2).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let after = p1.iter().zip(&p2).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let ratio = after / before;
        out.record(trial, ratio, after < before, || {
            format!("{} lambda={lambda} before={before:e} after={after:e}", describe(&problem.spec))
        });
    }
    Ok(out)
}

fn gradient(suite: &PropertySuite, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("gradient-fd", GRADIENT_TOL);
    let mut trial = 0;
    for _ in 0..suite.gradient {
        let spec = random_strong_spec(rng)?;
        let mesh = spec.mesh;
        let nodes = mesh.nodes_len();
        let g: Vec<f64> = (0..nodes).map(|_| rng.random_range(0.0..=1.0)).collect();
        let n_reg = rng.random_range(0.0..=1e-2);
        let set = AdmissibleSet::new(1e-3, 100.0, n_reg)?;
        let q: Vec<f64> = (0..nodes).map(|_| rng.random_range(0.5..=3.0)).collect();
        let d: Vec<f64> = (0..nodes).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let window = rng.random_range(1..=mesh.steps());
        for functional in [Functional::Terminal, Functional::Windowed { sigma: window as f64 * mesh.dt() }] {
            let problem = InverseProblem::new(spec.clone(), g.clone(), set, functional)?;
            let grad = problem.gradient(&q)?;
            let analytic = mesh.inner(&grad, &d);
            let shifted = |s: f64| -> Result<f64> {
                let qs: Vec<f64> = q.iter().zip(&d).map(|(q, d)| q + s * d).collect();
                Ok(problem.cost(&qs)?.total)
            };
            let fd = (shifted(FD_STEP)? - shifted(-FD_STEP)?) / (2.0 * FD_STEP);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-300);
            out.record(trial, rel, rel <= GRADIENT_TOL, || {
                format!("{} {functional:?} analytic={analytic:e} fd={fd:e}", describe(&spec))
            });
            trial += 1;
        }
    }
    Ok(out)
}

fn duality(suite: &PropertySuite, rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("duality", DUALITY_TOL);
    for trial in 0..suite.duality {
        let spec = random_strong_spec(rng)?;
        let nodes = spec.mesh.nodes_len();
        let p: Vec<f64> = (0..nodes).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let r: Vec<f64> = (0..nodes).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let u: SpaceTimeField = solve_forward(&spec)?;
        let xi = solve_sensitivity(&spec, &u, &p)?;
        let v = solve_adjoint(&spec, &TerminalData::terminal(r))?;
        let (lhs, rhs) = duality_pair(&spec.mesh, &u, &xi, &v, &p);
        let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        out.record(trial, rel, rel <= DUALITY_TOL, || format!("{} lhs={lhs:e} rhs={rhs:e}", describe(&spec)));
    }
    Ok(out)
}

/// Randomized checks of the scheme's structural guarantees. Failures are
/// reported in the outcome, never returned as errors; an error means a
/// solve itself broke down.
pub fn run_property_suite(suite: &PropertySuite) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let checks = vec![
        max_principle(suite, &mut rng)?,
        adjoint_bound(suite, &mut rng)?,
        contraction(suite, &mut rng)?,
        gradient(suite, &mut rng)?,
        duality(suite, &mut rng)?,
    ];
    Ok(PropertyReport { seed: suite.seed, checks })
}
