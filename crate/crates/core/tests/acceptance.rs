//! One test per acceptance criterion. Each prints a single
//! `PASS`/`FAIL` line with the measured quantities before asserting, so
//! `cargo test --test acceptance -- --nocapture` reads as a checklist.

use std::time::{Duration, Instant};

use radcoef::adjoint::window_steps;
use radcoef::experiments::{
    manufacture, run_convergence_study, run_property_suite, run_stability_study, ConvergenceConfig, InitialDatum,
    Profile, PropertySuite, StabilityConfig,
};
use radcoef::fichera::{classify_rectangle, BoundaryClass, FicheraOperator, Side};
use radcoef::forward::{solve_forward, solve_forward_viscous, space_time_norm, ProblemSpec, SpaceTimeField};
use radcoef::grid::{Coefficient, Mesh};
use radcoef::objective::{AdmissibleSet, Functional, InverseProblem};
use radcoef::optimize::{check_contraction_guard, fixed_point, FixedPointOptions, IDENTIFIABILITY_FLOOR};
use radcoef::Error;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("{} criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn constant_spec(mesh: Mesh, q: f64) -> ProblemSpec {
    let coeff = Coefficient::Quadratic.sample(&mesh).unwrap();
    let n = mesh.nodes_len();
    ProblemSpec::new(mesh, coeff, vec![q; n], vec![1.0; n]).unwrap()
}

fn suite(counts: impl FnOnce(&mut PropertySuite)) -> PropertySuite {
    let mut s = PropertySuite {
        max_principle: 0,
        adjoint_bound: 0,
        contraction: 0,
        gradient: 0,
        duality: 0,
        ..Default::default()
    };
    counts(&mut s);
    s
}

#[test]
fn criterion_01_constant_coefficient_exactness() {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000).unwrap();
    let spec = constant_spec(mesh, 1.0);
    let started = Instant::now();
    let u = solve_forward(&spec).unwrap();
    let elapsed = started.elapsed();
    let mut err = 0.0_f64;
    for (n, row) in u.rows().enumerate() {
        let exact = (-mesh.time(n)).exp();
        err = row.iter().fold(err, |e, v| e.max((v - exact).abs()));
    }
    report(
        1,
        "constant-coefficient exactness",
        err <= 2e-3 && elapsed < Duration::from_secs(1),
        format!("max |u - e^-t| = {err:.3e} (<= 2e-3), runtime {elapsed:?} (< 1 s)"),
    );
}

#[test]
fn criterion_02_discrete_maximum_principle() {
    let r = run_property_suite(&suite(|s| s.max_principle = 100)).unwrap();
    let c = r.check("max-principle").unwrap();
    report(
        2,
        "discrete maximum principle",
        c.trials == 100 && c.passed(),
        format!("{} specs, {} violations, worst excess {:e}", c.trials, c.failures, c.worst),
    );
}

#[test]
fn criterion_03_adjoint_sup_bound() {
    let r = run_property_suite(&suite(|s| s.adjoint_bound = 50)).unwrap();
    let c = r.check("adjoint-sup-bound").unwrap();
    report(
        3,
        "adjoint sup bound",
        c.trials == 50 && c.passed(),
        format!("{} residuals, {} violations, worst ||v|| - ||r|| = {:e}", c.trials, c.failures, c.worst),
    );
}

#[test]
fn criterion_04_gradient_fidelity() {
    let r = run_property_suite(&suite(|s| s.gradient = 10)).unwrap();
    let c = r.check("gradient-fd").unwrap();
    report(
        4,
        "gradient fidelity",
        c.trials == 20 && c.passed(),
        format!("{} checks (J and J_sigma), worst relative error {:.2e} (<= 1e-6)", c.trials, c.worst),
    );
}

#[test]
fn criterion_05_fixed_point_behavior() {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000).unwrap();
    let q_star = 1.2;
    let bench = manufacture(
        Profile::Constant { value: q_star },
        &mesh,
        Coefficient::Quadratic,
        InitialDatum::Constant { value: 1.0 },
        (0.5, 2.0),
    )
    .unwrap();
    let set = AdmissibleSet::new(0.5, 2.0, 0.0).unwrap();
    let problem = InverseProblem::new(bench.spec.clone(), bench.data.clone(), set, Functional::Terminal).unwrap();
    let lambda = 1.5;
    let opts = FixedPointOptions { lambda, tol: 1e-12, max_iter: 200 };
    let r = fixed_point(&problem, &vec![0.6; mesh.nodes_len()], &opts).unwrap();
    let u = problem.state(&r.q_final).unwrap();
    let err = r
        .q_final
        .iter()
        .zip(u.last())
        .filter(|(_, &u)| u >= IDENTIFIABILITY_FLOOR)
        .fold(0.0_f64, |m, (q, _)| m.max((q - q_star).abs()));
    let rejected = matches!(check_contraction_guard(&problem, 2.0), Err(Error::ContractionGuard { .. }))
        && matches!(
            fixed_point(&problem, &vec![1.0; mesh.nodes_len()], &FixedPointOptions { lambda: 2.5, ..opts }),
            Err(Error::ContractionGuard { .. })
        );
    report(
        5,
        "fixed-point behavior",
        r.iterations <= 200 && err <= 1e-2 && rejected,
        format!(
            "lambda ||phi|| = {lambda}: {} iterations, {}, ||q - q*|| = {err:.2e} (<= 1e-2); lambda ||phi|| >= 2 rejected: {rejected}",
            r.iterations,
            r.termination.as_str()
        ),
    );
}

#[test]
fn criterion_06_monotone_contraction() {
    let r = run_property_suite(&suite(|s| s.contraction = 20)).unwrap();
    let c = r.check("monotone-contraction").unwrap();
    report(
        6,
        "monotone contraction",
        c.trials == 20 && c.passed(),
        format!("{} ordered pairs, largest ||Pq1 - Pq2|| / ||q1 - q2|| = {:.4} (< 1)", c.trials, c.worst),
    );
}

#[test]
fn criterion_07_vanishing_viscosity() {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000).unwrap();
    let spec = constant_spec(mesh, 1.0);
    let u = solve_forward(&spec).unwrap();
    let dists: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let ue = solve_forward_viscous(&spec, eps).unwrap();
            let diff: Vec<f64> = ue.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
            let rows = diff.chunks(mesh.nodes_len()).map(<[f64]>::to_vec).collect();
            space_time_norm(&mesh, &SpaceTimeField::from_rows(rows).unwrap())
        })
        .collect();
    let monotone = dists.windows(2).all(|w| w[1] < w[0]);
    report(
        7,
        "vanishing viscosity",
        monotone,
        format!(
            "||u_eps - u|| for eps = 1e-1..1e-4: {}",
            dists.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

/// Smooth target whose curvature is nearly in the range of the adjoint
/// for constant initial data.
fn convergence_benchmark() -> radcoef::experiments::Benchmark {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000).unwrap();
    manufacture(
        Profile::Parabola { base: 1.0, height: 0.3 },
        &mesh,
        Coefficient::Quadratic,
        InitialDatum::Constant { value: 1.0 },
        (0.5, 2.0),
    )
    .unwrap()
}

#[test]
fn criterion_08_convergence_rates() {
    let bench = convergence_benchmark();
    assert_eq!(window_steps(bench.mesh(), 4.0 * bench.mesh().dt()).unwrap(), 4);
    let config = ConvergenceConfig { deltas: vec![1e-1, 1e-2, 1e-3], coupling: 1.0, ..Default::default() };
    let started = Instant::now();
    let r = run_convergence_study(&bench, &config).unwrap();
    let elapsed = started.elapsed();
    let err = r.fit("coeff_err_L2", "delta").unwrap().slope;
    let res = r.fit("residual_norm", "delta").unwrap().slope;
    let ok = (0.3..=0.8).contains(&err) && (0.7..=1.3).contains(&res) && elapsed < Duration::from_secs(300);
    report(
        8,
        "convergence rates",
        ok,
        format!("error slope {err:.3} (in [0.3, 0.8]), residual slope {res:.3} (in [0.7, 1.3]), runtime {elapsed:.1?} (< 5 min)"),
    );
}

#[test]
fn criterion_09_stability_ceiling() {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000).unwrap();
    let bench = manufacture(
        Profile::standard_bump(),
        &mesh,
        Coefficient::Quadratic,
        InitialDatum::Constant { value: 1.0 },
        (0.5, 2.0),
    )
    .unwrap();
    let config = StabilityConfig {
        regularization: 1e-3,
        deltas: vec![1e-3, 2e-3, 4e-3],
        sweep: vec![1e-2, 1e-3, 1e-4],
        sweep_delta: 1e-3,
        ..Default::default()
    };
    let r = run_stability_study(&bench, &config).unwrap();
    let factors = &r.doubling_factors;
    let exponent = r.fit("lipschitz_ratio", "N").unwrap().slope;
    let ok = factors.len() == 2 && factors.iter().all(|&f| f <= 2.5) && exponent >= -0.6;
    report(
        9,
        "stability ceiling",
        ok,
        format!("doubling factors {factors:.4?} (<= 2.5), N-exponent {exponent:.3} (>= -0.6)"),
    );
}

#[test]
fn criterion_10_fichera_report() {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000).unwrap();
    let op = FicheraOperator::for_coefficient(Coefficient::Quadratic, 1.0);
    let r = classify_rectangle(&op, &mesh).unwrap();
    let got = [Side::Left, Side::Right, Side::Initial, Side::Terminal].map(|s| r.class_of(s));
    let want = [BoundaryClass::NoData, BoundaryClass::NoData, BoundaryClass::DataRequired, BoundaryClass::NoData];
    report(10, "fichera report", got == want, format!("x=0, x=l, t=0, t=T -> {got:?}"));
}

#[test]
fn criterion_11_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.cfg");
    std::fs::write(&config, "[problem]\nM = 40\nK = 200\nprofile = parabola\n[noise]\nseed = 11\n").unwrap();
    let mut identical = true;
    let mut compared = Vec::new();
    for (command, file) in [("study-convergence", "convergence.csv"), ("study-stability", "stability.csv")] {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = dir.path().join(run);
            let args = ["radcoef", command, config.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
            assert_eq!(radcoef::cli::run(args), 0, "{command} failed");
            outputs.push(std::fs::read(out.join(file)).unwrap());
        }
        identical &= outputs[0] == outputs[1];
        compared.push(format!("{file} ({} bytes)", outputs[0].len()));
    }
    report(11, "reproducibility", identical, format!("byte-identical reruns: {}", compared.join(", ")));
}
