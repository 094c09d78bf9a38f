//! Iterate `q <- q + lambda (u(T; q) - g)` towards a constant target from
//! below and from above, then show the guard on `lambda`.

use radcoef::experiments::{manufacture, InitialDatum, Profile};
use radcoef::grid::{Coefficient, Mesh};
use radcoef::objective::{AdmissibleSet, Functional, InverseProblem};
use radcoef::optimize::{check_contraction_guard, fixed_point, FixedPointOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000)?;
    let bench = manufacture(
        Profile::Constant { value: 1.2 },
        &mesh,
        Coefficient::Quadratic,
        InitialDatum::Constant { value: 1.0 },
        (0.5, 2.0),
    )?;
    let problem =
        InverseProblem::new(bench.spec, bench.data, AdmissibleSet::new(0.5, 2.0, 0.0)?, Functional::Terminal)?;
    let options = FixedPointOptions { lambda: 1.0, tol: 1e-12, max_iter: 200 };

    for q0 in [0.6, 1.9] {
        let r = fixed_point(&problem, &vec![q0; mesh.nodes_len()], &options)?;
        let err = r.q_final.iter().fold(0.0_f64, |m, q| m.max((q - 1.2).abs()));
        println!("q0 = {q0}: {} in {} iterations, ||q - q*||_inf = {err:.2e}", r.termination.as_str(), r.iterations);
        let shown: Vec<String> = r.update_history.iter().take(6).map(|u| format!("{u:.2e}")).collect();
        println!("  first updates: {}", shown.join(" "));
    }
    match check_contraction_guard(&problem, 2.0) {
        Err(e) => println!("lambda = 2 rejected: {e}"),
        Ok(()) => println!("lambda = 2 accepted"),
    }
    Ok(())
}
