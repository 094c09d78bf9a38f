//! Compare the adjoint gradient of both cost functionals with central
//! differences along a few directions.

use radcoef::experiments::{manufacture, InitialDatum, Profile};
use radcoef::grid::{Coefficient, Mesh};
use radcoef::objective::{AdmissibleSet, Functional, InverseProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 40, 1.0, 200)?;
    let bench = manufacture(Profile::standard_bump(), &mesh, Coefficient::Quadratic, InitialDatum::Sine, (0.5, 2.0))?;
    let set = AdmissibleSet::new(0.5, 2.0, 1e-4)?;
    let q = mesh.sample(|x| 1.2 + 0.2 * (3.0 * x).sin());
    let directions = [mesh.sample(|_| 1.0), mesh.sample(|x| x * (1.0 - x)), mesh.sample(|x| (7.0 * x).cos())];

    for functional in [Functional::Terminal, Functional::Windowed { sigma: 4.0 * mesh.dt() }] {
        let problem = InverseProblem::new(bench.spec.clone(), bench.data.clone(), set, functional)?;
        let grad = problem.gradient(&q)?;
        println!("{functional:?}");
        for d in &directions {
            let analytic = mesh.inner(&grad, d);
            let step = 1e-5;
            let at = |s: f64| -> Result<f64, radcoef::Error> {
                let qs: Vec<f64> = q.iter().zip(d).map(|(q, d)| q + s * d).collect();
                Ok(problem.cost(&qs)?.total)
            };
            let fd = (at(step)? - at(-step)?) / (2.0 * step);
            println!("  adjoint {analytic:>13.6e}  fd {fd:>13.6e}  rel {:.1e}", (fd - analytic).abs() / analytic.abs());
        }
    }
    Ok(())
}
