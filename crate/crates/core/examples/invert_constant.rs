//! Recover a constant coefficient from exact terminal data by projected
//! gradient descent.

use radcoef::forward::{solve_forward, ProblemSpec};
use radcoef::grid::{Coefficient, Mesh};
use radcoef::objective::{AdmissibleSet, Functional, InverseProblem};
use radcoef::optimize::{minimize, MinimizeOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 40, 1.0, 200)?;
    let n = mesh.nodes_len();
    let truth = ProblemSpec::new(mesh, Coefficient::Quadratic.sample(&mesh)?, vec![1.0; n], vec![1.0; n])?;
    let g = solve_forward(&truth)?.last().to_vec();
    let problem = InverseProblem::new(truth, g, AdmissibleSet::new(0.1, 5.0, 1e-8)?, Functional::Terminal)?;

    let r = minimize(&problem, &vec![2.0; n], &MinimizeOptions::default())?;
    let err: Vec<f64> = r.q_final.iter().map(|q| q - 1.0).collect();
    println!("termination {} after {} iterations", r.termination.as_str(), r.iterations);
    println!("cost {:.3e} -> {:.3e}", r.cost_history[0].total, r.cost_history.last().unwrap().total);
    println!("||q - q*|| = {:.3e}", mesh.norm(&err));
    Ok(())
}
