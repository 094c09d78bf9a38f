//! Approach the degenerate solution through uniformly parabolic problems
//! with coefficient `a + eps` and Dirichlet data.

use radcoef::forward::{solve_forward, solve_forward_viscous, space_time_norm, ProblemSpec, SpaceTimeField};
use radcoef::grid::{Coefficient, Mesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 100, 1.0, 1000)?;
    let n = mesh.nodes_len();
    let spec = ProblemSpec::new(mesh, Coefficient::Quadratic.sample(&mesh)?, vec![1.0; n], vec![1.0; n])?;
    let u = solve_forward(&spec)?;

    println!("{:>8} {:>14}", "eps", "||u_eps - u||");
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let ue = solve_forward_viscous(&spec, eps)?;
        let diff: Vec<Vec<f64>> =
            ue.rows().zip(u.rows()).map(|(a, b)| a.iter().zip(b).map(|(a, b)| a - b).collect()).collect();
        println!("{eps:>8.0e} {:>14.6e}", space_time_norm(&mesh, &SpaceTimeField::from_rows(diff)?));
    }
    Ok(())
}
