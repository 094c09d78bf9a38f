//! Solve the degenerate direct problem for a bump coefficient and print
//! the terminal profile with its energy norms.

use radcoef::experiments::Profile;
use radcoef::forward::{energy_report, max_principle_bound, solve_forward, ProblemSpec};
use radcoef::grid::{Coefficient, Mesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = Mesh::new(1.0, 50, 1.0, 500)?;
    let q = Profile::standard_bump().sample(&mesh);
    let phi = mesh.sample(|x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos());
    let spec = ProblemSpec::new(mesh, Coefficient::Quadratic.sample(&mesh)?, q, phi)?;

    let u = solve_forward(&spec)?;
    println!("sup |u| = {:.6} (bound {:.6})", u.max_abs(), max_principle_bound(&spec)?);
    println!("{:?}", energy_report(&u, &spec)?);
    println!("{:>6} {:>10}", "x", "u(x, T)");
    for (x, v) in mesh.nodes().iter().zip(u.last()).step_by(5) {
        println!("{x:>6.2} {v:>10.6}");
    }
    Ok(())
}
