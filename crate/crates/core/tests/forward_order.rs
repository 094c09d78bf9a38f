use radcoef::forward::{
    energy_report, solve_forward, solve_forward_viscous, space_time_norm, ProblemSpec, SpaceTimeField,
};
use radcoef::grid::{Coefficient, Mesh};

// u = e^{-t} (1 + x (1 - x)) with a = x (1 - x), q = 1, l = 1 satisfies
// u_t - (a u_x)_x + u = f for f = -e^{-t} (1 - 6x + 6x^2), and a u_x
// vanishes at both ends.
fn exact(x: f64, t: f64) -> f64 {
    (-t).exp() * (1.0 + x * (1.0 - x))
}

fn source(x: f64, t: f64) -> f64 {
    -(-t).exp() * (1.0 - 6.0 * x + 6.0 * x * x)
}

/// Max error at `t = T` over the nodes of `[l/4, 3l/4]`. The degenerate
/// endpoints lose accuracy locally, so the order is measured away from them.
fn terminal_error(m: usize, k: usize) -> f64 {
    let mesh = Mesh::new(1.0, m, 1.0, k).unwrap();
    let n = mesh.nodes_len();
    let spec = ProblemSpec::new(
        mesh,
        Coefficient::Quadratic.sample(&mesh).unwrap(),
        vec![1.0; n],
        mesh.sample(|x| exact(x, 0.0)),
    )
    .unwrap()
    .with_source(SpaceTimeField::from_fn(&mesh, source))
    .unwrap();
    let u = solve_forward(&spec).unwrap();
    let t = mesh.final_time();
    u.last()
        .iter()
        .zip(mesh.nodes())
        .skip(m / 4)
        .take(m / 2 + 1)
        .map(|(u, x)| (u - exact(x, t)).abs())
        .fold(0.0, f64::max)
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

#[test]
fn second_order_in_space() {
    let errors: Vec<f64> = [8, 16, 32].iter().map(|&m| terminal_error(m, 100_000)).collect();
    let p = orders(&errors);
    println!("interior errors {errors:?}, orders {p:.3?}");
    assert!(p.iter().all(|&p| p >= 1.8), "errors {errors:?}, orders {p:?}");
}

#[test]
fn first_order_in_time() {
    let errors: Vec<f64> = [10, 20, 40].iter().map(|&k| terminal_error(400, k)).collect();
    let p = orders(&errors);
    assert!(p.iter().all(|&p| p >= 0.9), "errors {errors:?}, orders {p:?}");
}

fn degenerate_spec() -> ProblemSpec {
    let mesh = Mesh::new(1.0, 100, 1.0, 400).unwrap();
    let n = mesh.nodes_len();
    let phi = mesh.sample(|x| 1.0 + (std::f64::consts::PI * x).cos());
    ProblemSpec::new(mesh, Coefficient::Quadratic.sample(&mesh).unwrap(), vec![0.5; n], phi).unwrap()
}

fn difference(a: &SpaceTimeField, b: &SpaceTimeField, nodes: usize) -> SpaceTimeField {
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(a, b)| a - b).collect();
    SpaceTimeField::from_rows(diff.chunks(nodes).map(<[f64]>::to_vec).collect()).unwrap()
}

#[test]
fn viscous_solutions_approach_degenerate_solution() {
    let spec = degenerate_spec();
    let mesh = spec.mesh;
    let u = solve_forward(&spec).unwrap();
    let dists: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            space_time_norm(&mesh, &difference(&solve_forward_viscous(&spec, eps).unwrap(), &u, mesh.nodes_len()))
        })
        .collect();
    assert!(dists.windows(2).all(|d| d[1] < d[0]), "{dists:?}");
}

#[test]
fn viscous_energies_stay_bounded() {
    let spec = degenerate_spec();
    let phi_norm = spec.mesh.norm(&spec.phi);
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let viscous = ProblemSpec { coeff: spec.coeff.shifted(eps), ..spec.clone() };
        let e = energy_report(&solve_forward_viscous(&spec, eps).unwrap(), &viscous).unwrap();
        assert!(e.sup_l2 <= phi_norm * (1.0 + 1e-12), "eps {eps}: {e:?}");
        // Testing the scheme with u^{n+1} gives 2 sum a |D_x u|^2 h dt <= ||phi||^2.
        assert!(2.0 * e.grad_energy <= phi_norm * phi_norm * (1.0 + 1e-9), "eps {eps}: {e:?}");
    }
}
