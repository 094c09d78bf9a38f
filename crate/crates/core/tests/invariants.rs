use proptest::prelude::*;

use radcoef::forward::{solve_forward, ProblemSpec};
use radcoef::grid::{Coefficient, Mesh};
use radcoef::objective::{AdmissibleSet, Functional, InverseProblem};
use radcoef::optimize::project;

fn coefficient() -> impl Strategy<Value = Coefficient> {
    prop_oneof![
        Just(Coefficient::Quadratic),
        (1.0..2.5f64, 1.0..2.5f64).prop_map(|(alpha, beta)| Coefficient::Power { alpha, beta }),
    ]
}

fn mesh() -> impl Strategy<Value = Mesh> {
    (4usize..30, 2usize..40, 0.5..2.0f64, 0.05..1.0f64).prop_map(|(m, k, l, t)| Mesh::new(l, m, t, k).unwrap())
}

/// Mesh, coefficient, and nodal vectors sized to it.
fn setup(lo: f64, hi: f64, count: usize) -> impl Strategy<Value = (Mesh, Coefficient, Vec<Vec<f64>>)> {
    (mesh(), coefficient()).prop_flat_map(move |(mesh, c)| {
        let vecs = prop::collection::vec(prop::collection::vec(lo..hi, mesh.nodes_len()), count);
        (Just(mesh), Just(c), vecs)
    })
}

fn spec(mesh: Mesh, c: Coefficient, q: Vec<f64>, phi: Vec<f64>) -> ProblemSpec {
    ProblemSpec::new(mesh, c.sample(&mesh).unwrap(), q, phi).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_idempotent_and_lands_in_box(q in prop::collection::vec(-5.0..5.0f64, 3..40), pin in any::<bool>()) {
        let mut set = AdmissibleSet::new(0.5, 2.0, 0.0).unwrap();
        if pin {
            set = set.with_pin(0.7, 1.3);
        }
        let p = project(&q, &set);
        prop_assert_eq!(&project(&p, &set), &p);
        prop_assert!(set.check(&p).is_ok());
        for (a, b) in q.iter().zip(&p).skip(1).take(q.len() - 2) {
            if (0.5..=2.0).contains(a) {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn forward_map_is_linear_in_initial_data(
        (mesh, c, v) in setup(-2.0, 2.0, 3),
        s in -3.0..3.0f64,
    ) {
        let q: Vec<f64> = v[2].iter().map(|x| x.abs()).collect();
        let combo: Vec<f64> = v[0].iter().zip(&v[1]).map(|(a, b)| a + s * b).collect();
        let u0 = solve_forward(&spec(mesh, c, q.clone(), v[0].clone())).unwrap();
        let u1 = solve_forward(&spec(mesh, c, q.clone(), v[1].clone())).unwrap();
        let uc = solve_forward(&spec(mesh, c, q, combo)).unwrap();
        for ((a, b), w) in u0.values().iter().zip(u1.values()).zip(uc.values()) {
            prop_assert!((a + s * b - w).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn sup_norm_never_grows((mesh, c, v) in setup(-2.0, 2.0, 2)) {
        let q: Vec<f64> = v[1].iter().map(|x| x.abs()).collect();
        let bound = v[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let u = solve_forward(&spec(mesh, c, q, v[0].clone())).unwrap();
        let mut prev = bound;
        for row in u.rows() {
            let sup = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(sup <= prev * (1.0 + 1e-12) + 1e-15);
            prev = sup;
        }
    }

    #[test]
    fn larger_absorption_gives_smaller_solution((mesh, c, v) in setup(0.0, 2.0, 3)) {
        let low = v[1].clone();
        let high: Vec<f64> = low.iter().zip(&v[2]).map(|(a, b)| a + b).collect();
        let ul = solve_forward(&spec(mesh, c, low, v[0].clone())).unwrap();
        let uh = solve_forward(&spec(mesh, c, high, v[0].clone())).unwrap();
        for (a, b) in uh.values().iter().zip(ul.values()) {
            prop_assert!(*a >= -1e-14 && *a <= b + 1e-12);
        }
    }

    #[test]
    fn mass_is_conserved_without_absorption((mesh, c, v) in setup(-1.0, 3.0, 1)) {
        let n = mesh.nodes_len();
        let u = solve_forward(&spec(mesh, c, vec![0.0; n], v[0].clone())).unwrap();
        let w = mesh.weights();
        let mass = |r: &[f64]| r.iter().zip(&w).map(|(u, w)| u * w).sum::<f64>();
        let m0 = mass(u.row(0));
        for row in u.rows() {
            prop_assert!((mass(row) - m0).abs() <= 1e-11 * (1.0 + m0.abs()));
        }
    }

    #[test]
    fn gradient_matches_central_difference(
        (mesh, c, v) in setup(0.5, 1.5, 3),
        windowed in any::<bool>(),
        reg in prop_oneof![Just(0.0), 1e-4..1e-2f64],
    ) {
        let spec = spec(mesh, c, v[0].clone(), vec![1.0; mesh.nodes_len()]);
        let functional = if windowed { Functional::Windowed { sigma: mesh.dt() } } else { Functional::Terminal };
        let set = AdmissibleSet::new(0.1, 3.0, reg).unwrap();
        let problem = InverseProblem::new(spec, v[1].clone(), set, functional).unwrap();
        let q = v[2].clone();
        let p: Vec<f64> = v[1].iter().map(|x| x - 1.0).collect();
        let grad = problem.gradient(&q).unwrap();
        let analytic = mesh.inner(&grad, &p);
        let step = 1e-5;
        let shifted = |s: f64| {
            let qs: Vec<f64> = q.iter().zip(&p).map(|(q, p)| q + s * p).collect();
            problem.cost(&qs).unwrap().total
        };
        let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
        prop_assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1e-6), "fd {fd} analytic {analytic}");
    }

    #[test]
    fn refinement_halves_spacing_and_keeps_nodes(mesh in mesh()) {
        let fine = mesh.refined();
        prop_assert_eq!(fine.cells(), 2 * mesh.cells());
        prop_assert_eq!(fine.steps(), 2 * mesh.steps());
        prop_assert!((fine.h() - mesh.h() / 2.0).abs() < 1e-15);
        for i in 0..mesh.nodes_len() {
            prop_assert!((fine.node(2 * i) - mesh.node(i)).abs() < 1e-14);
        }
        let total: f64 = fine.weights().iter().sum();
        prop_assert!((total - mesh.length()).abs() < 1e-12);
    }
}
