use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_forward, ProblemSpec};
use crate::grid::{Coefficient, Mesh};

/// Shape of the target coefficient `q*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `base + height * exp(-width (x - l/2)^2)`
    Bump {
        base: f64,
        height: f64,
        width: f64,
    },
    /// Linear from `left` at `x = 0` to `right` at `x = l`.
    Ramp {
        left: f64,
        right: f64,
    },
    /// `base + 4 height x (l - x) / l^2`
    Parabola {
        base: f64,
        height: f64,
    },
}

impl Profile {
    pub fn standard_bump() -> Self {
        Profile::Bump { base: 1.0, height: 0.5, width: 50.0 }
    }

    pub fn eval(&self, x: f64, l: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Bump { base, height, width } => base + height * (-width * (x - 0.5 * l).powi(2)).exp(),
            Profile::Ramp { left, right } => left + (right - left) * x / l,
            Profile::Parabola { base, height } => base + 4.0 * height * x * (l - x) / (l * l),
        }
    }

    pub fn sample(&self, mesh: &Mesh) -> Vec<f64> {
        let l = mesh.length();
        mesh.sample(|x| self.eval(x, l))
    }
}

/// Initial datum `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialDatum {
    Constant {
        value: f64,
    },
    /// `sin(pi x / l)`
    Sine,
}

impl InitialDatum {
    pub fn sample(&self, mesh: &Mesh) -> Vec<f64> {
        let l = mesh.length();
        match *self {
            InitialDatum::Constant { value } => vec![value; mesh.nodes_len()],
            InitialDatum::Sine => mesh.sample(|x| (std::f64::consts::PI * x / l).sin().max(0.0)),
        }
    }
}

/// Synthetic inverse problem with known `q*`.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub coefficient: Coefficient,
    pub initial: InitialDatum,
    pub profile: Profile,
    /// `q*` on the working mesh.
    pub q_star: Vec<f64>,
    /// `u(., T; q*)` from the refined mesh, restricted to the working nodes.
    pub data: Vec<f64>,
    /// Working-mesh problem with `q = q*`.
    pub spec: ProblemSpec,
}

impl Benchmark {
    pub fn mesh(&self) -> &Mesh {
        &self.spec.mesh
    }
}

fn build_spec(mesh: &Mesh, coefficient: Coefficient, initial: InitialDatum, profile: Profile) -> Result<ProblemSpec> {
    let coeff = coefficient.sample(mesh)?;
    ProblemSpec::new(*mesh, coeff, profile.sample(mesh), initial.sample(mesh))
}

/// Builds a benchmark whose data come from a solve on the once-refined mesh,
/// so the inversion never sees data generated by its own discretization.
pub fn manufacture(
    profile: Profile,
    mesh: &Mesh,
    coefficient: Coefficient,
    initial: InitialDatum,
    bounds: (f64, f64),
) -> Result<Benchmark> {
    let fine = mesh.refined();
    let q_fine = profile.sample(&fine);
    let (lo, hi) = q_fine.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo < bounds.0 || hi > bounds.1 {
        return Err(Error::InvalidParameter(format!(
            "profile range [{lo}, {hi}] leaves the admissible box [{}, {}]",
            bounds.0, bounds.1
        )));
    }
    let fine_spec = build_spec(&fine, coefficient, initial, profile)?;
    fine_spec.validate_for_inversion()?;
    let u_fine = solve_forward(&fine_spec)?;
    let data: Vec<f64> = u_fine.last().iter().step_by(2).copied().collect();
    let spec = build_spec(mesh, coefficient, initial, profile)?;
    Ok(Benchmark { coefficient, initial, profile, q_star: spec.q.clone(), data, spec })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

/// `g + delta xi / ||xi||` with `xi` iid standard normal per node, so the
/// trapezoid `L^2` distance to `g` is exactly `delta`.
pub fn add_noise(mesh: &Mesh, g: &[f64], noise: NoiseSpec) -> Result<Vec<f64>> {
    if !(noise.delta >= 0.0 && noise.delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {}", noise.delta)));
    }
    if noise.delta == 0.0 {
        return Ok(g.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let xi: Vec<f64> = (0..g.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scale = noise.delta / mesh.norm(&xi);
    Ok(g.iter().zip(&xi).map(|(g, x)| g + scale * x).collect())
}
