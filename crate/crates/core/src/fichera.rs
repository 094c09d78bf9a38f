//! Fichera classification of the boundary of the space-time rectangle.
//!
//! The operator `u_t - (a u_x)_x + q u` is written in the second-order form
//! `sum a_ij u_ij + sum b_i u_i + c u` with `x_1 = x`, `x_2 = t`, so that
//! `a_11 = a`, all other `a_ij = 0`, `b_1 = a'` and `b_2 = -1`. On each side
//! with inward unit normal `n` the Fichera function is
//! `B = sum_i (b_i - sum_j d a_ij / d x_j) n_i`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::BoundaryTreatment;
use crate::grid::{Coefficient, Mesh};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const NORMAL_TOL: f64 = 1e-9;
const SIGN_TOL: f64 = 1e-12;
/// Growth of one-sided difference quotients, when the step halves, above
/// which the derivative of `a` is treated as unbounded.
const BLOWUP_RATIO: f64 = 1.2;

#[derive(Clone)]
pub struct FicheraOperator {
    length: f64,
    a11: ScalarFn,
    a11_dx: Option<ScalarFn>,
    b1: Option<ScalarFn>,
    b2: f64,
}

impl fmt::Debug for FicheraOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FicheraOperator")
            .field("length", &self.length)
            .field("analytic_derivative", &self.a11_dx.is_some())
            .field("b2", &self.b2)
            .finish()
    }
}

impl FicheraOperator {
    /// Fully general operator. Without `a11_dx` the derivative of `a11` is
    /// approximated by central differences.
    pub fn new(
        length: f64,
        a11: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a11_dx: Option<ScalarFn>,
        b1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b2: f64,
    ) -> Self {
        Self { length, a11: Arc::new(a11), a11_dx, b1: Some(Arc::new(b1)), b2 }
    }

    /// Divergence-form operator `u_t - (a u_x)_x`: `b_1` is the same
    /// derivative of `a` that enters `d a_11 / dx`.
    pub fn divergence_form(
        length: f64,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_dx: Option<ScalarFn>,
    ) -> Self {
        Self { length, a11: Arc::new(a), a11_dx: a_dx, b1: None, b2: -1.0 }
    }

    /// Operator of the degenerate equation for a catalog coefficient, with
    /// its analytic derivative.
    pub fn for_coefficient(coefficient: Coefficient, length: f64) -> Self {
        Self::divergence_form(
            length,
            move |x| coefficient.value(x, length),
            Some(Arc::new(move |x| coefficient.derivative(x, length))),
        )
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn a11(&self, x: f64) -> f64 {
        (self.a11)(x)
    }

    fn fd_derivative(&self, x: f64, step: f64) -> f64 {
        let lo = (x - step).max(0.0);
        let hi = (x + step).min(self.length);
        (self.a11(hi) - self.a11(lo)) / (hi - lo)
    }

    fn a11_dx(&self, x: f64, step: f64) -> f64 {
        match &self.a11_dx {
            Some(d) => d(x),
            None => self.fd_derivative(x, step),
        }
    }

    fn b1(&self, x: f64, step: f64) -> f64 {
        match &self.b1 {
            Some(b) => b(x),
            None => self.a11_dx(x, step),
        }
    }

    /// Whether `a'` looks unbounded at `x` (an endpoint).
    fn derivative_blows_up(&self, x: f64, step: f64) -> bool {
        if self.a11_dx.is_some() {
            return !self.a11_dx(x, step).is_finite();
        }
        let coarse = self.fd_derivative(x, step).abs();
        let fine = self.fd_derivative(x, 0.5 * step).abs();
        !fine.is_finite() || (fine > 0.0 && fine > BLOWUP_RATIO * coarse)
    }
}

/// Fichera function at `(x, t)` for the inward unit normal `normal`.
/// `fd_step` is only used when no analytic derivative of `a` was supplied.
pub fn fichera_value(op: &FicheraOperator, point: (f64, f64), normal: (f64, f64), fd_step: f64) -> Result<f64> {
    let (n1, n2) = normal;
    if ((n1 * n1 + n2 * n2).sqrt() - 1.0).abs() > NORMAL_TOL || !n1.is_finite() || !n2.is_finite() {
        return Err(Error::NonUnitNormal(n1, n2));
    }
    let x = point.0;
    // the t-derivative of a_12, a_22 vanishes; only the x-component needs a'.
    let spatial = if n1 != 0.0 { (op.b1(x, fd_step) - op.a11_dx(x, fd_step)) * n1 } else { 0.0 };
    Ok(spatial + op.b2 * n2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `x = 0`
    Left,
    /// `x = l`
    Right,
    /// `t = 0`
    Initial,
    /// `t = T`
    Terminal,
}

impl Side {
    pub fn inward_normal(self) -> (f64, f64) {
        match self {
            Side::Left => (1.0, 0.0),
            Side::Right => (-1.0, 0.0),
            Side::Initial => (0.0, 1.0),
            Side::Terminal => (0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryClass {
    /// Non-characteristic: `sum a_ij n_i n_j > 0`; data required.
    #[serde(rename = "gamma1")]
    NonCharacteristic,
    /// Characteristic with `B >= 0`: data must not be given.
    #[serde(rename = "gamma2")]
    NoData,
    /// Characteristic with `B < 0`: data required.
    #[serde(rename = "gamma3")]
    DataRequired,
    /// Characteristic, but `a'` is unbounded there so `B` is undefined.
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub x: f64,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub side: Side,
    pub normal: [f64; 2],
    pub characteristic_form: f64,
    pub class: BoundaryClass,
    pub derivative_blowup: bool,
    pub samples: Vec<BoundarySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub sides: Vec<SideReport>,
    pub recommendation: BoundaryTreatment,
    pub notes: Vec<String>,
}

impl BoundaryReport {
    pub fn class_of(&self, side: Side) -> BoundaryClass {
        self.sides.iter().find(|s| s.side == side).map(|s| s.class).expect("all four sides reported")
    }
}

const SAMPLES_PER_SIDE: usize = 9;

fn sample_indices(n: usize) -> Vec<usize> {
    let k = SAMPLES_PER_SIDE.min(n + 1);
    let mut idx: Vec<usize> = (0..k).map(|j| (j * n + (k - 1) / 2) / (k - 1).max(1)).collect();
    idx.dedup();
    idx
}

/// Classifies the four sides of `[0, l] x [0, T]`.
pub fn classify_rectangle(op: &FicheraOperator, mesh: &Mesh) -> Result<BoundaryReport> {
    let step = 0.5 * mesh.h();
    let scale = mesh.nodes().iter().fold(0.0_f64, |m, &x| m.max(op.a11(x).abs()));
    let form_tol = crate::grid::DEGENERACY_TOL * scale.max(f64::MIN_POSITIVE);
    let mut notes = Vec::new();
    let mut sides = Vec::with_capacity(4);

    for side in [Side::Left, Side::Right, Side::Initial, Side::Terminal] {
        let normal = side.inward_normal();
        let points: Vec<(f64, f64)> = match side {
            Side::Left => sample_indices(mesh.steps()).into_iter().map(|n| (0.0, mesh.time(n))).collect(),
            Side::Right => sample_indices(mesh.steps()).into_iter().map(|n| (mesh.length(), mesh.time(n))).collect(),
            Side::Initial => sample_indices(mesh.cells()).into_iter().map(|i| (mesh.node(i), 0.0)).collect(),
            Side::Terminal => {
                sample_indices(mesh.cells()).into_iter().map(|i| (mesh.node(i), mesh.final_time())).collect()
            }
        };

        let (x_side, form) = match side {
            Side::Left => (Some(0.0), op.a11(0.0) * normal.0 * normal.0),
            Side::Right => (Some(mesh.length()), op.a11(mesh.length()) * normal.0 * normal.0),
            Side::Initial | Side::Terminal => (None, 0.0),
        };
        let blowup = x_side.is_some_and(|x| form <= form_tol && op.derivative_blows_up(x, step));

        let mut samples = Vec::with_capacity(points.len());
        for (x, t) in points {
            let value = fichera_value(op, (x, t), normal, step)?;
            samples.push(BoundarySample { x, t, value });
        }

        let class = if form > form_tol {
            BoundaryClass::NonCharacteristic
        } else if blowup || samples.iter().any(|s| !s.value.is_finite()) {
            BoundaryClass::Indeterminate
        } else if samples.iter().all(|s| s.value >= -SIGN_TOL) {
            BoundaryClass::NoData
        } else {
            BoundaryClass::DataRequired
        };

        if blowup {
            notes.push(format!(
                "a' is unbounded at x = {}; the Fichera sign is undefined there, homogeneous Dirichlet data recommended",
                x_side.unwrap_or_default()
            ));
        }
        sides.push(SideReport {
            side,
            normal: [normal.0, normal.1],
            characteristic_form: form,
            class,
            derivative_blowup: blowup,
            samples,
        });
    }

    let lateral_free =
        sides.iter().filter(|s| matches!(s.side, Side::Left | Side::Right)).all(|s| s.class == BoundaryClass::NoData);
    let recommendation = if lateral_free { BoundaryTreatment::ZeroFlux } else { BoundaryTreatment::Dirichlet };
    Ok(BoundaryReport { sides, recommendation, notes })
}
