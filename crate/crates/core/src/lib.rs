//! Identification of the radiative coefficient `q(x)` in the degenerate
//! parabolic equation
//!
//! ```text
//! u_t - (a(x) u_x)_x + q(x) u = f,   (x, t) in (0, l) x (0, T],
//! ```
//!
//! with `a(0) = a(l) = 0`, from the final-time observation `u(x, T) = g(x)`.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`]: uniform meshes and sampling of `a`.
//! - [`fichera`]: which sides of the space-time rectangle take boundary data.
//! - [`forward`]: the implicit finite-volume direct solver.
//! - [`adjoint`]: the exact discrete adjoint and sensitivities.
//! - [`objective`]: Tikhonov costs `J`, `J_sigma` and their gradients.
//! - [`optimize`]: projected gradient descent and the fixed-point iteration.
//! - [`experiments`]: manufactured problems, noise, rate studies, property suite.
//! - [`config`] and [`cli`]: the `radcoef` command-line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fichera;
pub mod forward;
pub mod grid;
pub mod objective;
pub mod optimize;
pub mod tridiag;

pub use error::{Error, Result};
