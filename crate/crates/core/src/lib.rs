//! Simulators for studying how noise and adversarial pressure select wide
//! optima: Langevin dynamics on Gaussian-mixture landscapes, free-energy and
//! escape-rate analysis, minimax (GAN) gradient dynamics, a deterministic
//! predator-prey pursuit model, a branching population model and a
//! regression benchmark, tied together by a config-driven experiment harness.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod branching;
pub mod error;
pub mod eyring;
pub mod gan;
pub mod harness;
pub mod landscape;
pub mod output;
pub mod pursuit;
pub mod quadrature;
pub mod regression;
pub mod sde;
pub mod sgld;
pub mod stats;

pub use error::{Error, Result};
pub use landscape::{GaussianMixtureLandscape, GaussianWell};
pub use sde::RngStream;
