//! Risk-constrained path following for an automated vehicle.
//!
//! An ego vehicle follows a constant-curvature reference path while an
//! uncertain object crosses it. Collision risk is the expected differential
//! kinetic energy of a collision under a truncated-Gaussian object belief.
//! Two receding-horizon controllers bound that risk at every predicted step:
//! a robust one against the worst case over the truncation box, and a
//! stochastic one against a Monte Carlo estimate of the expectation.
//!
//! Modules, bottom-up: [`geometry`], [`dynamics`], [`prediction`], [`risk`],
//! [`controller`], [`harness`].

pub mod controller;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod prediction;
pub mod risk;

pub use error::{Error, Result};
