//! Numerical toolkit for gradient-type interacting particle systems on the
//! discrete torus (zero-range and simple-exclusion dynamics) and their
//! nonlinear-diffusion scaling limit.
//!
//! The microscopic side evaluates the relative-entropy action of a
//! potential-tilted process, either exactly on a particle-number sector
//! (master equation) or by kinetic Monte Carlo with an explicit
//! path-measure log-density. The macroscopic side solves the limiting
//! parabolic equation and evaluates the corresponding quadratic action
//! built from density-weighted H^1 / H^-1 norms. The `lab` module wires
//! both into convergence experiments.

pub mod canonical;
pub mod empirical;
pub mod error;
pub mod hydro;
pub mod kmc;
pub mod lab;
pub mod localeq;
pub mod macro_action;
pub mod master;
pub mod micro_action;
pub mod model;
pub mod norms;
pub mod ode;
pub mod potential;
pub mod project;
pub mod quad;
pub mod scalars;
pub mod sector;
pub mod torus;
pub mod wasserstein;

pub use error::{CoreError, Result};
