//! Numerical laboratory for the J-flow on the flat complex 2-torus.
//!
//! The flow `d phi/dt = c - 2 chi_phi ^ omega / chi_phi^2` is integrated with
//! a spectral discretization, its critical equation is solved independently
//! as a (possibly degenerate) complex Monge-Ampere equation, and the two are
//! cross-checked through conserved and monotone functionals and comparison
//! arguments.

pub mod elliptic;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod scenario;

pub use error::{Error, Result};
