//! Numerical scattering projections, adiabatic vacua and Hadamard diagnostics
//! for the Dirac field on `R x S^1` with an asymptotically static metric.
//!
//! The pipeline is: build a [`geometry::MetricFamily`], remove the shift with
//! [`geometry::shift_flow_reduce`], remove the lapse with
//! [`geometry::conformal_reduce`], assemble the transported-frame Hamiltonian
//! ([`operator_assembly`]), propagate it ([`evolution`]) and take Moller limits
//! ([`moller_scattering`]).  [`states_hadamard`] turns the limits into state
//! covariances and checks their microlocal behaviour numerically.

pub mod adiabatic_projections;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod functional_calculus;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod moller_scattering;
pub mod operator_assembly;
pub mod problem;
pub mod spin_algebra;
pub mod states_hadamard;
pub mod tolerances;

pub use error::{Error, Result};
pub use linalg::{c64, CMat};
pub use problem::Problem;
