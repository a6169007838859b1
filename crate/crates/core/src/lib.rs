//! Learning-based robust optimization.
//!
//! A chance-constrained program is approximated by a robust program whose uncertainty
//! set is learned from data in two phases: a shape fitted on one part of the data and a
//! size calibrated on the other by an order statistic. The robust program is rewritten
//! as a conic program and solved by the built-in interior-point solver (linear and
//! second-order cones) or exported (semidefinite blocks).

pub mod baselines;
pub mod calibrate;
pub mod conic;
pub mod error;
pub mod harness;
pub mod model;
pub mod reformulate;
pub mod shapes;

pub use error::{Error, Result};
