//! Verification toolkit for fully nonlinear degenerate elliptic operators
//! built over families of vector fields.
//!
//! The crate is organised bottom-up: [`fields`] and [`horizontal`] hold the
//! vector-field calculus, [`operators`] the operator catalog and audits,
//! [`subunit`] the subunit-vector certification, [`reach`] the control
//! system, [`verify`] the maximum/comparison principle checks and
//! [`scenario`] the config-driven runner used by the `svkit` binary.

pub mod error;
pub mod fields;
pub mod horizontal;
pub mod linalg;
pub mod operators;
pub mod poly;
pub mod reach;
pub mod sampling;
pub mod scenario;
pub mod subunit;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{DomainBox, VectorFieldFamily};
pub use linalg::{Matrix, Vector};
pub use operators::{Jet, OperatorSpec};
