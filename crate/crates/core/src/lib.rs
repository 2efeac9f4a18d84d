//! Constrained contact variational integrators for dissipative
//! nonholonomic mechanics.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod herglotz;
pub mod la;
pub mod linalg;
pub mod model;
pub mod newton;
pub mod reference;
pub mod systems;

pub use error::{Error, Result};
