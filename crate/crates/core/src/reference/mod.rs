//! Classical reference solvers.

pub mod dae;
pub mod foucault;
pub mod rkf45;

pub use dae::{
    consistent_init, dae_to_trajectory, implicit_dae_integrate, ContinuousConstrainedSystem, DaeTrajectory, ImplicitDae,
};
pub use foucault::{foucault_multiplier, foucault_reference, foucault_reference_on_grid, foucault_rhs};
pub use rkf45::{hermite, rkf45_integrate, DenseTrajectory, RkfConfig};
