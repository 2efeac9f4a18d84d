//! Benchmark systems.

mod disk;
mod foucault;
mod oscillator;

pub use disk::{
    disk_appendix_residual, disk_appendix_step, disk_system, simulate_disk_appendix, DiskParams, FallingDisk, Forcing,
};
pub use foucault::{foucault_system, FoucaultFormulation, FoucaultParams, FoucaultPendulum, EARTH_ROTATION_RATE};
pub use oscillator::DampedOscillator;
