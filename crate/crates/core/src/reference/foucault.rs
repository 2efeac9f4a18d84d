//! Explicit ODE for the constrained Foucault pendulum, with the multiplier
//! eliminated by differentiating the constraint once.
//!
//! State `(x, y, ẋ, ẏ, z)`. Valid for both formulations: the Herglotz term
//! `-αz` and the force `-αm q̇` give the same equations of motion.

use crate::error::Result;
use crate::model::{Termination, Trajectory};
use crate::reference::rkf45::{rkf45_integrate, DenseTrajectory, RkfConfig};
use crate::systems::FoucaultParams;

/// Multiplier per unit mass, `λ / m`. Zero at the origin, where the
/// constraint row vanishes.
pub fn foucault_multiplier(p: &FoucaultParams, y: &[f64]) -> f64 {
    let (x, yy, vx, vy) = (y[0], y[1], y[2], y[3]);
    let r2 = x * x + yy * yy;
    if r2 < 1e-300 {
        return 0.0;
    }
    let c = p.precession_rate();
    -(p.alpha * (yy * vx - x * vy) + 2.0 * c * (x * vx + yy * vy)) / r2
}

pub fn foucault_rhs(p: &FoucaultParams, _t: f64, y: &[f64]) -> Vec<f64> {
    let (x, yy, vx, vy, z) = (y[0], y[1], y[2], y[3], y[4]);
    let w2 = p.g / p.l;
    let mu = foucault_multiplier(p, y);
    let kinetic = 0.5 * p.m * (vx * vx + vy * vy);
    let potential = 0.5 * p.m * w2 * (x * x + yy * yy);
    vec![
        vx,
        vy,
        -w2 * x - p.alpha * vx - mu * yy,
        -w2 * yy - p.alpha * vy + mu * x,
        kinetic - potential - p.alpha * z,
    ]
}

pub fn foucault_reference(
    p: &FoucaultParams,
    q0: &[f64],
    v0: &[f64],
    t_final: f64,
    config: &RkfConfig,
) -> Result<DenseTrajectory> {
    let y0 = [q0[0], q0[1], v0[0], v0[1], 0.0];
    rkf45_integrate(|t, y| foucault_rhs(p, t, y), &y0, (0.0, t_final), config)
}

/// Samples the reference on `t_j = j h` and packages it as a trajectory.
pub fn foucault_reference_on_grid(p: &FoucaultParams, dense: &DenseTrajectory, h: f64, steps: usize) -> Trajectory {
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        configurations: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
        z_values: Vec::with_capacity(steps + 1),
        multipliers: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        termination: Termination::Completed,
        newton_iterations: Vec::new(),
        constraint_residuals: Vec::with_capacity(steps + 1),
    };
    let c = p.precession_rate();
    let w2 = p.g / p.l;
    for j in 0..=steps {
        let t = j as f64 * h;
        let s = dense.sample(t);
        let (x, y, vx, vy) = (s[0], s[1], s[2], s[3]);
        traj.times.push(t);
        traj.configurations.push(vec![x, y]);
        traj.velocities.push(vec![vx, vy]);
        traj.z_values.push(s[4]);
        traj.multipliers.push(vec![p.m * foucault_multiplier(p, &s)]);
        traj.energies
            .push(0.5 * p.m * (vx * vx + vy * vy) + 0.5 * p.m * w2 * (x * x + y * y));
        traj.constraint_residuals
            .push((-y * vx + x * vy + c * (x * x + y * y)).abs());
    }
    traj
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_is_preserved() {
        let p = FoucaultParams::default();
        let y0 = p.l / 100.0;
        let v0 = [p.precession_rate() * y0, 0.0];
        let dense = foucault_reference(&p, &[0.0, y0], &v0, 200.0, &RkfConfig::new(1e-10, 1e-12)).unwrap();
        let tr = foucault_reference_on_grid(&p, &dense, 0.05, 4000);
        assert!(tr.max_constraint_residual() < 1e-8, "{}", tr.max_constraint_residual());
    }

    #[test]
    fn multiplier_guard_at_origin() {
        let p = FoucaultParams::default();
        assert_eq!(foucault_multiplier(&p, &[0.0, 0.0, 1.0, 1.0, 0.0]), 0.0);
    }
}
