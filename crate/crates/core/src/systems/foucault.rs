use crate::linalg::Matrix;
use crate::model::{ContactSystem, LagrangianGradient};

/// Sidereal rotation rate of the Earth (rad/s).
pub const EARTH_ROTATION_RATE: f64 = 7.2921159e-5;

/// Small-amplitude Foucault pendulum in Earth-fixed horizontal coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoucaultParams {
    pub m: f64,
    pub l: f64,
    pub g: f64,
    /// Latitude (rad).
    pub beta: f64,
    pub omega: f64,
    pub alpha: f64,
}

impl Default for FoucaultParams {
    /// The Paris Observatory configuration of 1851.
    fn default() -> Self {
        Self {
            m: 28.0,
            l: 67.0,
            g: 9.81,
            beta: 49f64.to_radians(),
            omega: EARTH_ROTATION_RATE,
            alpha: 1e-3,
        }
    }
}

impl FoucaultParams {
    /// Rotation rate of the oscillation plane, `Ω sin β`.
    pub fn precession_rate(&self) -> f64 {
        self.omega * self.beta.sin()
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI * (self.l / self.g).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoucaultFormulation {
    /// `L = K - V` with the damping force `-α m q̇`.
    LagrangeDAlembert,
    /// `L = K - V - α z`, no external force.
    Herglotz,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoucaultPendulum {
    pub params: FoucaultParams,
    pub formulation: FoucaultFormulation,
}

pub fn foucault_system(params: FoucaultParams, formulation: FoucaultFormulation) -> FoucaultPendulum {
    FoucaultPendulum { params, formulation }
}

impl FoucaultPendulum {
    fn stiffness(&self) -> f64 {
        self.params.m * self.params.g / self.params.l
    }

    fn z_coefficient(&self) -> f64 {
        match self.formulation {
            FoucaultFormulation::Herglotz => self.params.alpha,
            FoucaultFormulation::LagrangeDAlembert => 0.0,
        }
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        0.5 * self.stiffness() * (q[0] * q[0] + q[1] * q[1])
    }
}

impl ContactSystem for FoucaultPendulum {
    fn dim_q(&self) -> usize {
        2
    }

    fn dim_c(&self) -> usize {
        1
    }

    fn lagrangian(&self, _t: f64, q: &[f64], qdot: &[f64], z: f64) -> f64 {
        0.5 * self.params.m * (qdot[0] * qdot[0] + qdot[1] * qdot[1]) - self.potential(q) - self.z_coefficient() * z
    }

    fn constraint_matrix(&self, q: &[f64]) -> Matrix {
        Matrix::from_row_major(1, 2, vec![-q[1], q[0]])
    }

    fn constraint_drift(&self, q: &[f64]) -> Vec<f64> {
        vec![self.params.precession_rate() * (q[0] * q[0] + q[1] * q[1])]
    }

    fn external_force(&self, _t: f64, _q: &[f64], qdot: &[f64]) -> Vec<f64> {
        match self.formulation {
            FoucaultFormulation::LagrangeDAlembert => {
                let c = -self.params.alpha * self.params.m;
                vec![c * qdot[0], c * qdot[1]]
            }
            FoucaultFormulation::Herglotz => vec![0.0, 0.0],
        }
    }

    fn energy(&self, q: &[f64], qdot: &[f64]) -> f64 {
        0.5 * self.params.m * (qdot[0] * qdot[0] + qdot[1] * qdot[1]) + self.potential(q)
    }

    fn dissipation_alpha(&self) -> f64 {
        self.params.alpha
    }

    fn analytic_gradient(&self, _t: f64, q: &[f64], qdot: &[f64], _z: f64) -> Option<LagrangianGradient> {
        let k = self.stiffness();
        Some(LagrangianGradient {
            dq: vec![-k * q[0], -k * q[1]],
            dqdot: vec![self.params.m * qdot[0], self.params.m * qdot[1]],
            dz: -self.z_coefficient(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_values() {
        let p = FoucaultParams::default();
        let sys = foucault_system(p, FoucaultFormulation::Herglotz);
        assert_eq!(sys.energy(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        let y0 = p.l / 100.0;
        let v = sys.energy(&[0.0, y0], &[0.0, 0.0]);
        let expected = 0.5 * 28.0 * (9.81 / 67.0) * 0.67 * 0.67;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.9202).abs() < 1e-4);
    }

    #[test]
    fn constraint_row_at_start() {
        let p = FoucaultParams::default();
        let sys = foucault_system(p, FoucaultFormulation::LagrangeDAlembert);
        let y0 = p.l / 100.0;
        let a = sys.constraint_matrix(&[0.0, y0]);
        assert_eq!(a.row(0), &[-y0, 0.0]);
        let b = sys.constraint_drift(&[0.0, y0]);
        assert!((b[0] - p.omega * p.beta.sin() * y0 * y0).abs() < 1e-20);
    }

    #[test]
    fn formulations_differ_only_in_dissipation() {
        let p = FoucaultParams::default();
        let h = foucault_system(p, FoucaultFormulation::Herglotz);
        let la = foucault_system(p, FoucaultFormulation::LagrangeDAlembert);
        let (q, v) = ([0.1, -0.2], [0.3, 0.05]);
        assert_eq!(h.lagrangian(0.0, &q, &v, 0.0), la.lagrangian(0.0, &q, &v, 0.0));
        assert!((h.lagrangian(0.0, &q, &v, 2.0) - la.lagrangian(0.0, &q, &v, 2.0) + 2.0 * p.alpha).abs() < 1e-15);
        assert_eq!(h.external_force(0.0, &q, &v), vec![0.0, 0.0]);
        let f = la.external_force(0.0, &q, &v);
        assert!((f[0] + p.alpha * p.m * v[0]).abs() < 1e-15);
    }
}
