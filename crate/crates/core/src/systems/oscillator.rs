use crate::linalg::Matrix;
use crate::model::{ContactSystem, LagrangianGradient};

/// Scalar damped oscillator `ẍ + α ẋ + ω² x = 0` written as the contact
/// Lagrangian `L = ½ q̇² - ½ ω² q² - α z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedOscillator {
    pub omega: f64,
    pub alpha: f64,
}

impl DampedOscillator {
    pub fn new(omega: f64, alpha: f64) -> Self {
        Self { omega, alpha }
    }

    /// Closed-form solution (underdamped case, `α < 2ω`).
    pub fn exact(&self, t: f64, x0: f64, v0: f64) -> f64 {
        let wd = (self.omega * self.omega - 0.25 * self.alpha * self.alpha).sqrt();
        let decay = (-0.5 * self.alpha * t).exp();
        let b = (v0 + 0.5 * self.alpha * x0) / wd;
        decay * (x0 * (wd * t).cos() + b * (wd * t).sin())
    }
}

impl ContactSystem for DampedOscillator {
    fn dim_q(&self) -> usize {
        1
    }

    fn dim_c(&self) -> usize {
        0
    }

    fn lagrangian(&self, _t: f64, q: &[f64], qdot: &[f64], z: f64) -> f64 {
        0.5 * qdot[0] * qdot[0] - 0.5 * self.omega * self.omega * q[0] * q[0] - self.alpha * z
    }

    fn constraint_matrix(&self, _q: &[f64]) -> Matrix {
        Matrix::zeros(0, 1)
    }

    fn external_force(&self, _t: f64, _q: &[f64], qdot: &[f64]) -> Vec<f64> {
        vec![-self.alpha * qdot[0]]
    }

    fn energy(&self, q: &[f64], qdot: &[f64]) -> f64 {
        0.5 * qdot[0] * qdot[0] + 0.5 * self.omega * self.omega * q[0] * q[0]
    }

    fn dissipation_alpha(&self) -> f64 {
        self.alpha
    }

    fn analytic_gradient(&self, _t: f64, q: &[f64], qdot: &[f64], _z: f64) -> Option<LagrangianGradient> {
        Some(LagrangianGradient {
            dq: vec![-self.omega * self.omega * q[0]],
            dqdot: vec![qdot[0]],
            dz: -self.alpha,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solution_satisfies_ode() {
        let osc = DampedOscillator::new(1.0, 0.1);
        let (x0, v0) = (1.0, 0.3);
        assert!((osc.exact(0.0, x0, v0) - x0).abs() < 1e-15);
        let d = 1e-4;
        for t in [0.5, 2.0, 7.0] {
            let x = |s: f64| osc.exact(s, x0, v0);
            let v = (x(t + d) - x(t - d)) / (2.0 * d);
            let a = (x(t + d) - 2.0 * x(t) + x(t - d)) / (d * d);
            assert!((a + 0.1 * v + x(t)).abs() < 1e-6);
        }
        let v_at_0 = (osc.exact(1e-6, x0, v0) - osc.exact(-1e-6, x0, v0)) / 2e-6;
        assert!((v_at_0 - v0).abs() < 1e-8);
    }
}
