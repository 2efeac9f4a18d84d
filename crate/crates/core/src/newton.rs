//! Modified multivariate Newton–Raphson.
//!
//! "Modified" here means: central finite-difference Jacobians by default and
//! an optional Armijo-style backtracking on the residual norm.

use crate::error::{Error, Result};
use crate::linalg::{self, norm_inf, Matrix};
use crate::model::fd_probe;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Damping {
    None,
    ArmijoBacktracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    FiniteDifference,
    Provided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: Damping,
    pub jacobian: JacobianMode,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 50,
            damping: Damping::ArmijoBacktracking,
            jacobian: JacobianMode::FiniteDifference,
        }
    }
}

impl NewtonConfig {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("Newton tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("Newton needs at least one iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `‖F(x_k)‖∞` for every iterate, starting with `x0`.
    pub residual_history: Vec<f64>,
}

const MAX_HALVINGS: usize = 20;

/// Central-difference Jacobian of `residual` at `x`.
pub fn fd_jacobian<F>(residual: &F, x: &[f64]) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k = x.len();
    let mut jac = Matrix::zeros(k, k);
    let mut xp = x.to_vec();
    for j in 0..k {
        let d = fd_probe(x[j]);
        xp[j] = x[j] + d;
        let fp = residual(&xp)?;
        xp[j] = x[j] - d;
        let fm = residual(&xp)?;
        xp[j] = x[j];
        for i in 0..k {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * d);
        }
    }
    Ok(jac)
}

/// Solves `residual(x) = 0` with finite-difference Jacobians.
pub fn newton_solve<F>(residual: F, x0: &[f64], config: &NewtonConfig) -> Result<NewtonSolution>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if config.jacobian == JacobianMode::Provided {
        return Err(Error::InvalidConfig("Provided Jacobian mode needs newton_solve_with_jacobian".into()));
    }
    newton_core(&residual, &|x: &[f64]| fd_jacobian(&residual, x), x0, config)
}

/// Solves `residual(x) = 0` with a caller-supplied Jacobian.
pub fn newton_solve_with_jacobian<F, J>(residual: F, jacobian: J, x0: &[f64], config: &NewtonConfig) -> Result<NewtonSolution>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<Matrix>,
{
    newton_core(&residual, &jacobian, x0, config)
}

fn newton_core<F, J>(residual: &F, jacobian: &J, x0: &[f64], config: &NewtonConfig) -> Result<NewtonSolution>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<Matrix>,
{
    config.validate()?;
    let mut x = x0.to_vec();
    let mut f = residual(&x)?;
    Error::check_all_finite("newton residual", &f, &x)?;
    let mut norm = norm_inf(&f);
    let mut history = vec![norm];

    for iter in 0..config.max_iterations {
        if norm <= config.tolerance {
            return Ok(NewtonSolution {
                x,
                iterations: iter,
                residual_norm: norm,
                residual_history: history,
            });
        }
        let jac = jacobian(&x)?;
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let dx = linalg::solve(&jac, &neg_f)?;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + step * di).collect();
            let ft = residual(&trial);
            let usable = match &ft {
                Ok(v) => v.iter().all(|e| e.is_finite()),
                Err(_) => false,
            };
            if usable {
                let ft = ft.unwrap();
                let nt = norm_inf(&ft);
                if config.damping == Damping::None || nt < norm || nt <= config.tolerance {
                    accepted = Some((trial, ft, nt));
                    break;
                }
            } else if config.damping == Damping::None {
                ft?;
                return Err(Error::Evaluation {
                    context: "newton residual",
                    inputs: trial,
                });
            }
            step *= 0.5;
        }
        // No decrease found: take the full step anyway and let the
        // iteration limit decide.
        let (xn, fnew, nn) = match accepted {
            Some(a) => a,
            None => {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + di).collect();
                let ft = residual(&trial)?;
                Error::check_all_finite("newton residual", &ft, &trial)?;
                let nt = norm_inf(&ft);
                (trial, ft, nt)
            }
        };
        x = xn;
        f = fnew;
        norm = nn;
        history.push(norm);
    }

    if norm <= config.tolerance {
        Ok(NewtonSolution {
            x,
            iterations: config.max_iterations,
            residual_norm: norm,
            residual_history: history,
        })
    } else {
        Err(Error::NewtonDivergence {
            iterations: config.max_iterations,
            residual: norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_residual_converges_in_one_iteration() {
        let m = Matrix::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let b = [1.0, 2.0];
        let res = |x: &[f64]| -> Result<Vec<f64>> { Ok(m.mul_vec(x).iter().zip(&b).map(|(a, c)| a - c).collect()) };
        let cfg = NewtonConfig::default().with_tolerance(1e-12);
        let sol = newton_solve(res, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!((sol.x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((sol.x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn converged_start_returns_immediately() {
        let res = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![x[0] - 1.0]) };
        let sol = newton_solve(res, &[1.0], &NewtonConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.x, vec![1.0]);
    }

    #[test]
    fn divergence_is_reported() {
        // No real root.
        let res = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![x[0].atan() + 2.0]) };
        let cfg = NewtonConfig {
            max_iterations: 3,
            ..NewtonConfig::default()
        };
        let r = newton_solve(res, &[0.0], &cfg);
        assert!(matches!(r, Err(Error::NewtonDivergence { iterations: 3, .. })), "{r:?}");
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let res = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![x[0] + x[1] - 1.0, 2.0 * x[0] + 2.0 * x[1] - 3.0]) };
        assert!(matches!(
            newton_solve(res, &[0.0, 0.0], &NewtonConfig::default()),
            Err(Error::SingularJacobian { .. })
        ));
    }

    #[test]
    fn provided_jacobian_mode() {
        let res = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![x[0] * x[0] - 4.0]) };
        let jac = |x: &[f64]| -> Result<Matrix> { Ok(Matrix::from_rows(&[&[2.0 * x[0]]])) };
        let cfg = NewtonConfig {
            jacobian: JacobianMode::Provided,
            tolerance: 1e-14,
            ..NewtonConfig::default()
        };
        let sol = newton_solve_with_jacobian(res, jac, &[3.0], &cfg).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-14);
        assert!(newton_solve(res, &[3.0], &cfg).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let res = |x: &[f64]| -> Result<Vec<f64>> { Ok(x.to_vec()) };
        let cfg = NewtonConfig {
            tolerance: 0.0,
            ..NewtonConfig::default()
        };
        assert!(matches!(newton_solve(res, &[1.0], &cfg), Err(Error::InvalidConfig(_))));
    }
}
