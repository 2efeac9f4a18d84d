//! Forced, constrained Lagrange–d'Alembert variational integrator.
//!
//! Uses the action-normalised discrete Lagrangian `h L_d` and discrete forces
//! `F_d^±`:
//!
//! ```text
//! D1 (h L_d)(q_j, q_{j+1}) + D2 (h L_d)(q_{j-1}, q_j)
//!     + F_d^+(q_{j-1}, q_j) + F_d^-(q_j, q_{j+1}) = A(q_j)ᵀ λ_j
//! A(q_d) q̇_d + b(q_d) = 0
//! ```
//!
//! The Lagrangian is evaluated with `z = 0`; dissipation enters only through
//! the system's external force.

use crate::error::{Error, Result};
use crate::herglotz::{empty_trajectory, failure, project_velocity, SimulationSetup, StartMode};
use crate::linalg::norm_inf;
use crate::model::{discrete_constraint, lagrangian_gradient, partials_of_ld, ContactSystem, DiscretizationRule, StepState};
use crate::newton::{newton_solve, NewtonConfig};
use crate::model::Trajectory;

/// How the continuous force `F^e` is split into `F_d^-` (acting on `q_j`)
/// and `F_d^+` (acting on `q_{j+1}`) over a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceSplit {
    #[default]
    AllLeft,
    AllRight,
    HalfHalf,
}

impl ForceSplit {
    fn weights(self) -> (f64, f64) {
        match self {
            ForceSplit::AllLeft => (1.0, 0.0),
            ForceSplit::AllRight => (0.0, 1.0),
            ForceSplit::HalfHalf => (0.5, 0.5),
        }
    }
}

pub struct ForcedStepResidualSpec<'a> {
    pub system: &'a dyn ContactSystem,
    pub rule: DiscretizationRule,
    pub window: StepState,
    pub force_split: ForceSplit,
}

/// `(F_d^-, F_d^+)` for the pair `(q, q')` starting at time `t`:
/// `h F^e(t_eval, q_d, q̇_d)` weighted by the split.
pub fn discrete_forces(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    split: ForceSplit,
    t: f64,
    q: &[f64],
    q_next: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (qd, vd) = rule.tangent(q, q_next);
    let f = system.external_force(rule.eval_time(t), &qd, &vd);
    let (wm, wp) = split.weights();
    let h = rule.h;
    (
        f.iter().map(|fi| wm * h * fi).collect(),
        f.iter().map(|fi| wp * h * fi).collect(),
    )
}

impl ForcedStepResidualSpec<'_> {
    pub fn unknowns(&self) -> usize {
        self.system.dim_q() + self.system.dim_c()
    }

    /// `D2 (h L_d)(q_{j-1}, q_j) + F_d^+(q_{j-1}, q_j)`.
    pub fn incoming(&self) -> Result<Vec<f64>> {
        let w = &self.window;
        let h = self.rule.h;
        let t_prev = w.t_curr - h;
        let p = partials_of_ld(self.system, &self.rule, t_prev, &w.q_prev, &w.q_curr, 0.0, 0.0)?;
        let (_, fp) = discrete_forces(self.system, &self.rule, self.force_split, t_prev, &w.q_prev, &w.q_curr);
        Ok(p.d2.iter().zip(&fp).map(|(d, f)| h * d + f).collect())
    }
}

pub fn la_residual(spec: &ForcedStepResidualSpec<'_>, unknowns: &[f64]) -> Result<Vec<f64>> {
    let incoming = spec.incoming()?;
    la_residual_with_incoming(
        spec.system,
        &spec.rule,
        spec.force_split,
        spec.window.t_curr,
        &spec.window.q_curr,
        &incoming,
        unknowns,
    )
}

pub(crate) fn la_residual_with_incoming(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    split: ForceSplit,
    t: f64,
    q: &[f64],
    incoming: &[f64],
    unknowns: &[f64],
) -> Result<Vec<f64>> {
    let n = system.dim_q();
    let m = system.dim_c();
    assert_eq!(unknowns.len(), n + m, "unknown vector must have n + m entries");
    let q_next = &unknowns[..n];
    let lambda = &unknowns[n..];
    let h = rule.h;

    let p = partials_of_ld(system, rule, t, q, q_next, 0.0, 0.0)?;
    let (fm, _) = discrete_forces(system, rule, split, t, q, q_next);
    let reaction = system.constraint_matrix(q).transpose_mul_vec(lambda);
    let mut out: Vec<f64> = (0..n).map(|i| h * p.d1[i] + incoming[i] + fm[i] - reaction[i]).collect();
    out.extend(discrete_constraint(system, rule, q, q_next));
    Error::check_all_finite("LA residual", &out, unknowns)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcedStepOutcome {
    pub q_next: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
}

pub fn la_step(spec: &ForcedStepResidualSpec<'_>, lambda_guess: &[f64], solver: &NewtonConfig) -> Result<ForcedStepOutcome> {
    let incoming = spec.incoming()?;
    let w = &spec.window;
    let n = spec.system.dim_q();
    let mut x0: Vec<f64> = w.q_curr.iter().zip(&w.q_prev).map(|(c, p)| 2.0 * c - p).collect();
    x0.extend_from_slice(lambda_guess);
    let sol = newton_solve(
        |x: &[f64]| la_residual_with_incoming(spec.system, &spec.rule, spec.force_split, w.t_curr, &w.q_curr, &incoming, x),
        &x0,
        solver,
    )?;
    Ok(ForcedStepOutcome {
        q_next: sol.x[..n].to_vec(),
        lambda: sol.x[n..].to_vec(),
        iterations: sol.iterations,
    })
}

/// Runs the Lagrange–d'Alembert integrator. `z_values` stay zero.
pub fn simulate_la(system: &dyn ContactSystem, setup: &SimulationSetup, split: ForceSplit) -> Trajectory {
    let rule = setup.rule;
    let h = rule.h;
    let n = system.dim_q();
    let m = system.dim_c();
    let steps = setup.steps();
    let mut traj = empty_trajectory(&setup.q0, setup.t0);
    if steps == 0 {
        traj.finalize(system, h);
        return traj;
    }

    let q0 = &setup.q0;
    let v = project_velocity(system, q0, &setup.v0, &setup.free_mask());
    let first = match setup.start {
        StartMode::Euler => Ok(ForcedStepOutcome {
            q_next: q0.iter().zip(&v).map(|(q, vi)| q + h * vi).collect(),
            lambda: vec![0.0; m],
            iterations: 0,
        }),
        StartMode::MomentumMatching => lagrangian_gradient(system, setup.t0, q0, &v, 0.0).and_then(|g| {
            let mut x0: Vec<f64> = q0.iter().zip(&v).map(|(q, vi)| q + h * vi).collect();
            x0.extend(std::iter::repeat_n(0.0, m));
            newton_solve(
                |x: &[f64]| la_residual_with_incoming(system, &rule, split, setup.t0, q0, &g.dqdot, x),
                &x0,
                &setup.newton,
            )
            .map(|sol| ForcedStepOutcome {
                q_next: sol.x[..n].to_vec(),
                lambda: sol.x[n..].to_vec(),
                iterations: sol.iterations,
            })
        }),
    };
    let first = match first {
        Ok(f) => f,
        Err(e) => {
            traj.termination = failure(1, setup.t0 + h, &e);
            traj.finalize(system, h);
            return traj;
        }
    };

    let mut window = StepState {
        q_prev: q0.clone(),
        q_curr: first.q_next.clone(),
        z_prev: 0.0,
        z_curr: 0.0,
        t_curr: setup.t0 + h,
        step_index: 1,
    };
    traj.constraint_residuals
        .push(norm_inf(&discrete_constraint(system, &rule, q0, &first.q_next)));
    traj.times.push(window.t_curr);
    traj.configurations.push(first.q_next);
    traj.z_values.push(0.0);
    traj.multipliers.push(first.lambda.clone());
    traj.newton_iterations.push(first.iterations);
    let mut lambda = first.lambda;

    for step in 2..=steps {
        let spec = ForcedStepResidualSpec {
            system,
            rule,
            window: window.clone(),
            force_split: split,
        };
        let t_next = setup.t0 + step as f64 * h;
        match la_step(&spec, &lambda, &setup.newton) {
            Ok(out) => {
                traj.constraint_residuals
                    .push(norm_inf(&discrete_constraint(system, &rule, &window.q_curr, &out.q_next)));
                traj.times.push(t_next);
                traj.configurations.push(out.q_next.clone());
                traj.z_values.push(0.0);
                traj.multipliers.push(out.lambda.clone());
                traj.newton_iterations.push(out.iterations);
                lambda = out.lambda;
                window = StepState {
                    q_prev: std::mem::take(&mut window.q_curr),
                    q_curr: out.q_next,
                    z_prev: 0.0,
                    z_curr: 0.0,
                    t_curr: t_next,
                    step_index: step,
                };
            }
            Err(e) => {
                traj.termination = failure(step, t_next, &e);
                break;
            }
        }
    }
    traj.finalize(system, h);
    traj
}
