//! Constrained discrete Herglotz (contact) integrator.
//!
//! Each step solves, for the unknowns `(q_{j+1}, z_{j+1}, λ_j)`,
//!
//! ```text
//! D1 L_d(q_j, q_{j+1}, z_j, z_{j+1})
//!     + D2 L_d(q_{j-1}, q_j, z_{j-1}, z_j) (1 + h D3 L_d(j, j+1)) / (1 - h D4 L_d(j-1, j))
//!     = A(q_j)ᵀ λ_j
//! z_{j+1} - z_j = h L_d(q_j, q_{j+1}, z_j, z_{j+1})
//! A(q_d) q̇_d + b(q_d) = 0
//! ```
//!
//! The second term only depends on the known window and is evaluated once
//! per step ("incoming momentum" below).

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, project_affine};
use crate::model::{
    discrete_constraint, evaluate_discrete_lagrangian, lagrangian_gradient, partials_of_ld, ContactSystem,
    DiscretizationRule, StepState, Termination, Trajectory,
};
use crate::newton::{newton_solve, NewtonConfig};

/// Threshold on `|1 - h D4 L_d|` below which the z-coupling is degenerate.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-12;

/// How the second configuration point of the first window is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMode {
    /// `q_1 = q_0 + h v_0`. Simple, but caps the global order at one.
    Euler,
    /// Solve one constrained step whose incoming momentum is the continuous
    /// momentum `∂L/∂q̇(q_0, v_0, z_0)`. Preserves the scheme's order.
    MomentumMatching,
}

/// Everything a trajectory run needs besides the system.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup {
    pub rule: DiscretizationRule,
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
    /// Velocity components the initial projection may adjust. `None` means
    /// all of them (plain orthogonal projection).
    pub velocity_free: Option<Vec<bool>>,
    pub t0: f64,
    pub t_final: f64,
    pub newton: NewtonConfig,
    pub start: StartMode,
}

impl SimulationSetup {
    pub fn new(rule: DiscretizationRule, q0: Vec<f64>, v0: Vec<f64>, t_final: f64) -> Self {
        Self {
            rule,
            q0,
            v0,
            velocity_free: None,
            t0: 0.0,
            t_final,
            newton: NewtonConfig::default(),
            start: StartMode::MomentumMatching,
        }
    }

    /// Number of steps, `round(t_final / h)`.
    pub fn steps(&self) -> usize {
        if self.t_final <= 0.0 {
            0
        } else {
            (self.t_final / self.rule.h).round() as usize
        }
    }

    pub(crate) fn free_mask(&self) -> Vec<bool> {
        self.velocity_free.clone().unwrap_or_else(|| vec![true; self.q0.len()])
    }
}

/// Projects `v0` onto `{v : A(q0) v + b(q0) = 0}`, moving only free components.
pub fn project_velocity(system: &dyn ContactSystem, q0: &[f64], v0: &[f64], free: &[bool]) -> Vec<f64> {
    let a = system.constraint_matrix(q0);
    let b = system.constraint_drift(q0);
    project_affine(&a, &b, v0, free)
}

/// Residual specification for one contact step.
pub struct ContactStepResidualSpec<'a> {
    pub system: &'a dyn ContactSystem,
    pub rule: DiscretizationRule,
    pub window: StepState,
}

impl ContactStepResidualSpec<'_> {
    /// Size of the unknown vector, `n + 1 + m`.
    pub fn unknowns(&self) -> usize {
        self.system.dim_q() + 1 + self.system.dim_c()
    }

    /// `D2 L_d(q_{j-1}, q_j, z_{j-1}, z_j) / (1 - h D4 L_d(q_{j-1}, q_j, z_{j-1}, z_j))`.
    pub fn incoming(&self) -> Result<Vec<f64>> {
        let w = &self.window;
        let h = self.rule.h;
        let p = partials_of_ld(self.system, &self.rule, w.t_curr - h, &w.q_prev, &w.q_curr, w.z_prev, w.z_curr)?;
        let denom = 1.0 - h * p.d4;
        if denom.abs() < DENOMINATOR_THRESHOLD {
            return Err(Error::DenominatorSingular { value: denom.abs() });
        }
        Ok(p.d2.iter().map(|d| d / denom).collect())
    }

    /// Default Newton starting point (λ comes from the caller).
    pub fn initial_guess(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        let w = &self.window;
        let h = self.rule.h;
        let mut x: Vec<f64> = w.q_curr.iter().zip(&w.q_prev).map(|(c, p)| 2.0 * c - p).collect();
        let ld = evaluate_discrete_lagrangian(self.system, &self.rule, w.t_curr - h, &w.q_prev, &w.q_curr, w.z_prev, w.z_curr)?;
        x.push(w.z_curr + h * ld);
        x.extend_from_slice(lambda);
        Ok(x)
    }
}

/// Stacked residual of one contact step for `unknowns = (q_{j+1}, z_{j+1}, λ)`.
pub fn contact_residual(spec: &ContactStepResidualSpec<'_>, unknowns: &[f64]) -> Result<Vec<f64>> {
    let incoming = spec.incoming()?;
    residual_with_incoming(
        spec.system,
        &spec.rule,
        spec.window.t_curr,
        &spec.window.q_curr,
        spec.window.z_curr,
        &incoming,
        unknowns,
    )
}

pub(crate) fn residual_with_incoming(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    t: f64,
    q: &[f64],
    z: f64,
    incoming: &[f64],
    unknowns: &[f64],
) -> Result<Vec<f64>> {
    let n = system.dim_q();
    let m = system.dim_c();
    assert_eq!(unknowns.len(), n + 1 + m, "unknown vector must have n + 1 + m entries");
    let q_next = &unknowns[..n];
    let z_next = unknowns[n];
    let lambda = &unknowns[n + 1..];
    let h = rule.h;

    let p = partials_of_ld(system, rule, t, q, q_next, z, z_next)?;
    let a = system.constraint_matrix(q);
    let reaction = a.transpose_mul_vec(lambda);
    let factor = 1.0 + h * p.d3;

    let mut out = Vec::with_capacity(n + 1 + m);
    for i in 0..n {
        out.push(p.d1[i] + incoming[i] * factor - reaction[i]);
    }
    let ld = evaluate_discrete_lagrangian(system, rule, t, q, q_next, z, z_next)?;
    out.push(z_next - z - h * ld);
    out.extend(discrete_constraint(system, rule, q, q_next));
    Error::check_all_finite("contact residual", &out, unknowns)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactStepOutcome {
    pub q_next: Vec<f64>,
    pub z_next: f64,
    pub lambda: Vec<f64>,
    pub iterations: usize,
}

fn split_solution(n: usize, x: Vec<f64>, iterations: usize) -> ContactStepOutcome {
    ContactStepOutcome {
        q_next: x[..n].to_vec(),
        z_next: x[n],
        lambda: x[n + 1..].to_vec(),
        iterations,
    }
}

/// Solves one contact step, starting λ from `lambda_guess`.
pub fn contact_step(
    spec: &ContactStepResidualSpec<'_>,
    lambda_guess: &[f64],
    solver: &NewtonConfig,
) -> Result<ContactStepOutcome> {
    let incoming = spec.incoming()?;
    let x0 = spec.initial_guess(lambda_guess)?;
    let w = &spec.window;
    let sol = newton_solve(
        |x: &[f64]| residual_with_incoming(spec.system, &spec.rule, w.t_curr, &w.q_curr, w.z_curr, &incoming, x),
        &x0,
        solver,
    )?;
    Ok(split_solution(spec.system.dim_q(), sol.x, sol.iterations))
}

/// First window of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialWindow {
    pub state: StepState,
    pub v0_projected: Vec<f64>,
    /// Multiplier at `q_0`; zero under [`StartMode::Euler`].
    pub lambda0: Vec<f64>,
    pub iterations: usize,
}

/// Builds `(q_0, q_1, z_0 = 0, z_1)` from the initial state.
#[allow(clippy::too_many_arguments)]
pub fn initialize_window(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    q0: &[f64],
    v0: &[f64],
    free: &[bool],
    t0: f64,
    start: StartMode,
    solver: &NewtonConfig,
) -> Result<InitialWindow> {
    let n = system.dim_q();
    let m = system.dim_c();
    let h = rule.h;
    let v = project_velocity(system, q0, v0, free);
    let z0 = 0.0;

    match start {
        StartMode::Euler => {
            let q1: Vec<f64> = q0.iter().zip(&v).map(|(q, vi)| q + h * vi).collect();
            let guess = z0 + h * system.lagrangian(t0, q0, &v, z0);
            let sol = newton_solve(
                |z: &[f64]| Ok(vec![z[0] - z0 - h * evaluate_discrete_lagrangian(system, rule, t0, q0, &q1, z0, z[0])?]),
                &[guess],
                &solver.with_tolerance(solver.tolerance.min(1e-12)),
            )?;
            Ok(InitialWindow {
                state: StepState {
                    q_prev: q0.to_vec(),
                    q_curr: q1,
                    z_prev: z0,
                    z_curr: sol.x[0],
                    t_curr: t0 + h,
                    step_index: 1,
                },
                v0_projected: v,
                lambda0: vec![0.0; m],
                iterations: sol.iterations,
            })
        }
        StartMode::MomentumMatching => {
            let g = lagrangian_gradient(system, t0, q0, &v, z0)?;
            let incoming: Vec<f64> = g.dqdot.iter().map(|p| p / h).collect();
            let mut x0: Vec<f64> = q0.iter().zip(&v).map(|(q, vi)| q + h * vi).collect();
            x0.push(z0 + h * system.lagrangian(t0, q0, &v, z0));
            x0.extend(std::iter::repeat_n(0.0, m));
            let sol = newton_solve(
                |x: &[f64]| residual_with_incoming(system, rule, t0, q0, z0, &incoming, x),
                &x0,
                solver,
            )?;
            let out = split_solution(n, sol.x, sol.iterations);
            Ok(InitialWindow {
                state: StepState {
                    q_prev: q0.to_vec(),
                    q_curr: out.q_next,
                    z_prev: z0,
                    z_curr: out.z_next,
                    t_curr: t0 + h,
                    step_index: 1,
                },
                v0_projected: v,
                lambda0: out.lambda,
                iterations: out.iterations,
            })
        }
    }
}

pub(crate) fn empty_trajectory(q0: &[f64], t0: f64) -> Trajectory {
    Trajectory {
        times: vec![t0],
        configurations: vec![q0.to_vec()],
        velocities: Vec::new(),
        z_values: vec![0.0],
        multipliers: Vec::new(),
        energies: Vec::new(),
        termination: Termination::Completed,
        newton_iterations: Vec::new(),
        constraint_residuals: Vec::new(),
    }
}

pub(crate) fn failure(step: usize, time: f64, err: &Error) -> Termination {
    Termination::SolverFailure {
        step,
        time,
        message: err.to_string(),
    }
}

/// Runs the contact integrator over the whole horizon. Solver failures
/// truncate the trajectory and are recorded in `termination`.
pub fn simulate_contact(system: &dyn ContactSystem, setup: &SimulationSetup) -> Trajectory {
    let rule = setup.rule;
    let h = rule.h;
    let steps = setup.steps();
    let mut traj = empty_trajectory(&setup.q0, setup.t0);
    if steps == 0 {
        traj.finalize(system, h);
        return traj;
    }

    let init = match initialize_window(
        system,
        &rule,
        &setup.q0,
        &setup.v0,
        &setup.free_mask(),
        setup.t0,
        setup.start,
        &setup.newton,
    ) {
        Ok(w) => w,
        Err(e) => {
            traj.termination = failure(1, setup.t0 + h, &e);
            traj.finalize(system, h);
            return traj;
        }
    };
    let mut window = init.state;
    let mut lambda = init.lambda0.clone();
    traj.times.push(window.t_curr);
    traj.configurations.push(window.q_curr.clone());
    traj.z_values.push(window.z_curr);
    traj.multipliers.push(init.lambda0);
    traj.newton_iterations.push(init.iterations);
    traj.constraint_residuals
        .push(norm_inf(&discrete_constraint(system, &rule, &window.q_prev, &window.q_curr)));

    for step in 2..=steps {
        let spec = ContactStepResidualSpec {
            system,
            rule,
            window: window.clone(),
        };
        let t_next = setup.t0 + step as f64 * h;
        match contact_step(&spec, &lambda, &setup.newton) {
            Ok(out) => {
                traj.constraint_residuals
                    .push(norm_inf(&discrete_constraint(system, &rule, &window.q_curr, &out.q_next)));
                traj.times.push(t_next);
                traj.configurations.push(out.q_next.clone());
                traj.z_values.push(out.z_next);
                traj.multipliers.push(out.lambda.clone());
                traj.newton_iterations.push(out.iterations);
                lambda = out.lambda;
                window = StepState {
                    q_prev: std::mem::take(&mut window.q_curr),
                    q_curr: out.q_next,
                    z_prev: window.z_curr,
                    z_curr: out.z_next,
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
