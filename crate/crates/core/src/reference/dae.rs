//! Fully implicit DAE reference: fixed-step BDF2 with a BDF1 first step, and
//! consistent initialisation for constrained Herglotz systems.

use crate::error::{Error, Result};
use crate::herglotz::project_velocity;
use crate::linalg::{norm_inf, solve, Matrix};
use crate::model::{fd_probe, lagrangian_gradient, ContactSystem, Termination, Trajectory};
use crate::newton::{newton_solve, NewtonConfig};

/// `G(t, y, ẏ) = 0`.
pub trait ImplicitDae {
    fn dim(&self) -> usize;
    fn residual(&self, t: f64, y: &[f64], ydot: &[f64]) -> Result<Vec<f64>>;
    /// `true` for rows that contain `ẏ`.
    fn differential_rows(&self) -> Vec<bool>;
}

/// Continuous constrained Herglotz equations in first-order form.
///
/// State `y = (q, v, p, z, λ)` with rows
///
/// ```text
/// q̇ - v = 0
/// ṗ - ∂L/∂q - p ∂L/∂z - Aᵀλ = 0
/// p - ∂L/∂q̇ = 0
/// ż - L = 0
/// A v + b = 0
/// ```
///
/// Carrying the momentum `p` as a state keeps every row free of second
/// derivatives of `L`.
pub struct ContinuousConstrainedSystem<'a> {
    pub system: &'a dyn ContactSystem,
}

impl<'a> ContinuousConstrainedSystem<'a> {
    pub fn new(system: &'a dyn ContactSystem) -> Self {
        Self { system }
    }

    fn n(&self) -> usize {
        self.system.dim_q()
    }

    fn m(&self) -> usize {
        self.system.dim_c()
    }

    pub fn q<'y>(&self, y: &'y [f64]) -> &'y [f64] {
        &y[..self.n()]
    }

    pub fn v<'y>(&self, y: &'y [f64]) -> &'y [f64] {
        &y[self.n()..2 * self.n()]
    }

    pub fn z(&self, y: &[f64]) -> f64 {
        y[3 * self.n()]
    }

    pub fn lambda<'y>(&self, y: &'y [f64]) -> &'y [f64] {
        &y[3 * self.n() + 1..]
    }

    fn constraint(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        let mut c = self.system.constraint_matrix(q).mul_vec(v);
        for (ci, bi) in c.iter_mut().zip(self.system.constraint_drift(q)) {
            *ci += bi;
        }
        c
    }
}

impl ImplicitDae for ContinuousConstrainedSystem<'_> {
    fn dim(&self) -> usize {
        3 * self.n() + 1 + self.m()
    }

    fn residual(&self, t: f64, y: &[f64], ydot: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let q = &y[..n];
        let v = &y[n..2 * n];
        let p = &y[2 * n..3 * n];
        let z = y[3 * n];
        let lambda = &y[3 * n + 1..];
        let g = lagrangian_gradient(self.system, t, q, v, z)?;
        let reaction = self.system.constraint_matrix(q).transpose_mul_vec(lambda);
        let mut out = Vec::with_capacity(self.dim());
        out.extend((0..n).map(|i| ydot[i] - v[i]));
        out.extend((0..n).map(|i| ydot[2 * n + i] - g.dq[i] - p[i] * g.dz - reaction[i]));
        out.extend((0..n).map(|i| p[i] - g.dqdot[i]));
        out.push(ydot[3 * n] - self.system.lagrangian(t, q, v, z));
        out.extend(self.constraint(q, v));
        Error::check_all_finite("DAE residual", &out, y)?;
        Ok(out)
    }

    fn differential_rows(&self) -> Vec<bool> {
        let n = self.n();
        let mut rows = vec![true; 2 * n];
        rows.extend(std::iter::repeat_n(false, n));
        rows.push(true);
        rows.extend(std::iter::repeat_n(false, self.m()));
        rows
    }
}

/// Consistent `(y0, ẏ0)` from `q0` and a velocity guess.
///
/// The velocity is projected onto the constraint (only components marked in
/// `free` move). The multiplier solves the once-differentiated constraint
/// `d/dt (A v + b) = 0` with `v̇` eliminated through the mass matrix
/// `P_v = ∂²L/∂q̇²`; derivatives of `∂L/∂q̇` come from finite differences of
/// the gradient.
pub fn consistent_init(
    dae: &ContinuousConstrainedSystem<'_>,
    t0: f64,
    q0: &[f64],
    v0_guess: &[f64],
    free: &[bool],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = dae.system;
    let n = sys.dim_q();
    let m = sys.dim_c();
    let z0 = 0.0;
    let v = project_velocity(sys, q0, v0_guess, free);
    let g = lagrangian_gradient(sys, t0, q0, &v, z0)?;
    let zdot = sys.lagrangian(t0, q0, &v, z0);
    let f: Vec<f64> = (0..n).map(|i| g.dq[i] + g.dqdot[i] * g.dz).collect();

    let momentum = |t: f64, q: &[f64], vv: &[f64], z: f64| lagrangian_gradient(sys, t, q, vv, z).map(|g| g.dqdot);
    let mut pv_data = vec![0.0; n * n];
    for k in 0..n {
        let e = fd_probe(v[k]);
        let mut vp = v.clone();
        let mut vm = v.clone();
        vp[k] += e;
        vm[k] -= e;
        let a = momentum(t0, q0, &vp, z0)?;
        let b = momentum(t0, q0, &vm, z0)?;
        for i in 0..n {
            pv_data[i * n + k] = (a[i] - b[i]) / (2.0 * e);
        }
    }
    let pv = Matrix::from_row_major(n, n, pv_data);

    // Total time derivative of ∂L/∂q̇ excluding the v̇ contribution:
    // P_t + P_q v + P_z ż, by a central difference along (1, v, ż).
    let qnorm = q0.iter().chain(std::iter::once(&t0)).fold(1.0_f64, |a, x| a.max(x.abs()));
    let e = f64::EPSILON.sqrt() * qnorm;
    let shift = |s: f64| -> Result<Vec<f64>> {
        let q: Vec<f64> = q0.iter().zip(&v).map(|(q, vi)| q + s * vi).collect();
        momentum(t0 + s, &q, &v, z0 + s * zdot)
    };
    let (a, b) = (shift(e)?, shift(-e)?);
    let p_drift: Vec<f64> = (0..n).map(|i| (a[i] - b[i]) / (2.0 * e)).collect();

    let amat = sys.constraint_matrix(q0);
    let lambda = if m == 0 {
        Vec::new()
    } else {
        // D = ∂/∂q (A(q) v + b(q)) · v.
        let c_at = |s: f64| {
            let q: Vec<f64> = q0.iter().zip(&v).map(|(q, vi)| q + s * vi).collect();
            dae.constraint(&q, &v)
        };
        let (cp, cm) = (c_at(e), c_at(-e));
        let d: Vec<f64> = (0..m).map(|i| (cp[i] - cm[i]) / (2.0 * e)).collect();

        let rhs_v: Vec<f64> = (0..n).map(|i| f[i] - p_drift[i]).collect();
        let w = solve(&pv, &rhs_v)?;
        let aw = amat.mul_vec(&w);
        // Columns of P_v⁻¹ Aᵀ.
        let mut s_data = vec![0.0; m * m];
        for k in 0..m {
            let col: Vec<f64> = (0..n).map(|i| amat[(k, i)]).collect();
            let u = solve(&pv, &col)?;
            let au = amat.mul_vec(&u);
            for i in 0..m {
                s_data[i * m + k] = au[i];
            }
        }
        let s = Matrix::from_row_major(m, m, s_data);
        let rhs: Vec<f64> = (0..m).map(|i| -d[i] - aw[i]).collect();
        solve(&s, &rhs)?
    };

    let reaction = amat.transpose_mul_vec(&lambda);
    let pdot: Vec<f64> = (0..n).map(|i| f[i] + reaction[i]).collect();
    let vdot_rhs: Vec<f64> = (0..n).map(|i| pdot[i] - p_drift[i]).collect();
    let vdot = if n > 0 { solve(&pv, &vdot_rhs)? } else { Vec::new() };

    let mut y0 = Vec::with_capacity(dae.dim());
    y0.extend_from_slice(q0);
    y0.extend_from_slice(&v);
    y0.extend_from_slice(&g.dqdot);
    y0.push(z0);
    y0.extend_from_slice(&lambda);
    let mut yp0 = Vec::with_capacity(dae.dim());
    yp0.extend_from_slice(&v);
    yp0.extend_from_slice(&vdot);
    yp0.extend_from_slice(&pdot);
    yp0.push(zdot);
    yp0.extend(std::iter::repeat_n(0.0, m));

    let residual = norm_inf(&dae.residual(t0, &y0, &yp0)?);
    if residual > 1e-8 {
        return Err(Error::ConsistencyFailure { residual });
    }
    Ok((y0, yp0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub termination: Termination,
    pub newton_iterations: Vec<usize>,
}

/// Fixed-step BDF2 on `[t0, t_final]` with step `h_ref`; the first step is
/// backward Euler. A Newton failure ends the run and is recorded with its
/// time stamp.
pub fn implicit_dae_integrate(
    dae: &dyn ImplicitDae,
    y0: &[f64],
    _ydot0: &[f64],
    t_span: (f64, f64),
    h_ref: f64,
    solver: &NewtonConfig,
) -> Result<DaeTrajectory> {
    let (t0, t1) = t_span;
    if !(h_ref > 0.0) || !(t1 >= t0) {
        return Err(Error::InvalidConfig(format!("dae: h_ref {h_ref}, span ({t0}, {t1})")));
    }
    let steps = ((t1 - t0) / h_ref).round() as usize;
    let mut out = DaeTrajectory {
        times: vec![t0],
        states: vec![y0.to_vec()],
        termination: Termination::Completed,
        newton_iterations: Vec::new(),
    };
    let dim = dae.dim();
    for k in 1..=steps {
        let t = t0 + k as f64 * h_ref;
        let yn = out.states[k - 1].clone();
        let ynm1 = if k >= 2 { Some(out.states[k - 2].clone()) } else { None };
        let guess: Vec<f64> = match &ynm1 {
            Some(p) => (0..dim).map(|i| 2.0 * yn[i] - p[i]).collect(),
            None => yn.clone(),
        };
        let res = newton_solve(
            |y: &[f64]| {
                let ydot: Vec<f64> = match &ynm1 {
                    Some(p) => (0..dim).map(|i| (3.0 * y[i] - 4.0 * yn[i] + p[i]) / (2.0 * h_ref)).collect(),
                    None => (0..dim).map(|i| (y[i] - yn[i]) / h_ref).collect(),
                };
                dae.residual(t, y, &ydot)
            },
            &guess,
            solver,
        );
        match res {
            Ok(sol) => {
                out.times.push(t);
                out.states.push(sol.x);
                out.newton_iterations.push(sol.iterations);
            }
            Err(e) => {
                out.termination = Termination::SolverFailure {
                    step: k,
                    time: t,
                    message: e.to_string(),
                };
                break;
            }
        }
    }
    Ok(out)
}

/// Samples a DAE run of a constrained Herglotz system at `t_j = j h`
/// (every `stride`-th reference step) and packages it as a trajectory.
pub fn dae_to_trajectory(dae: &ContinuousConstrainedSystem<'_>, run: &DaeTrajectory, stride: usize) -> Trajectory {
    let sys = dae.system;
    let mut traj = Trajectory {
        times: Vec::new(),
        configurations: Vec::new(),
        velocities: Vec::new(),
        z_values: Vec::new(),
        multipliers: Vec::new(),
        energies: Vec::new(),
        termination: run.termination.clone(),
        newton_iterations: Vec::new(),
        constraint_residuals: Vec::new(),
    };
    let stride = stride.max(1);
    for (k, (t, y)) in run.times.iter().zip(&run.states).enumerate() {
        if k % stride != 0 {
            continue;
        }
        let q = dae.q(y).to_vec();
        let v = dae.v(y).to_vec();
        traj.times.push(*t);
        traj.energies.push(sys.energy(&q, &v));
        traj.constraint_residuals.push(norm_inf(&dae.constraint(&q, &v)));
        traj.z_values.push(dae.z(y));
        traj.multipliers.push(dae.lambda(y).to_vec());
        traj.configurations.push(q);
        traj.velocities.push(v);
    }
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FnSystem, LagrangianGradient};

    /// `x' = -x + s`, `0 = s - e^{-2t}`, solved by
    /// `x(t) = (x0 + 1) e^{-t} - e^{-2t}`.
    struct LinearDae;

    impl ImplicitDae for LinearDae {
        fn dim(&self) -> usize {
            2
        }
        fn residual(&self, t: f64, y: &[f64], yp: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![yp[0] + y[0] - y[1], y[1] - (-2.0 * t).exp()])
        }
        fn differential_rows(&self) -> Vec<bool> {
            vec![true, false]
        }
    }

    fn linear_error(h: f64) -> f64 {
        let x0 = 0.5;
        let run = implicit_dae_integrate(
            &LinearDae,
            &[x0, 1.0],
            &[0.5, -2.0],
            (0.0, 2.0),
            h,
            &NewtonConfig::default().with_tolerance(1e-13),
        )
        .unwrap();
        let exact = (x0 + 1.0) * (-2.0f64).exp() - (-4.0f64).exp();
        (run.states.last().unwrap()[0] - exact).abs()
    }

    #[test]
    fn bdf2_second_order_on_linear_dae() {
        let e1 = linear_error(0.02);
        let e2 = linear_error(0.01);
        let rate = (e1 / e2).log2();
        assert!((1.7..=2.3).contains(&rate), "rate {rate}");
    }

    #[test]
    fn algebraic_row_satisfied_every_step() {
        let run = implicit_dae_integrate(
            &LinearDae,
            &[0.5, 1.0],
            &[0.5, -2.0],
            (0.0, 1.0),
            0.05,
            &NewtonConfig::default().with_tolerance(1e-12),
        )
        .unwrap();
        for (t, y) in run.times.iter().zip(&run.states) {
            assert!((y[1] - (-2.0 * t).exp()).abs() < 1e-12);
        }
    }

    fn oscillator() -> FnSystem {
        FnSystem::new(1, |_, q, v, z| 0.5 * v[0] * v[0] - 0.5 * q[0] * q[0] - 0.1 * z).with_gradient(|_, q, v, _| {
            LagrangianGradient {
                dq: vec![-q[0]],
                dqdot: vec![v[0]],
                dz: -0.1,
            }
        })
    }

    #[test]
    fn consistent_init_unconstrained() {
        let sys = oscillator();
        let dae = ContinuousConstrainedSystem::new(&sys);
        let (y0, yp0) = consistent_init(&dae, 0.0, &[1.0], &[0.0], &[true]).unwrap();
        assert_eq!(y0, vec![1.0, 0.0, 0.0, 0.0]);
        assert!((yp0[1] + 1.0).abs() < 1e-9);
        assert!(norm_inf(&dae.residual(0.0, &y0, &yp0).unwrap()) < 1e-10);
    }

    #[test]
    fn mass_pattern() {
        let sys = oscillator();
        let dae = ContinuousConstrainedSystem::new(&sys);
        assert_eq!(dae.differential_rows(), vec![true, true, false, true]);
    }
}
