//! Thin homogeneous disk rolling without slipping on a horizontal plane.
//!
//! Coordinates are `(X, Y, θ, φ, ψ)`: contact-point projection of the
//! centre, tilt from the vertical, heading, and spin.

use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::{ContactSystem, LagrangianGradient, StepState};
use crate::newton::{newton_solve, NewtonConfig};

/// Generalised force `F(t) = constant + rate · t`, ordered `(X, Y, θ, φ, ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Forcing {
    pub constant: [f64; 5],
    pub rate: [f64; 5],
}

impl Forcing {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn at(&self, t: f64) -> [f64; 5] {
        let mut f = [0.0; 5];
        for (i, fi) in f.iter_mut().enumerate() {
            *fi = self.constant[i] + self.rate[i] * t;
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskParams {
    pub m: f64,
    pub r: f64,
    pub i_a: f64,
    pub i_t: f64,
    pub g: f64,
    pub alpha: f64,
    pub forcing: Forcing,
}

impl DiskParams {
    /// `m = 5 kg`, `R = 0.5 m`, `I_A = ½ m R²`, `I_T = ¼ m R²`, `g = 9.81`.
    pub fn standard(alpha: f64, forcing: Forcing) -> Self {
        let m = 5.0;
        let r = 0.5;
        Self {
            m,
            r,
            i_a: 0.5 * m * r * r,
            i_t: 0.25 * m * r * r,
            g: 9.81,
            alpha,
            forcing,
        }
    }

    /// Circular-path spin rate as printed with the Experiment 4 figures.
    /// Under this Lagrangian's angle conventions it does not make `θ̈`
    /// vanish; see [`DiskParams::steady_spin_rate`].
    pub fn caption_spin_rate(&self, theta0: f64, phi_dot0: f64) -> f64 {
        let (m, r) = (self.m, self.r);
        ((self.i_t - self.i_a - m * r * r) * theta0.sin() * phi_dot0 * phi_dot0 - m * self.g * r)
            / ((self.i_a + m * r * r) * theta0.tan() * phi_dot0)
    }

    /// Spin rate for steady rolling at tilt `theta0` (from the vertical)
    /// and constant heading rate `phi_dot0`: the `θ` equation with
    /// `θ̇ = θ̈ = 0` and the rolling reactions substituted.
    pub fn steady_spin_rate(&self, theta0: f64, phi_dot0: f64) -> f64 {
        let (m, r) = (self.m, self.r);
        let j = self.i_a + m * r * r;
        (m * self.g * r * theta0.tan() + (j - self.i_t) * theta0.sin() * phi_dot0 * phi_dot0) / (j * phi_dot0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallingDisk {
    pub params: DiskParams,
}

pub fn disk_system(params: DiskParams) -> FallingDisk {
    FallingDisk { params }
}

impl FallingDisk {
    pub fn kinetic(&self, q: &[f64], v: &[f64]) -> f64 {
        let p = &self.params;
        let (s, c) = q[2].sin_cos();
        let spin = v[4] - v[3] * s;
        0.5 * p.m * (v[0] * v[0] + v[1] * v[1] + p.r * p.r * s * s * v[2] * v[2])
            + 0.5 * (p.i_a * spin * spin + p.i_t * (v[2] * v[2] + v[3] * v[3] * c * c))
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        self.params.m * self.params.g * self.params.r * q[2].cos()
    }
}

impl ContactSystem for FallingDisk {
    fn dim_q(&self) -> usize {
        5
    }

    fn dim_c(&self) -> usize {
        2
    }

    fn lagrangian(&self, t: f64, q: &[f64], qdot: &[f64], z: f64) -> f64 {
        let f = self.params.forcing.at(t);
        let work: f64 = f.iter().zip(q).map(|(a, b)| a * b).sum();
        self.kinetic(q, qdot) - self.potential(q) - self.params.alpha * z + work
    }

    fn constraint_matrix(&self, q: &[f64]) -> Matrix {
        let r = self.params.r;
        let (st, ct) = q[2].sin_cos();
        let (sp, cp) = q[3].sin_cos();
        Matrix::from_row_major(
            2,
            5,
            vec![
                1.0, 0.0, r * ct * sp, r * st * cp, -r * cp, //
                0.0, 1.0, -r * ct * cp, r * st * sp, -r * sp,
            ],
        )
    }

    fn energy(&self, q: &[f64], qdot: &[f64]) -> f64 {
        self.kinetic(q, qdot) + self.potential(q)
    }

    fn dissipation_alpha(&self) -> f64 {
        self.params.alpha
    }

    fn analytic_gradient(&self, t: f64, q: &[f64], v: &[f64], _z: f64) -> Option<LagrangianGradient> {
        let p = &self.params;
        let f = p.forcing.at(t);
        let (s, c) = q[2].sin_cos();
        let spin = v[4] - v[3] * s;
        let mr2 = p.m * p.r * p.r;
        let d_theta = mr2 * s * c * v[2] * v[2] - p.i_a * spin * v[3] * c - p.i_t * v[3] * v[3] * c * s
            + p.m * p.g * p.r * s;
        Some(LagrangianGradient {
            dq: vec![f[0], f[1], d_theta + f[2], f[3], f[4]],
            dqdot: vec![
                p.m * v[0],
                p.m * v[1],
                (mr2 * s * s + p.i_t) * v[2],
                -p.i_a * spin * s + p.i_t * v[3] * c * c,
                p.i_a * spin,
            ],
            dz: -p.alpha,
        })
    }
}

/// The five hand-eliminated equations of one midpoint / second-order step,
/// in the order: combined X/Y/ψ balance, the two discrete rolling
/// constraints, the θ balance and the φ balance. `t` is the time of `q_curr`
/// and the forcing is sampled there.
pub fn disk_appendix_residual(
    params: &DiskParams,
    h: f64,
    t: f64,
    q_prev: &[f64],
    q_curr: &[f64],
    q_next: &[f64],
) -> [f64; 5] {
    let DiskParams {
        m, r, i_a, i_t, g, alpha, ..
    } = *params;
    let [fx, fy, ft, fp, fs] = params.forcing.at(t);
    let (x0, x1, x2) = (q_prev[0], q_curr[0], q_next[0]);
    let (y0, y1, y2) = (q_prev[1], q_curr[1], q_next[1]);
    let (th0, th1, th2) = (q_prev[2], q_curr[2], q_next[2]);
    let (ph0, ph1, ph2) = (q_prev[3], q_curr[3], q_next[3]);
    let (ps0, ps1, ps2) = (q_prev[4], q_curr[4], q_next[4]);
    let h2 = h * h;

    let k = alpha * h / 2.0;
    let tm = 0.5 * (th1 + th2);
    let tp = 0.5 * (th0 + th1);
    let pm = 0.5 * (ph1 + ph2);

    let bal_x = fx / 2.0 - (1.0 / (k + 1.0)) * (fx / 2.0 - m * (x0 - x1) / h2) * (k - 1.0) + m * (x1 - x2) / h2;
    let bal_y = fy / 2.0 - (1.0 / (k + 1.0)) * (fy / 2.0 - m * (y0 - y1) / h2) * (k - 1.0) + m * (y1 - y2) / h2;
    let e1 = r * ph1.cos() * bal_x + r * ph1.sin() * bal_y
        - (1.0 / (k + 1.0)) * (k - 1.0) * (fs / 2.0 - (1.0 / h) * i_a * ((ps0 - ps1) / h - tp.sin() * (ph0 - ph1) / h))
        + (1.0 / h) * i_a * ((ps1 - ps2) / h - tm.sin() * (ph1 - ph2) / h)
        + fs / 2.0;

    let e2 = r * pm.cos() * (ps1 - ps2) / h - (x1 - x2) / h - r * pm.cos() * tm.sin() * (ph1 - ph2) / h
        - r * tm.cos() * pm.sin() * (th1 - th2) / h;

    let e3 = r * pm.sin() * (ps1 - ps2) / h - (y1 - y2) / h - r * pm.sin() * tm.sin() * (ph1 - ph2) / h
        + r * pm.cos() * tm.cos() * (th1 - th2) / h;

    let c = (alpha * h - 2.0) / (alpha * h + 2.0);
    let e4 = ft / m
        + (i_t / m) * (2.0 * (th1 - th2) / h2 - (th1 + th2).sin() / 2.0 * (ph1 - ph2).powi(2) / h2)
        + r * g * th1.sin()
        + r * r * (tm.sin().powi(2) * 2.0 * (th1 - th2) / h2 + (th1 + th2).sin() / 2.0 * (th1 - th2).powi(2) / h2)
        + c * ((i_t / m) * (2.0 * (th0 - th1) / h2 + (th0 + th1).sin() / 2.0 * (ph0 - ph1).powi(2) / h2)
            - ft / m
            - r * g * th1.sin()
            + r * r * (tp.sin().powi(2) * 2.0 * (th0 - th1) / h2 - (th0 + th1).sin() / 2.0 * (th0 - th1).powi(2) / h2)
            + i_a * (ph0 - ph1) / m * tp.cos() * ((ps0 - ps1) / h2 - tp.sin() * (ph0 - ph1) / h2))
        + 2.0 * r * ph1.cos() * th1.cos() * (fy / (2.0 * m) - c * (fy / (2.0 * m) - (y0 - y1) / h2) + (y1 - y2) / h2)
        - 2.0 * r * th1.cos() * ph1.sin() * (fx / (2.0 * m) - c * (fx / (2.0 * m) - (x0 - x1) / h2) + (x1 - x2) / h2)
        - i_a * (ph1 - ph2) / m * tm.cos() * ((ps1 - ps2) / h2 - tm.sin() * (ph1 - ph2) / h2);

    let e5 = fp / 2.0 + i_t * tm.cos().powi(2) * (ph1 - ph2) / h2
        - c * (fp / 2.0 - i_t * tp.cos().powi(2) * (ph0 - ph1) / h2
            + i_a * tp.sin() * ((ps0 - ps1) / h2 - tp.sin() * (ph0 - ph1) / h2))
        - r * ph1.cos() * th1.sin() * (fx / 2.0 - c * (fx / 2.0 - m * (x0 - x1) / h2) + m * (x1 - x2) / h2)
        - r * ph1.sin() * th1.sin() * (fy / 2.0 - c * (fy / 2.0 - m * (y0 - y1) / h2) + m * (y1 - y2) / h2)
        - i_a * tm.sin() * ((ps1 - ps2) / h2 - tm.sin() * (ph1 - ph2) / h2);

    [e1, e2, e3, e4, e5]
}

/// Solves the hand-eliminated equations for `q_{j+1}`.
pub fn disk_appendix_step(params: &DiskParams, h: f64, window: &StepState, solver: &NewtonConfig) -> Result<Vec<f64>> {
    let x0: Vec<f64> = window.q_curr.iter().zip(&window.q_prev).map(|(c, p)| 2.0 * c - p).collect();
    let sol = newton_solve(
        |x: &[f64]| Ok(disk_appendix_residual(params, h, window.t_curr, &window.q_prev, &window.q_curr, x).to_vec()),
        &x0,
        solver,
    )?;
    Ok(sol.x)
}

/// Iterates [`disk_appendix_step`] from a starting window.
pub fn simulate_disk_appendix(
    params: &DiskParams,
    h: f64,
    start: &StepState,
    steps: usize,
    solver: &NewtonConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![start.q_prev.clone(), start.q_curr.clone()];
    let mut w = start.clone();
    for _ in 0..steps {
        let next = disk_appendix_step(params, h, &w, solver)?;
        out.push(next.clone());
        w = StepState {
            q_prev: std::mem::take(&mut w.q_curr),
            q_curr: next,
            z_prev: 0.0,
            z_curr: 0.0,
            t_curr: w.t_curr + h,
            step_index: w.step_index + 1,
        };
    }
    Ok(out)
}
