//! Adaptive Runge–Kutta–Fehlberg 4(5) with cubic Hermite dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkfConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; `None` picks `1e-3 · span`.
    pub h_init: Option<f64>,
    /// Upper bound on the step; `None` means the full span.
    pub h_max: Option<f64>,
}

impl RkfConfig {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            h_init: None,
            h_max: None,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = Some(h_max);
        self
    }
}

/// Accepted step nodes with derivatives, sufficient for Hermite
/// interpolation anywhere inside the span.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
    pub rejected_steps: usize,
}

impl DenseTrajectory {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    /// Cubic Hermite interpolation; `t` is clamped to the covered span.
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        hermite(
            self.times[k],
            self.times[k + 1],
            &self.states[k],
            &self.states[k + 1],
            &self.derivatives[k],
            &self.derivatives[k + 1],
            t,
        )
    }

    pub fn sample_many(&self, ts: &[f64]) -> Vec<Vec<f64>> {
        ts.iter().map(|&t| self.sample(t)).collect()
    }
}

/// Cubic Hermite interpolant through `(t0, y0, f0)` and `(t1, y1, f1)`.
pub fn hermite(t0: f64, t1: f64, y0: &[f64], y1: &[f64], f0: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

const C: [f64; 6] = [0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5];
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];

/// Integrates `ẏ = f(t, y)` over `t_span`, propagating the fifth-order
/// solution (local extrapolation).
pub fn rkf45_integrate<F>(ode: F, y0: &[f64], t_span: (f64, f64), config: &RkfConfig) -> Result<DenseTrajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let (t0, t1) = t_span;
    let span = t1 - t0;
    if !(span >= 0.0) || !(config.rel_tol > 0.0) || !(config.abs_tol >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rkf45: span {span}, rel_tol {}, abs_tol {}",
            config.rel_tol, config.abs_tol
        )));
    }
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = ode(t, &y);
    let mut out = DenseTrajectory {
        times: vec![t0],
        states: vec![y.clone()],
        derivatives: vec![f.clone()],
        rejected_steps: 0,
    };
    if span == 0.0 {
        return Ok(out);
    }
    let h_min = 1e-12 * span;
    let h_max = config.h_max.unwrap_or(span).min(span);
    let mut h = config.h_init.unwrap_or(1e-3 * span).min(h_max);
    let mut k = vec![vec![0.0; dim]; 6];
    let mut stage = vec![0.0; dim];

    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        k[0].clone_from(&f);
        for s in 1..6 {
            for i in 0..dim {
                stage[i] = y[i] + h * (0..s).map(|r| A[s][r] * k[r][i]).sum::<f64>();
            }
            k[s] = ode(t + C[s] * h, &stage);
        }
        let mut err = 0.0_f64;
        let mut y_new = vec![0.0; dim];
        for i in 0..dim {
            let y4 = y[i] + h * (0..6).map(|s| B4[s] * k[s][i]).sum::<f64>();
            let y5 = y[i] + h * (0..6).map(|s| B5[s] * k[s][i]).sum::<f64>();
            y_new[i] = y5;
            let scale = config.abs_tol + config.rel_tol * y[i].abs().max(y5.abs());
            err = err.max((y5 - y4).abs() / scale);
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            f = ode(t, &y);
            out.times.push(t);
            out.states.push(y.clone());
            out.derivatives.push(f.clone());
        } else {
            out.rejected_steps += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(h_max);
        if h < h_min && t < t1 {
            return Err(Error::StepSizeUnderflow { t, h });
        }
    }
    Ok(out)
}
