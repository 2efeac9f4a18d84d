//! Post-processing metrics for trajectories.

use crate::error::{Error, Result};
use crate::model::Trajectory;

/// Velocities from configurations on a uniform grid: central differences
/// in the interior, second-order one-sided differences at the ends.
pub fn reconstruct_velocities(configs: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let len = configs.len();
    let Some(first) = configs.first() else {
        return Vec::new();
    };
    let n = first.len();
    match len {
        1 => vec![vec![0.0; n]],
        2 => {
            let v: Vec<f64> = (0..n).map(|i| (configs[1][i] - configs[0][i]) / h).collect();
            vec![v.clone(), v]
        }
        _ => (0..len)
            .map(|j| {
                (0..n)
                    .map(|i| {
                        if j == 0 {
                            (-3.0 * configs[0][i] + 4.0 * configs[1][i] - configs[2][i]) / (2.0 * h)
                        } else if j == len - 1 {
                            (3.0 * configs[j][i] - 4.0 * configs[j - 1][i] + configs[j - 2][i]) / (2.0 * h)
                        } else {
                            (configs[j + 1][i] - configs[j - 1][i]) / (2.0 * h)
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ErrorSeries {
    pub fn max(&self) -> f64 {
        self.errors.iter().fold(0.0_f64, |m, e| m.max(*e))
    }

    pub fn last(&self) -> Option<f64> {
        self.errors.last().copied()
    }
}

/// `‖q_j - q_ref(t_j)‖₂` over the common prefix of two trajectories on the
/// same grid. A shorter trajectory (early termination) truncates the
/// series; differing sample times are an error.
pub fn trajectory_error(traj: &Trajectory, reference: &Trajectory) -> Result<ErrorSeries> {
    if traj.dim_q() != reference.dim_q() && !traj.is_empty() && !reference.is_empty() {
        return Err(Error::GridMismatch(format!(
            "dimension {} vs {}",
            traj.dim_q(),
            reference.dim_q()
        )));
    }
    let len = traj.len().min(reference.len());
    let mut out = ErrorSeries {
        times: Vec::with_capacity(len),
        errors: Vec::with_capacity(len),
    };
    for j in 0..len {
        let (t, tr) = (traj.times[j], reference.times[j]);
        if (t - tr).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::GridMismatch(format!("sample {j}: t = {t} vs {tr}")));
        }
        let e = traj.configurations[j]
            .iter()
            .zip(&reference.configurations[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        out.times.push(t);
        out.errors.push(e);
    }
    Ok(out)
}

/// Orientation of the principal axis of planar points, in `(-π/2, π/2]`,
/// from the second-moment matrix about the origin.
pub fn principal_axis_angle(points: &[[f64; 2]], index: usize) -> Result<f64> {
    let k = points.len().max(1) as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        sxx += p[0] * p[0];
        syy += p[1] * p[1];
        sxy += p[0] * p[1];
    }
    let (sxx, syy, sxy) = (sxx / k, syy / k, sxy / k);
    let gap = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    if !(gap >= 1e-12) {
        return Err(Error::DegenerateWindow { index });
    }
    let mut a = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if a <= -std::f64::consts::FRAC_PI_2 {
        a += std::f64::consts::PI;
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneAngleSeries {
    /// Centre time of each window.
    pub times: Vec<f64>,
    /// Unwrapped angles (rad).
    pub angles: Vec<f64>,
}

impl PlaneAngleSeries {
    pub fn total_rotation(&self) -> f64 {
        match (self.angles.first(), self.angles.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Rotation rate from the end points, extrapolated over `duration`.
    pub fn rotation_over(&self, duration: f64) -> f64 {
        let n = self.times.len();
        if n < 2 {
            return 0.0;
        }
        self.total_rotation() * duration / (self.times[n - 1] - self.times[0])
    }

    /// Consecutive differences of the angle series.
    pub fn increments(&self) -> Vec<f64> {
        self.angles.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Largest `|increment|` divided by the median `|increment|`.
    pub fn max_jump_ratio(&self) -> f64 {
        let mut inc: Vec<f64> = self.increments().iter().map(|d| d.abs()).collect();
        if inc.is_empty() {
            return 0.0;
        }
        let max = inc.iter().fold(0.0_f64, |m, d| m.max(*d));
        inc.sort_by(f64::total_cmp);
        let mid = inc.len() / 2;
        let median = if inc.len().is_multiple_of(2) {
            0.5 * (inc[mid - 1] + inc[mid])
        } else {
            inc[mid]
        };
        if median == 0.0 {
            if max == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            max / median
        }
    }
}

/// Sliding-window principal-axis angle of the first two coordinates.
/// Windows span `window_seconds` and advance by half a window; the series
/// is unwrapped modulo π assuming less than π/2 rotation per stride.
pub fn oscillation_plane_angle(times: &[f64], configs: &[Vec<f64>], window_seconds: f64) -> Result<PlaneAngleSeries> {
    if times.len() != configs.len() {
        return Err(Error::GridMismatch(format!("{} times vs {} samples", times.len(), configs.len())));
    }
    let mut out = PlaneAngleSeries {
        times: Vec::new(),
        angles: Vec::new(),
    };
    if times.len() < 2 {
        return Ok(out);
    }
    let dt = times[1] - times[0];
    let width = ((window_seconds / dt).round() as usize).max(2);
    let stride = (width / 2).max(1);
    let points: Vec<[f64; 2]> = configs.iter().map(|q| [q[0], q[1]]).collect();
    let mut start = 0;
    let mut index = 0;
    while start + width <= points.len() {
        let raw = principal_axis_angle(&points[start..start + width], index)?;
        let angle = match out.angles.last() {
            Some(&prev) => raw + std::f64::consts::PI * ((prev - raw) / std::f64::consts::PI).round(),
            None => raw,
        };
        out.times.push(0.5 * (times[start] + times[start + width - 1]));
        out.angles.push(angle);
        start += stride;
        index += 1;
    }
    Ok(out)
}

/// Least-squares slope of `log e` against `log h`.
pub fn convergence_order(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig("convergence_order needs at least two samples".into()));
    }
    if samples.iter().any(|&(h, e)| !(h > 0.0) || !(e > 0.0) || !h.is_finite() || !e.is_finite()) {
        return Err(Error::InvalidConfig("convergence_order needs positive finite (h, e)".into()));
    }
    let k = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("convergence_order needs distinct step sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Means over consecutive non-overlapping blocks of `block` samples, with
/// the centre time of each block. A trailing partial block is dropped.
pub fn block_average(times: &[f64], values: &[f64], block: usize) -> Vec<(f64, f64)> {
    let block = block.max(1);
    times
        .chunks_exact(block)
        .zip(values.chunks_exact(block))
        .map(|(t, v)| (0.5 * (t[0] + t[block - 1]), v.iter().sum::<f64>() / block as f64))
        .collect()
}

/// Mean over the final `block` samples.
pub fn tail_average(values: &[f64], block: usize) -> f64 {
    let block = block.clamp(1, values.len().max(1));
    let tail = &values[values.len().saturating_sub(block)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

/// `max_j |E_j - E_0| / |E_0|`.
pub fn relative_energy_drift(energies: &[f64]) -> f64 {
    let Some(&e0) = energies.first() else {
        return 0.0;
    };
    energies.iter().fold(0.0_f64, |m, e| m.max((e - e0).abs())) / e0.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Termination;

    fn traj(times: Vec<f64>, configs: Vec<Vec<f64>>) -> Trajectory {
        Trajectory {
            times,
            configurations: configs,
            velocities: Vec::new(),
            z_values: Vec::new(),
            multipliers: Vec::new(),
            energies: Vec::new(),
            termination: Termination::Completed,
            newton_iterations: Vec::new(),
            constraint_residuals: Vec::new(),
        }
    }

    #[test]
    fn velocities_of_linear_motion() {
        let q: Vec<Vec<f64>> = (0..6).map(|j| vec![2.0 + 3.0 * j as f64 * 0.1]).collect();
        for v in reconstruct_velocities(&q, 0.1) {
            assert!((v[0] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn velocities_of_quadratic_interior_exact() {
        let q: Vec<Vec<f64>> = (0..5).map(|j| vec![(j * j) as f64]).collect();
        let v = reconstruct_velocities(&q, 1.0);
        for (j, vj) in v.iter().enumerate() {
            assert!((vj[0] - 2.0 * j as f64).abs() < 1e-12, "j = {j}");
        }
    }

    #[test]
    fn velocity_error_quarter_on_refinement() {
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let q: Vec<Vec<f64>> = (0..=n).map(|j| vec![(j as f64 * h).sin()]).collect();
            reconstruct_velocities(&q, h)
                .iter()
                .enumerate()
                .map(|(j, v)| (v[0] - (j as f64 * h).cos()).abs())
                .fold(0.0, f64::max)
        };
        let r = err(0.02) / err(0.01);
        assert!((3.5..4.5).contains(&r), "ratio {r}");
    }

    #[test]
    fn error_of_identical_and_offset() {
        let a = traj(vec![0.0, 1.0], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(trajectory_error(&a, &a).unwrap().errors, vec![0.0, 0.0]);
        let b = traj(vec![0.0, 1.0], vec![vec![1.0, 2.5], vec![3.0, 4.5]]);
        assert_eq!(trajectory_error(&a, &b).unwrap().errors, vec![0.5, 0.5]);
        let c = traj(vec![0.0, 1.5], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(matches!(trajectory_error(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn axis_angles() {
        let xs: Vec<[f64; 2]> = (-5..=5).map(|i| [i as f64, 0.0]).collect();
        assert!(principal_axis_angle(&xs, 0).unwrap().abs() < 1e-15);
        let ys: Vec<[f64; 2]> = (-5..=5).map(|i| [0.0, i as f64]).collect();
        assert!((principal_axis_angle(&ys, 0).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let circle: Vec<[f64; 2]> = (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::FRAC_PI_4;
                [a.cos(), a.sin()]
            })
            .collect();
        assert!(matches!(principal_axis_angle(&circle, 3), Err(Error::DegenerateWindow { index: 3 })));
    }

    #[test]
    fn plane_angle_tracks_linear_rotation() {
        let h = 0.01;
        let rate = -0.02;
        let times: Vec<f64> = (0..20000).map(|j| j as f64 * h).collect();
        let configs: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| {
                let s = (3.0 * t).cos();
                let a = rate * t + 1.5;
                vec![s * a.cos(), s * a.sin()]
            })
            .collect();
        let series = oscillation_plane_angle(&times, &configs, 4.0).unwrap();
        let got = series.rotation_over(200.0);
        assert!((got - rate * 200.0).abs() < 0.02 * (rate * 200.0f64).abs(), "{got}");
        assert!(series.max_jump_ratio() < 3.0);
    }

    #[test]
    fn orders_of_power_laws() {
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let p1: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 3.0 * h)).collect();
        let p2: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 0.5 * h * h)).collect();
        assert!((convergence_order(&p1).unwrap() - 1.0).abs() < 1e-10);
        assert!((convergence_order(&p2).unwrap() - 2.0).abs() < 1e-10);
        assert!(convergence_order(&[(0.1, 1.0)]).is_err());
    }

    #[test]
    fn averages() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let v = [1.0, 3.0, 5.0, 7.0, 9.0];
        assert_eq!(block_average(&t, &v, 2), vec![(0.5, 2.0), (2.5, 6.0)]);
        assert_eq!(tail_average(&v, 2), 8.0);
        assert_eq!(relative_energy_drift(&[2.0, 2.5, 1.0]), 0.5);
    }
}
