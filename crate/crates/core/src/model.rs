//! Domain model shared by every integrator: contact-type systems, the
//! discretization map, discrete Lagrangians and their partial derivatives,
//! and the trajectory container.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Gradient of a contact-type Lagrangian `L(t, q, q̇, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianGradient {
    pub dq: Vec<f64>,
    pub dqdot: Vec<f64>,
    pub dz: f64,
}

/// A mechanical system with a contact-type Lagrangian and velocity
/// constraints `A(q) q̇ + b(q) = 0`.
///
/// Implementations must be reentrant; integrators share them across threads.
pub trait ContactSystem: Send + Sync {
    /// Number of configuration coordinates `n`.
    fn dim_q(&self) -> usize;

    /// Number of velocity constraints `m`.
    fn dim_c(&self) -> usize;

    fn lagrangian(&self, t: f64, q: &[f64], qdot: &[f64], z: f64) -> f64;

    /// The `m × n` constraint matrix `A(q)`.
    fn constraint_matrix(&self, q: &[f64]) -> Matrix;

    /// Affine part `b(q)` of the constraint. Zero for linear constraints.
    fn constraint_drift(&self, _q: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim_c()]
    }

    /// External force covector used by the Lagrange–d'Alembert formulation.
    fn external_force(&self, _t: f64, _q: &[f64], _qdot: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim_q()]
    }

    /// Mechanical energy `K + V`.
    fn energy(&self, q: &[f64], qdot: &[f64]) -> f64;

    fn dissipation_alpha(&self) -> f64;

    /// Analytic gradient of the Lagrangian, if the system provides one.
    /// Without it every derivative falls back to central differences.
    fn analytic_gradient(&self, _t: f64, _q: &[f64], _qdot: &[f64], _z: f64) -> Option<LagrangianGradient> {
        None
    }
}

/// Central-difference probe for a component of magnitude `x`.
pub fn fd_probe(x: f64) -> f64 {
    f64::EPSILON.sqrt() * x.abs().max(1.0)
}

/// Gradient of `L`, analytic when available.
pub fn lagrangian_gradient(
    system: &dyn ContactSystem,
    t: f64,
    q: &[f64],
    qdot: &[f64],
    z: f64,
) -> Result<LagrangianGradient> {
    let g = match system.analytic_gradient(t, q, qdot, z) {
        Some(g) => g,
        None => fd_lagrangian_gradient(system, t, q, qdot, z),
    };
    Error::check_all_finite("lagrangian gradient", &g.dq, q)?;
    Error::check_all_finite("lagrangian gradient", &g.dqdot, qdot)?;
    Error::check_finite("lagrangian gradient", g.dz, &[z])?;
    Ok(g)
}

fn fd_lagrangian_gradient(system: &dyn ContactSystem, t: f64, q: &[f64], qdot: &[f64], z: f64) -> LagrangianGradient {
    let n = q.len();
    let mut qp = q.to_vec();
    let mut vp = qdot.to_vec();
    let mut dq = vec![0.0; n];
    let mut dqdot = vec![0.0; n];
    for i in 0..n {
        let d = fd_probe(q[i]);
        qp[i] = q[i] + d;
        let fp = system.lagrangian(t, &qp, qdot, z);
        qp[i] = q[i] - d;
        let fm = system.lagrangian(t, &qp, qdot, z);
        qp[i] = q[i];
        dq[i] = (fp - fm) / (2.0 * d);

        let d = fd_probe(qdot[i]);
        vp[i] = qdot[i] + d;
        let fp = system.lagrangian(t, q, &vp, z);
        vp[i] = qdot[i] - d;
        let fm = system.lagrangian(t, q, &vp, z);
        vp[i] = qdot[i];
        dqdot[i] = (fp - fm) / (2.0 * d);
    }
    let d = fd_probe(z);
    let dz = (system.lagrangian(t, q, qdot, z + d) - system.lagrangian(t, q, qdot, z - d)) / (2.0 * d);
    LagrangianGradient { dq, dqdot, dz }
}

/// How the two configuration points are mapped to a tangent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionRule {
    /// `q_d = q`, time argument `t`.
    LeftEndpoint,
    /// `q_d = (q + q')/2`, time argument `t + h/2`.
    Midpoint,
}

/// Whether the discrete Lagrangian sees only `z_j` or both `z_j, z_{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZRule {
    FirstOrder,
    SecondOrder,
}

/// Quadrature applied on top of the discretization map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// `L_d = L ∘ Ψ`.
    Collocated,
    /// The velocity-dependent part `L(q, q̇, z) - L(q, 0, z)` is taken at
    /// `Ψ`; the velocity-free part `L(t, q, 0, z)` is averaged over the two
    /// endpoints, each at its own time.
    Trapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationRule {
    pub position_rule: PositionRule,
    pub z_rule: ZRule,
    pub quadrature: Quadrature,
    pub h: f64,
}

impl DiscretizationRule {
    pub fn new(position_rule: PositionRule, z_rule: ZRule, quadrature: Quadrature, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {h}")));
        }
        Ok(Self {
            position_rule,
            z_rule,
            quadrature,
            h,
        })
    }

    /// Left endpoint, first-order z, trapezoidal potential. This is the
    /// scheme whose equations are printed for the Foucault pendulum.
    pub fn left_first(h: f64) -> Result<Self> {
        Self::new(PositionRule::LeftEndpoint, ZRule::FirstOrder, Quadrature::Trapezoidal, h)
    }

    /// Midpoint, second-order z, trapezoidal potential. Matches the
    /// hand-eliminated falling-disk equations.
    pub fn mid_second(h: f64) -> Result<Self> {
        Self::new(PositionRule::Midpoint, ZRule::SecondOrder, Quadrature::Trapezoidal, h)
    }

    pub fn with_h(self, h: f64) -> Result<Self> {
        Self::new(self.position_rule, self.z_rule, self.quadrature, h)
    }

    /// `Ψ₁(q, q') = (q_d, q̇_d)`.
    pub fn tangent(&self, q: &[f64], q_next: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let qdot: Vec<f64> = q.iter().zip(q_next).map(|(a, b)| (b - a) / self.h).collect();
        let qd = match self.position_rule {
            PositionRule::LeftEndpoint => q.to_vec(),
            PositionRule::Midpoint => q.iter().zip(q_next).map(|(a, b)| 0.5 * (a + b)).collect(),
        };
        (qd, qdot)
    }

    /// `Ψ₂(z, z')`.
    pub fn z_point(&self, z: f64, z_next: f64) -> f64 {
        match self.z_rule {
            ZRule::FirstOrder => z,
            ZRule::SecondOrder => 0.5 * (z + z_next),
        }
    }

    pub fn eval_time(&self, t: f64) -> f64 {
        match self.position_rule {
            PositionRule::LeftEndpoint => t,
            PositionRule::Midpoint => t + 0.5 * self.h,
        }
    }

    /// Weights of `(q, q')` in `q_d`.
    fn position_weights(&self) -> (f64, f64) {
        match self.position_rule {
            PositionRule::LeftEndpoint => (1.0, 0.0),
            PositionRule::Midpoint => (0.5, 0.5),
        }
    }

    /// Weights of `(z, z')` in `z_d`.
    fn z_weights(&self) -> (f64, f64) {
        match self.z_rule {
            ZRule::FirstOrder => (1.0, 0.0),
            ZRule::SecondOrder => (0.5, 0.5),
        }
    }
}

/// Discrete Lagrangian `L_d(q, q', z, z')`, normalised so that
/// `z' - z = h L_d`.
pub fn evaluate_discrete_lagrangian(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    t: f64,
    q: &[f64],
    q_next: &[f64],
    z: f64,
    z_next: f64,
) -> Result<f64> {
    let (qd, vd) = rule.tangent(q, q_next);
    let zd = rule.z_point(z, z_next);
    let te = rule.eval_time(t);
    let value = match rule.quadrature {
        Quadrature::Collocated => system.lagrangian(te, &qd, &vd, zd),
        Quadrature::Trapezoidal => {
            let zero = vec![0.0; q.len()];
            let kinetic = system.lagrangian(te, &qd, &vd, zd) - system.lagrangian(te, &qd, &zero, zd);
            let left = system.lagrangian(t, q, &zero, zd);
            let right = system.lagrangian(t + rule.h, q_next, &zero, zd);
            kinetic + 0.5 * (left + right)
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        let mut inputs = vec![t];
        inputs.extend_from_slice(q);
        inputs.extend_from_slice(q_next);
        inputs.extend_from_slice(&[z, z_next]);
        Err(Error::Evaluation {
            context: "discrete lagrangian",
            inputs,
        })
    }
}

/// Partial derivatives of `L_d` with respect to its four arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePartials {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: f64,
    pub d4: f64,
}

/// Partials of `L_d`: chain rule on the analytic gradient when the system
/// has one, central differences on `L_d` otherwise.
pub fn partials_of_ld(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    t: f64,
    q: &[f64],
    q_next: &[f64],
    z: f64,
    z_next: f64,
) -> Result<DiscretePartials> {
    let (qd, vd) = rule.tangent(q, q_next);
    let zd = rule.z_point(z, z_next);
    let te = rule.eval_time(t);
    if system.analytic_gradient(te, &qd, &vd, zd).is_none() {
        return partials_of_ld_fd(system, rule, t, q, q_next, z, z_next);
    }

    let h = rule.h;
    let (w1, w2) = rule.position_weights();
    let (c1, c2) = rule.z_weights();
    let g = lagrangian_gradient(system, te, &qd, &vd, zd)?;
    let n = q.len();

    let (d1, d2, gz) = match rule.quadrature {
        Quadrature::Collocated => {
            let d1 = (0..n).map(|i| w1 * g.dq[i] - g.dqdot[i] / h).collect();
            let d2 = (0..n).map(|i| w2 * g.dq[i] + g.dqdot[i] / h).collect();
            (d1, d2, g.dz)
        }
        Quadrature::Trapezoidal => {
            let zero = vec![0.0; n];
            let g0 = lagrangian_gradient(system, te, &qd, &zero, zd)?;
            let ga = lagrangian_gradient(system, t, q, &zero, zd)?;
            let gb = lagrangian_gradient(system, t + h, q_next, &zero, zd)?;
            let d1 = (0..n)
                .map(|i| w1 * (g.dq[i] - g0.dq[i]) - g.dqdot[i] / h + 0.5 * ga.dq[i])
                .collect();
            let d2 = (0..n)
                .map(|i| w2 * (g.dq[i] - g0.dq[i]) + g.dqdot[i] / h + 0.5 * gb.dq[i])
                .collect();
            (d1, d2, g.dz - g0.dz + 0.5 * (ga.dz + gb.dz))
        }
    };

    Ok(DiscretePartials {
        d1,
        d2,
        d3: c1 * gz,
        d4: c2 * gz,
    })
}

/// Central-difference partials of `L_d`, ignoring any analytic gradient.
/// `d4` is exactly zero under [`ZRule::FirstOrder`].
pub fn partials_of_ld_fd(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    t: f64,
    q: &[f64],
    q_next: &[f64],
    z: f64,
    z_next: f64,
) -> Result<DiscretePartials> {
    partials_of_ld_fd_with(system, rule, t, q, q_next, z, z_next, &fd_probe)
}

/// As [`partials_of_ld_fd`] with a caller-chosen probe size.
#[allow(clippy::too_many_arguments)]
pub fn partials_of_ld_fd_with(
    system: &dyn ContactSystem,
    rule: &DiscretizationRule,
    t: f64,
    q: &[f64],
    q_next: &[f64],
    z: f64,
    z_next: f64,
    probe: &dyn Fn(f64) -> f64,
) -> Result<DiscretePartials> {
    let ld = |a: &[f64], b: &[f64], za: f64, zb: f64| evaluate_discrete_lagrangian(system, rule, t, a, b, za, zb);
    let n = q.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut qa = q.to_vec();
    let mut qb = q_next.to_vec();
    for i in 0..n {
        let d = probe(q[i]);
        qa[i] = q[i] + d;
        let fp = ld(&qa, q_next, z, z_next)?;
        qa[i] = q[i] - d;
        let fm = ld(&qa, q_next, z, z_next)?;
        qa[i] = q[i];
        d1[i] = (fp - fm) / (2.0 * d);

        let d = probe(q_next[i]);
        qb[i] = q_next[i] + d;
        let fp = ld(q, &qb, z, z_next)?;
        qb[i] = q_next[i] - d;
        let fm = ld(q, &qb, z, z_next)?;
        qb[i] = q_next[i];
        d2[i] = (fp - fm) / (2.0 * d);
    }
    let d = probe(z);
    let d3 = (ld(q, q_next, z + d, z_next)? - ld(q, q_next, z - d, z_next)?) / (2.0 * d);
    let d4 = match rule.z_rule {
        ZRule::FirstOrder => 0.0,
        ZRule::SecondOrder => {
            let d = probe(z_next);
            (ld(q, q_next, z, z_next + d)? - ld(q, q_next, z, z_next - d)?) / (2.0 * d)
        }
    };
    Error::check_all_finite("discrete partials", &d1, q)?;
    Error::check_all_finite("discrete partials", &d2, q_next)?;
    Error::check_all_finite("discrete partials", &[d3, d4], &[z, z_next])?;
    Ok(DiscretePartials { d1, d2, d3, d4 })
}

/// Discrete constraint `A(q_d) q̇_d + b(q_d)` at `Ψ₁(q, q')`.
pub fn discrete_constraint(system: &dyn ContactSystem, rule: &DiscretizationRule, q: &[f64], q_next: &[f64]) -> Vec<f64> {
    let (qd, vd) = rule.tangent(q, q_next);
    let a = system.constraint_matrix(&qd);
    let b = system.constraint_drift(&qd);
    a.mul_vec(&vd).iter().zip(&b).map(|(x, y)| x + y).collect()
}

/// The two-point window an implicit step is solved from.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub q_prev: Vec<f64>,
    pub q_curr: Vec<f64>,
    pub z_prev: f64,
    pub z_curr: f64,
    pub t_curr: f64,
    pub step_index: usize,
}

impl StepState {
    pub fn is_finite(&self) -> bool {
        self.q_prev.iter().chain(&self.q_curr).all(|v| v.is_finite())
            && self.z_prev.is_finite()
            && self.z_curr.is_finite()
            && self.t_curr.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    SolverFailure { step: usize, time: f64, message: String },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

/// A uniformly sampled discrete trajectory.
///
/// `multipliers[j]` is the multiplier enforced at node `q_j`; there is one
/// per accepted step, so `multipliers.len() == times.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub configurations: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub z_values: Vec<f64>,
    pub multipliers: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub termination: Termination,
    /// Newton iterations per accepted step.
    pub newton_iterations: Vec<usize>,
    /// `‖A_d(q_j, q_{j+1}) + b‖∞` per accepted step.
    pub constraint_residuals: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim_q(&self) -> usize {
        self.configurations.first().map_or(0, |q| q.len())
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn max_constraint_residual(&self) -> f64 {
        self.constraint_residuals.iter().fold(0.0_f64, |m, r| m.max(*r))
    }

    /// Fills velocities (finite differences) and energies from the
    /// stored configurations.
    pub fn finalize(&mut self, system: &dyn ContactSystem, h: f64) {
        self.velocities = crate::analysis::reconstruct_velocities(&self.configurations, h);
        self.energies = self
            .configurations
            .iter()
            .zip(&self.velocities)
            .map(|(q, v)| system.energy(q, v))
            .collect();
    }
}

type LagrangianFn = Box<dyn Fn(f64, &[f64], &[f64], f64) -> f64 + Send + Sync>;
type ConstraintFn = Box<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
type DriftFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ForceFn = Box<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type EnergyFn = Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type GradientFn = Box<dyn Fn(f64, &[f64], &[f64], f64) -> LagrangianGradient + Send + Sync>;

/// A [`ContactSystem`] assembled from closures.
pub struct FnSystem {
    dim_q: usize,
    dim_c: usize,
    alpha: f64,
    lagrangian: LagrangianFn,
    constraint: Option<ConstraintFn>,
    drift: Option<DriftFn>,
    force: Option<ForceFn>,
    energy: Option<EnergyFn>,
    gradient: Option<GradientFn>,
}

impl FnSystem {
    pub fn new(dim_q: usize, lagrangian: impl Fn(f64, &[f64], &[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim_q,
            dim_c: 0,
            alpha: 0.0,
            lagrangian: Box::new(lagrangian),
            constraint: None,
            drift: None,
            force: None,
            energy: None,
            gradient: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_constraints(mut self, dim_c: usize, a: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.dim_c = dim_c;
        self.constraint = Some(Box::new(a));
        self
    }

    pub fn with_drift(mut self, b: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.drift = Some(Box::new(b));
        self
    }

    pub fn with_force(mut self, f: impl Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.force = Some(Box::new(f));
        self
    }

    pub fn with_energy(mut self, e: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.energy = Some(Box::new(e));
        self
    }

    pub fn with_gradient(mut self, g: impl Fn(f64, &[f64], &[f64], f64) -> LagrangianGradient + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }
}

impl ContactSystem for FnSystem {
    fn dim_q(&self) -> usize {
        self.dim_q
    }

    fn dim_c(&self) -> usize {
        self.dim_c
    }

    fn lagrangian(&self, t: f64, q: &[f64], qdot: &[f64], z: f64) -> f64 {
        (self.lagrangian)(t, q, qdot, z)
    }

    fn constraint_matrix(&self, q: &[f64]) -> Matrix {
        match &self.constraint {
            Some(a) => a(q),
            None => Matrix::zeros(0, self.dim_q),
        }
    }

    fn constraint_drift(&self, q: &[f64]) -> Vec<f64> {
        match &self.drift {
            Some(b) => b(q),
            None => vec![0.0; self.dim_c],
        }
    }

    fn external_force(&self, t: f64, q: &[f64], qdot: &[f64]) -> Vec<f64> {
        match &self.force {
            Some(f) => f(t, q, qdot),
            None => vec![0.0; self.dim_q],
        }
    }

    fn energy(&self, q: &[f64], qdot: &[f64]) -> f64 {
        match &self.energy {
            Some(e) => e(q, qdot),
            None => {
                let zero = vec![0.0; self.dim_q];
                let v = -(self.lagrangian)(0.0, q, &zero, 0.0);
                let k = (self.lagrangian)(0.0, q, qdot, 0.0) + v;
                k + v
            }
        }
    }

    fn dissipation_alpha(&self) -> f64 {
        self.alpha
    }

    fn analytic_gradient(&self, t: f64, q: &[f64], qdot: &[f64], z: f64) -> Option<LagrangianGradient> {
        self.gradient.as_ref().map(|g| g(t, q, qdot, z))
    }
}
