//! Experiment definitions, the built-in catalog, and run dispatch.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::herglotz::{simulate_contact, SimulationSetup, StartMode};
use crate::la::{simulate_la, ForceSplit};
use crate::model::{ContactSystem, DiscretizationRule, PositionRule, Termination, Trajectory, ZRule};
use crate::newton::NewtonConfig;
use crate::reference::{
    consistent_init, dae_to_trajectory, foucault_reference, foucault_reference_on_grid, implicit_dae_integrate,
    ContinuousConstrainedSystem, RkfConfig,
};
use crate::systems::{
    disk_system, foucault_system, DampedOscillator, DiskParams, FoucaultFormulation, FoucaultParams, Forcing,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemSpec {
    Foucault(FoucaultParams),
    Disk(DiskParams),
    Oscillator(DampedOscillator),
}

impl SystemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Foucault(_) => "foucault",
            SystemSpec::Disk(_) => "disk",
            SystemSpec::Oscillator(_) => "oscillator",
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            SystemSpec::Foucault(p) => p.alpha,
            SystemSpec::Disk(p) => p.alpha,
            SystemSpec::Oscillator(o) => o.alpha,
        }
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        match self {
            SystemSpec::Foucault(p) => p.alpha = alpha,
            SystemSpec::Disk(p) => p.alpha = alpha,
            SystemSpec::Oscillator(o) => o.alpha = alpha,
        }
    }

    /// The system as seen by the given integrator.
    pub fn build(&self, integrator: IntegratorKind) -> Box<dyn ContactSystem> {
        match *self {
            SystemSpec::Foucault(p) => {
                let formulation = match integrator {
                    IntegratorKind::LagrangeDAlembert => FoucaultFormulation::LagrangeDAlembert,
                    _ => FoucaultFormulation::Herglotz,
                };
                Box::new(foucault_system(p, formulation))
            }
            SystemSpec::Disk(p) => Box::new(disk_system(p)),
            SystemSpec::Oscillator(o) => Box::new(o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorKind {
    Contact,
    LagrangeDAlembert,
    Rkf45Reference,
    ImplicitDaeReference,
}

impl IntegratorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "contact" => Ok(Self::Contact),
            "la" => Ok(Self::LagrangeDAlembert),
            "rkf45" => Ok(Self::Rkf45Reference),
            "dae" | "implicit-dae" => Ok(Self::ImplicitDaeReference),
            other => Err(Error::InvalidConfig(format!(
                "unknown integrator '{other}' (expected contact, la, rkf45, dae)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Contact => "contact",
            Self::LagrangeDAlembert => "la",
            Self::Rkf45Reference => "rkf45",
            Self::ImplicitDaeReference => "dae",
        }
    }
}

pub fn parse_rule(s: &str, h: f64) -> Result<DiscretizationRule> {
    match s {
        "left-first" => DiscretizationRule::left_first(h),
        "mid-second" => DiscretizationRule::mid_second(h),
        other => Err(Error::InvalidConfig(format!(
            "unknown rule '{other}' (expected left-first, mid-second)"
        ))),
    }
}

pub fn rule_name(rule: &DiscretizationRule) -> &'static str {
    match (rule.position_rule, rule.z_rule) {
        (PositionRule::LeftEndpoint, ZRule::FirstOrder) => "left-first",
        (PositionRule::Midpoint, ZRule::SecondOrder) => "mid-second",
        (PositionRule::LeftEndpoint, ZRule::SecondOrder) => "left-second",
        (PositionRule::Midpoint, ZRule::FirstOrder) => "mid-first",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub description: String,
    pub system: SystemSpec,
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
    /// Velocity components the initial projection may adjust (`None`: all).
    pub velocity_free: Option<Vec<bool>>,
    pub t_final: f64,
    pub integrator: IntegratorKind,
    pub rule: DiscretizationRule,
    pub newton: NewtonConfig,
    pub start: StartMode,
    pub force_split: ForceSplit,
    /// Relative tolerance of the RKF45 reference.
    pub reference_tol: f64,
    /// Ratio `h / h_ref` for the implicit DAE reference.
    pub dae_refinement: usize,
}

impl ExperimentSpec {
    pub fn h(&self) -> f64 {
        self.rule.h
    }

    pub fn alpha(&self) -> f64 {
        self.system.alpha()
    }

    pub fn steps(&self) -> usize {
        self.setup().steps()
    }

    pub fn setup(&self) -> SimulationSetup {
        SimulationSetup {
            rule: self.rule,
            q0: self.q0.clone(),
            v0: self.v0.clone(),
            velocity_free: self.velocity_free.clone(),
            t0: 0.0,
            t_final: self.t_final,
            newton: self.newton,
            start: self.start,
        }
    }

    /// The classical reference run paired with this experiment.
    pub fn reference_integrator(&self) -> IntegratorKind {
        match self.system {
            SystemSpec::Foucault(_) => IntegratorKind::Rkf45Reference,
            _ => IntegratorKind::ImplicitDaeReference,
        }
    }

    pub fn with_integrator(mut self, integrator: IntegratorKind) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = match self.system {
            SystemSpec::Foucault(p) => {
                if !(p.m > 0.0 && p.l > 0.0) {
                    return Err(Error::InvalidConfig("foucault: m and l must be positive".into()));
                }
                2
            }
            SystemSpec::Disk(p) => {
                if !(p.m > 0.0 && p.r > 0.0 && p.i_a > 0.0 && p.i_t > 0.0) {
                    return Err(Error::InvalidConfig("disk: m, R, I_A, I_T must be positive".into()));
                }
                5
            }
            SystemSpec::Oscillator(_) => 1,
        };
        if self.q0.len() != n || self.v0.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{}: q0 and v0 need {n} components",
                self.system.name()
            )));
        }
        if let Some(mask) = &self.velocity_free {
            if mask.len() != n {
                return Err(Error::InvalidConfig("velocity_free mask has wrong length".into()));
            }
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidConfig(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if self.dae_refinement == 0 {
            return Err(Error::InvalidConfig("dae_refinement must be at least 1".into()));
        }
        self.newton.validate()
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let real = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("{key}: expected a number, got '{v}'")))
        };
        let list = |v: &str| -> Result<Vec<f64>> { v.split(',').map(real).collect() };
        let vec5 = |v: &str| -> Result<[f64; 5]> {
            let xs = list(v)?;
            xs.try_into()
                .map_err(|_| Error::InvalidConfig(format!("{key}: expected 5 comma-separated numbers")))
        };
        let system_name = self.system.name();
        let wrong_system = || Error::InvalidConfig(format!("{key} does not apply to the {system_name} system"));
        match key.trim() {
            "alpha" => self.system.set_alpha(real(value)?),
            "h" => self.rule = self.rule.with_h(real(value)?)?,
            "t_final" | "t-final" => self.t_final = real(value)?,
            "integrator" => self.integrator = IntegratorKind::parse(value.trim())?,
            "rule" => self.rule = parse_rule(value.trim(), self.rule.h)?,
            "q0" => self.q0 = list(value)?,
            "v0" => self.v0 = list(value)?,
            "newton_tol" => self.newton.tolerance = real(value)?,
            "newton_max_iter" => {
                self.newton.max_iterations = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{key}: expected an integer")))?
            }
            "start" => {
                self.start = match value.trim() {
                    "euler" => StartMode::Euler,
                    "momentum" => StartMode::MomentumMatching,
                    other => return Err(Error::InvalidConfig(format!("start: unknown mode '{other}'"))),
                }
            }
            "force_split" => {
                self.force_split = match value.trim() {
                    "left" => ForceSplit::AllLeft,
                    "right" => ForceSplit::AllRight,
                    "half" => ForceSplit::HalfHalf,
                    other => return Err(Error::InvalidConfig(format!("force_split: unknown split '{other}'"))),
                }
            }
            "reference_tol" => self.reference_tol = real(value)?,
            "dae_refinement" => {
                self.dae_refinement = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{key}: expected an integer")))?
            }
            k @ ("m" | "g") => {
                let x = real(value)?;
                match &mut self.system {
                    SystemSpec::Foucault(p) if k == "m" => p.m = x,
                    SystemSpec::Foucault(p) => p.g = x,
                    SystemSpec::Disk(p) if k == "m" => p.m = x,
                    SystemSpec::Disk(p) => p.g = x,
                    SystemSpec::Oscillator(_) => return Err(wrong_system()),
                }
            }
            k @ ("l" | "beta" | "omega") => {
                let x = real(value)?;
                let SystemSpec::Foucault(p) = &mut self.system else {
                    return Err(wrong_system());
                };
                match k {
                    "l" => p.l = x,
                    "beta" => p.beta = x,
                    _ => p.omega = x,
                }
            }
            k @ ("R" | "r" | "i_a" | "i_t" | "forcing_constant" | "forcing_rate") => {
                let SystemSpec::Disk(p) = &mut self.system else {
                    return Err(wrong_system());
                };
                match k {
                    "R" | "r" => p.r = real(value)?,
                    "i_a" => p.i_a = real(value)?,
                    "i_t" => p.i_t = real(value)?,
                    "forcing_constant" => p.forcing.constant = vec5(value)?,
                    _ => p.forcing.rate = vec5(value)?,
                }
            }
            "frequency" => {
                let SystemSpec::Oscillator(o) = &mut self.system else {
                    return Err(wrong_system());
                };
                o.omega = real(value)?;
            }
            other => return Err(Error::InvalidConfig(format!("unknown override key '{other}'"))),
        }
        Ok(())
    }
}

/// Parses a flat `key=value` text (blank lines and `#` comments ignored).
pub fn parse_overrides(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_pair(line).map_err(|_| Error::InvalidConfig(format!("line {}: expected key=value", i + 1)))?);
    }
    Ok(out)
}

pub fn parse_pair(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::InvalidConfig(format!("expected key=value, got '{s}'"))),
    }
}

const FOUCAULT_H: f64 = 0.05;
const FOUCAULT_T: f64 = 3600.0;
const DISK_H: f64 = 0.1;

fn base(id: &str, description: &str, system: SystemSpec, q0: Vec<f64>, v0: Vec<f64>, t_final: f64, rule: DiscretizationRule) -> ExperimentSpec {
    ExperimentSpec {
        id: id.to_string(),
        description: description.to_string(),
        system,
        q0,
        v0,
        velocity_free: None,
        t_final,
        integrator: IntegratorKind::Contact,
        rule,
        newton: NewtonConfig::default(),
        start: StartMode::MomentumMatching,
        force_split: ForceSplit::AllLeft,
        reference_tol: 1e-10,
        dae_refinement: 10,
    }
}

fn foucault(id: &str, alpha: f64) -> ExperimentSpec {
    let p = FoucaultParams {
        alpha,
        ..FoucaultParams::default()
    };
    base(
        id,
        &format!("Foucault pendulum, Paris configuration, alpha = {alpha:e}"),
        SystemSpec::Foucault(p),
        vec![0.0, p.l / 100.0],
        vec![0.0, 0.0],
        FOUCAULT_T,
        DiscretizationRule::left_first(FOUCAULT_H).expect("positive step"),
    )
}

fn disk(id: &str, description: &str, alpha: f64, forcing: Forcing, q0: [f64; 5], v0: [f64; 5], t_final: f64) -> ExperimentSpec {
    base(
        id,
        description,
        SystemSpec::Disk(DiskParams::standard(alpha, forcing)),
        q0.to_vec(),
        v0.to_vec(),
        t_final,
        DiscretizationRule::mid_second(DISK_H).expect("positive step"),
    )
}

/// Circular-path initial data: tilt 20°, heading rate -3π/10, spin from the
/// figure-caption relation.
pub fn circular_path_initial_state(params: &DiskParams) -> ([f64; 5], [f64; 5]) {
    let theta0 = 20f64.to_radians();
    let phi_dot0 = -3.0 * PI / 10.0;
    let psi_dot0 = params.caption_spin_rate(theta0, phi_dot0);
    ([0.0, 0.0, theta0, 0.0, 0.0], [PI / 2.0, 0.0, 0.0, phi_dot0, psi_dot0])
}

/// The built-in experiments.
pub fn catalog() -> Vec<ExperimentSpec> {
    let mut out = vec![foucault("foucault-1", 1e-3), foucault("foucault-2", 1e-4)];
    let push = Forcing {
        constant: [0.0, 0.0, 0.0, 0.0, 0.5],
        rate: [0.0; 5],
    };
    for (k, alpha) in [(1, 0.005), (2, 0.1)] {
        out.push(disk(
            &format!("disk-1.{k}"),
            &format!("Disk from rest, vertical, spin torque 1/2, alpha = {alpha}"),
            alpha,
            push,
            [0.0; 5],
            [0.0; 5],
            20.0,
        ));
    }
    for (k, alpha) in [(1, 0.0), (2, 0.005), (3, 0.1)] {
        out.push(disk(
            &format!("disk-2.{k}"),
            &format!("Disk tilted pi/36, rolling, alpha = {alpha}"),
            alpha,
            Forcing::none(),
            [0.0, 0.0, PI / 36.0, 0.0, 0.0],
            [PI, 0.0, 0.0, 0.0, 2.0 * PI],
            20.0,
        ));
    }
    let ramp = Forcing {
        constant: [0.0; 5],
        rate: [0.0, 0.0, 0.0, 1.0 / 16.0, 1.0 / 16.0],
    };
    for (k, alpha) in [(1, 0.0), (2, 0.005), (3, 0.1)] {
        out.push(disk(
            &format!("disk-3.{k}"),
            &format!("Disk vertical, ramped heading and spin forces t/16, alpha = {alpha}"),
            alpha,
            ramp,
            [0.0; 5],
            [PI / 2.0, 0.0, 0.0, 0.0, PI],
            20.0,
        ));
    }
    for (k, alpha) in [(1, 0.0), (2, 0.005), (3, 0.1)] {
        let params = DiskParams::standard(alpha, Forcing::none());
        let (q0, v0) = circular_path_initial_state(&params);
        let mut e = disk(
            &format!("disk-4.{k}"),
            &format!("Disk on a circular path, tilt 20 deg, alpha = {alpha}"),
            alpha,
            Forcing::none(),
            q0,
            v0,
            25.0,
        );
        e.velocity_free = Some(vec![true, true, false, false, false]);
        out.push(e);
    }
    out
}

/// Scalar damped oscillator used for the order study (not in the catalog).
pub fn oscillator_experiment(rule: DiscretizationRule, t_final: f64) -> ExperimentSpec {
    let mut e = base(
        "oscillator",
        "Damped oscillator, omega = 1, alpha = 0.1, x0 = 1, v0 = 0",
        SystemSpec::Oscillator(DampedOscillator::new(1.0, 0.1)),
        vec![1.0],
        vec![0.0],
        t_final,
        rule,
    );
    e.newton = e.newton.with_tolerance(1e-12);
    e
}

pub fn find_experiment(id: &str) -> Option<ExperimentSpec> {
    if id == "oscillator" {
        return Some(oscillator_experiment(DiscretizationRule::mid_second(0.1).expect("positive step"), 10.0));
    }
    catalog().into_iter().find(|e| e.id == id)
}

fn failed_at_start(spec: &ExperimentSpec, system: &dyn ContactSystem, err: &Error) -> Trajectory {
    let v = vec![0.0; spec.q0.len()];
    Trajectory {
        times: vec![0.0],
        configurations: vec![spec.q0.clone()],
        velocities: vec![v.clone()],
        z_values: vec![0.0],
        multipliers: Vec::new(),
        energies: vec![system.energy(&spec.q0, &v)],
        termination: Termination::SolverFailure {
            step: 0,
            time: 0.0,
            message: err.to_string(),
        },
        newton_iterations: Vec::new(),
        constraint_residuals: Vec::new(),
    }
}

/// Runs the experiment with its configured integrator. Configuration
/// errors are returned; numerical failures are recorded in the
/// trajectory's termination.
pub fn simulate(spec: &ExperimentSpec) -> Result<Trajectory> {
    spec.validate()?;
    let system = spec.system.build(spec.integrator);
    let setup = spec.setup();
    let h = spec.h();
    match spec.integrator {
        IntegratorKind::Contact => Ok(simulate_contact(system.as_ref(), &setup)),
        IntegratorKind::LagrangeDAlembert => match spec.system {
            SystemSpec::Disk(_) => Err(Error::InvalidConfig(
                "the Lagrange-d'Alembert integrator has no dissipation model for the disk".into(),
            )),
            _ => Ok(simulate_la(system.as_ref(), &setup, spec.force_split)),
        },
        IntegratorKind::Rkf45Reference => {
            let SystemSpec::Foucault(p) = spec.system else {
                return Err(Error::InvalidConfig("the RKF45 reference is only available for the Foucault system".into()));
            };
            let free = setup.free_mask();
            let v0 = crate::herglotz::project_velocity(system.as_ref(), &spec.q0, &spec.v0, &free);
            let config = RkfConfig::new(spec.reference_tol, spec.reference_tol * 1e-2).with_h_max(h);
            match foucault_reference(&p, &spec.q0, &v0, spec.t_final, &config) {
                Ok(dense) => Ok(foucault_reference_on_grid(&p, &dense, h, setup.steps())),
                Err(e) => Ok(failed_at_start(spec, system.as_ref(), &e)),
            }
        }
        IntegratorKind::ImplicitDaeReference => {
            let dae = ContinuousConstrainedSystem::new(system.as_ref());
            let (y0, yp0) = match consistent_init(&dae, 0.0, &spec.q0, &spec.v0, &setup.free_mask()) {
                Ok(init) => init,
                Err(e) => return Ok(failed_at_start(spec, system.as_ref(), &e)),
            };
            let h_ref = h / spec.dae_refinement as f64;
            let t_end = setup.steps() as f64 * h;
            let run = implicit_dae_integrate(&dae, &y0, &yp0, (0.0, t_end), h_ref, &spec.newton)?;
            Ok(dae_to_trajectory(&dae, &run, spec.dae_refinement))
        }
    }
}
