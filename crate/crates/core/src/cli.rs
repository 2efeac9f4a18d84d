//! Command-line experiment runner and CSV artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{convergence_order, oscillation_plane_angle, trajectory_error};
use crate::error::{Error, Result};
use crate::experiment::{
    catalog, find_experiment, oscillator_experiment, parse_overrides, parse_pair, parse_rule, simulate, ExperimentSpec,
    IntegratorKind, SystemSpec,
};
use crate::model::{Termination, Trajectory};
use crate::systems::DampedOscillator;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CONTACT_VI_OUTPUT_ROOT";

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_SOLVER_FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "contact-vi", version, about = "Contact variational integrators for dissipative nonholonomic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one catalog experiment and write its CSV artifacts.
    Run {
        experiment: String,
        #[arg(long, default_value = "contact")]
        integrator: String,
        /// Comma-separated subset of trajectory, energy, error, plane_angle, summary.
        #[arg(long, value_delimiter = ',', default_value = "trajectory,energy,summary")]
        emit: Vec<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run several integrators plus the experiment's reference and compare.
    Compare {
        experiment: String,
        #[arg(long, value_delimiter = ',', default_value = "contact,la")]
        integrators: Vec<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Convergence study on the damped oscillator against its exact solution.
    Convergence {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025,0.0125")]
        h_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "left-first,mid-second")]
        rules: Vec<String>,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// List the experiment catalog.
    List,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// `key=value`; repeatable. Wins over `--config`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// File of `key=value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Resolves an experiment and applies overrides: config file first, then
/// `--override` pairs, then the dedicated flags.
pub fn resolve_experiment(id: &str, integrator: Option<&str>, common: &CommonArgs) -> Result<ExperimentSpec> {
    let mut spec = find_experiment(id).ok_or_else(|| Error::InvalidConfig(format!("unknown experiment '{id}'")))?;
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        for (k, v) in parse_overrides(&text)? {
            spec.apply_override(&k, &v)?;
        }
    }
    for pair in &common.overrides {
        let (k, v) = parse_pair(pair)?;
        spec.apply_override(&k, &v)?;
    }
    if let Some(i) = integrator {
        spec.integrator = IntegratorKind::parse(i)?;
    }
    if let Some(a) = common.alpha {
        spec.system.set_alpha(a);
    }
    if let Some(h) = common.h {
        spec.rule = spec.rule.with_h(h)?;
    }
    if let Some(r) = &common.rule {
        spec.rule = parse_rule(r, spec.rule.h)?;
    }
    if let Some(t) = common.t_final {
        spec.t_final = t;
    }
    spec.validate()?;
    Ok(spec)
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("output"), PathBuf::from)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t, q_1..q_n, qdot_1..qdot_n, z, lambda_1..lambda_m, E`. The multiplier
/// of the final row repeats the last computed one.
pub fn trajectory_csv(traj: &Trajectory, dim_c: usize) -> String {
    let n = traj.dim_q();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",q_{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",qdot_{i}");
    }
    out.push_str(",z");
    for i in 1..=dim_c {
        let _ = write!(out, ",lambda_{i}");
    }
    out.push_str(",E\n");
    let zeros = vec![0.0; dim_c];
    for j in 0..traj.len() {
        let lambda = traj.multipliers.get(j).or(traj.multipliers.last()).unwrap_or(&zeros);
        let mut fields = vec![num(traj.times[j])];
        fields.extend(traj.configurations[j].iter().map(|x| num(*x)));
        fields.extend(traj.velocities[j].iter().map(|x| num(*x)));
        fields.push(num(traj.z_values[j]));
        fields.extend(lambda.iter().map(|x| num(*x)));
        fields.push(num(traj.energies[j]));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn energy_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,E\n");
    for (t, e) in traj.times.iter().zip(&traj.energies) {
        let _ = writeln!(out, "{},{}", num(*t), num(*e));
    }
    out
}

fn termination_fields(term: &Termination) -> (String, String, String, String) {
    match term {
        Termination::Completed => ("Completed".into(), String::new(), String::new(), String::new()),
        Termination::SolverFailure { step, time, message } => (
            "SolverFailure".into(),
            step.to_string(),
            num(*time),
            message.replace([',', '\n'], ";"),
        ),
    }
}

/// Two-column `key,value` summary. `wall_time` is the only field that
/// varies between identical runs.
pub fn summary_csv(spec: &ExperimentSpec, traj: &Trajectory, wall_time: f64) -> String {
    let (term, fstep, ftime, msg) = termination_fields(&traj.termination);
    let iters = &traj.newton_iterations;
    let total: usize = iters.iter().sum();
    let mean = if iters.is_empty() { 0.0 } else { total as f64 / iters.len() as f64 };
    let max = iters.iter().copied().max().unwrap_or(0);
    let rows: Vec<(&str, String)> = vec![
        ("experiment", spec.id.clone()),
        ("integrator", spec.integrator.name().into()),
        ("alpha", num(spec.alpha())),
        ("h", num(spec.h())),
        ("termination", term),
        ("failure_step", fstep),
        ("failure_time", ftime),
        ("failure_message", msg),
        ("final_time", num(traj.final_time())),
        ("samples", traj.len().to_string()),
        ("wall_time", format!("{wall_time:.6}")),
        ("newton_iterations_total", total.to_string()),
        ("newton_iterations_mean", num(mean)),
        ("newton_iterations_max", max.to_string()),
        ("max_constraint_residual", num(traj.max_constraint_residual())),
        ("energy_initial", num(traj.energies.first().copied().unwrap_or(0.0))),
        ("energy_final", num(traj.energies.last().copied().unwrap_or(0.0))),
    ];
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)
        .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", dir.join(name).display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::InvalidConfig(format!("cannot create {}: {e}", dir.display())))
}

fn dim_c(spec: &ExperimentSpec) -> usize {
    spec.system.build(spec.integrator).dim_c()
}

/// Runs an experiment and writes the requested artifacts into `dir`.
pub fn run_experiment(spec: &ExperimentSpec, dir: &Path, emit: &[String]) -> Result<Trajectory> {
    for e in emit {
        if !["trajectory", "energy", "error", "plane_angle", "summary"].contains(&e.as_str()) {
            return Err(Error::InvalidConfig(format!("unknown artifact '{e}'")));
        }
    }
    ensure_dir(dir)?;
    let start = Instant::now();
    let traj = simulate(spec)?;
    let wall = start.elapsed().as_secs_f64();
    let wants = |k: &str| emit.iter().any(|e| e == k);
    if wants("trajectory") {
        write(dir, "trajectory.csv", &trajectory_csv(&traj, dim_c(spec)))?;
    }
    if wants("energy") {
        write(dir, "energy.csv", &energy_csv(&traj))?;
    }
    if wants("error") {
        let reference = simulate(&spec.clone().with_integrator(spec.reference_integrator()))?;
        let err = trajectory_error(&traj, &reference)?;
        let mut out = String::from("t,error\n");
        for (t, e) in err.times.iter().zip(&err.errors) {
            let _ = writeln!(out, "{},{}", num(*t), num(*e));
        }
        write(dir, "error.csv", &out)?;
    }
    if wants("plane_angle") {
        let SystemSpec::Foucault(p) = spec.system else {
            return Err(Error::InvalidConfig("plane_angle applies to the Foucault system only".into()));
        };
        let series = oscillation_plane_angle(&traj.times, &traj.configurations, 2.0 * p.period())?;
        let mut out = String::from("t,angle\n");
        for (t, a) in series.times.iter().zip(&series.angles) {
            let _ = writeln!(out, "{},{}", num(*t), num(*a));
        }
        write(dir, "plane_angle.csv", &out)?;
    }
    if wants("summary") {
        write(dir, "summary.csv", &summary_csv(spec, &traj, wall))?;
    }
    Ok(traj)
}

/// Comparison table on the common time grid: per integrator, the error
/// against the reference and the energy difference `E - E_ref`. Rows stop
/// at the first failure of any run.
pub fn comparison_csv(names: &[String], runs: &[Trajectory], reference: &Trajectory) -> Result<String> {
    let mut errors = Vec::with_capacity(runs.len());
    for r in runs {
        errors.push(trajectory_error(r, reference)?);
    }
    let len = errors.iter().map(|e| e.times.len()).min().unwrap_or(reference.len());
    let mut out = String::from("t");
    for n in names {
        let _ = write!(out, ",err_{n}");
    }
    for n in names {
        let _ = write!(out, ",dE_{n}");
    }
    out.push('\n');
    for j in 0..len {
        let mut fields = vec![num(reference.times[j])];
        fields.extend(errors.iter().map(|e| num(e.errors[j])));
        fields.extend(runs.iter().map(|r| num(r.energies[j] - reference.energies[j])));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn termination_line(name: &str, t: &Termination) -> String {
    match t {
        Termination::Completed => format!("{name}: Completed"),
        Termination::SolverFailure { time, message, .. } => format!("{name}: SolverFailure at t = {time:.6e} ({message})"),
    }
}

pub fn compare_experiment(spec: &ExperimentSpec, integrators: &[IntegratorKind], dir: &Path) -> Result<bool> {
    ensure_dir(dir)?;
    let reference_kind = spec.reference_integrator();
    let reference = simulate(&spec.clone().with_integrator(reference_kind))?;
    let mut runs = Vec::new();
    let mut names = Vec::new();
    let mut summary = String::from("run,integrator,termination,failure_time,final_time\n");
    let mut all_ok = reference.termination.is_completed();
    for &kind in integrators {
        let run = simulate(&spec.clone().with_integrator(kind))?;
        let (term, _, ftime, _) = termination_fields(&run.termination);
        let _ = writeln!(summary, "run,{},{term},{ftime},{}", kind.name(), num(run.final_time()));
        println!("{}", termination_line(kind.name(), &run.termination));
        all_ok &= run.termination.is_completed();
        names.push(kind.name().to_string());
        runs.push(run);
    }
    let (term, _, ftime, _) = termination_fields(&reference.termination);
    let _ = writeln!(summary, "reference,{},{term},{ftime},{}", reference_kind.name(), num(reference.final_time()));
    println!("{}", termination_line(&format!("reference {}", reference_kind.name()), &reference.termination));
    write(dir, "comparison.csv", &comparison_csv(&names, &runs, &reference)?)?;
    write(dir, "summary.csv", &summary)?;
    Ok(all_ok)
}

/// Max-norm error of oscillator runs against the exact solution, and the
/// fitted order per rule.
pub fn convergence_csv(h_list: &[f64], rules: &[String], t_final: f64) -> Result<(String, Vec<(String, f64)>)> {
    let mut out = String::from("variant,h,error,order\n");
    let mut orders = Vec::new();
    for name in rules {
        let mut samples = Vec::new();
        for &h in h_list {
            let rule = parse_rule(name, h)?;
            let spec = oscillator_experiment(rule, t_final);
            let SystemSpec::Oscillator(osc) = spec.system else {
                unreachable!("oscillator experiment")
            };
            let traj = simulate(&spec)?;
            if !traj.termination.is_completed() {
                return Err(Error::InvalidConfig(format!("{name} at h = {h} did not complete")));
            }
            samples.push((h, max_error_vs_exact(&traj, &osc, spec.q0[0], spec.v0[0])));
        }
        let order = convergence_order(&samples)?;
        for (h, e) in &samples {
            let _ = writeln!(out, "{name},{},{},{}", num(*h), num(*e), num(order));
        }
        orders.push((name.clone(), order));
    }
    Ok((out, orders))
}

pub fn max_error_vs_exact(traj: &Trajectory, osc: &DampedOscillator, x0: f64, v0: f64) -> f64 {
    traj.times
        .iter()
        .zip(&traj.configurations)
        .map(|(t, q)| (q[0] - osc.exact(*t, x0, v0)).abs())
        .fold(0.0, f64::max)
}

fn catalog_listing() -> String {
    let mut out = String::new();
    for e in catalog() {
        let _ = writeln!(out, "{:<12} {}", e.id, e.description);
    }
    let _ = writeln!(out, "{:<12} {}", "oscillator", oscillator_experiment(parse_rule("mid-second", 0.1).expect("valid"), 10.0).description);
    out
}

fn config_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

pub fn execute(cli: Cli) -> ExitCode {
    match cli.command {
        Command::List => {
            print!("{}", catalog_listing());
            ExitCode::from(EXIT_OK)
        }
        Command::Run {
            experiment,
            integrator,
            emit,
            common,
        } => {
            if find_experiment(&experiment).is_none() {
                eprintln!("unknown experiment '{experiment}'; available:\n{}", catalog_listing());
                return ExitCode::from(EXIT_CONFIG);
            }
            let spec = match resolve_experiment(&experiment, Some(&integrator), &common) {
                Ok(s) => s,
                Err(e) => return config_error(&e),
            };
            let dir = common
                .output_dir
                .clone()
                .unwrap_or_else(|| output_root().join(&spec.id).join(spec.integrator.name()));
            match run_experiment(&spec, &dir, &emit) {
                Ok(traj) => {
                    println!("{}", termination_line(&spec.id, &traj.termination));
                    println!("wrote {}", dir.display());
                    if traj.termination.is_completed() {
                        ExitCode::from(EXIT_OK)
                    } else {
                        ExitCode::from(EXIT_SOLVER_FAILURE)
                    }
                }
                Err(e) => config_error(&e),
            }
        }
        Command::Compare {
            experiment,
            integrators,
            common,
        } => {
            if find_experiment(&experiment).is_none() {
                eprintln!("unknown experiment '{experiment}'; available:\n{}", catalog_listing());
                return ExitCode::from(EXIT_CONFIG);
            }
            let run = || -> Result<bool> {
                let spec = resolve_experiment(&experiment, None, &common)?;
                let kinds = integrators
                    .iter()
                    .map(|s| IntegratorKind::parse(s))
                    .collect::<Result<Vec<_>>>()?;
                let dir = common
                    .output_dir
                    .clone()
                    .unwrap_or_else(|| output_root().join(&spec.id).join("compare"));
                let ok = compare_experiment(&spec, &kinds, &dir)?;
                println!("wrote {}", dir.display());
                Ok(ok)
            };
            match run() {
                Ok(true) => ExitCode::from(EXIT_OK),
                Ok(false) => ExitCode::from(EXIT_SOLVER_FAILURE),
                Err(e) => config_error(&e),
            }
        }
        Command::Convergence {
            h_list,
            rules,
            t_final,
            output_dir,
        } => {
            let run = || -> Result<()> {
                let (csv, orders) = convergence_csv(&h_list, &rules, t_final)?;
                let dir = output_dir.unwrap_or_else(|| output_root().join("convergence"));
                ensure_dir(&dir)?;
                write(&dir, "orders.csv", &csv)?;
                for (name, order) in orders {
                    println!("{name}: order {order:.3}");
                }
                println!("wrote {}", dir.display());
                Ok(())
            };
            match run() {
                Ok(()) => ExitCode::from(EXIT_OK),
                Err(e) => config_error(&e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.txt");
        fs::write(&cfg, "alpha=0.5\nh=0.01\n").unwrap();
        let common = CommonArgs {
            config: Some(cfg),
            overrides: vec!["alpha=0.25".into()],
            ..CommonArgs::default()
        };
        let spec = resolve_experiment("foucault-1", None, &common).unwrap();
        assert_eq!(spec.alpha(), 0.25);
        assert_eq!(spec.h(), 0.01);
        let common = CommonArgs {
            overrides: vec!["alpha=0.25".into()],
            alpha: Some(0.125),
            ..CommonArgs::default()
        };
        assert_eq!(resolve_experiment("foucault-1", None, &common).unwrap().alpha(), 0.125);
        assert!(resolve_experiment("nope", None, &CommonArgs::default()).is_err());
    }

    #[test]
    fn trajectory_header_and_rows() {
        let mut spec = find_experiment("disk-1.1").unwrap();
        spec.t_final = 0.3;
        let traj = simulate(&spec).unwrap();
        let csv = trajectory_csv(&traj, 2);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,q_1,q_2,q_3,q_4,q_5,qdot_1,qdot_2,qdot_3,qdot_4,qdot_5,z,lambda_1,lambda_2,E"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert_eq!(r.split(',').count(), 15);
        }
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
