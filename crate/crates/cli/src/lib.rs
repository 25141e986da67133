//! Command-line driver: pulse optimisation, Fisher curves, parameter sweeps and
//! Zeeman scans, each writing one run directory with a manifest.

pub mod config;
mod output;

use std::path::PathBuf;

use cavity_sense::dynamics::zero_spurious_coherences;
use cavity_sense::metrology::{analyze, make_classical_state, make_dicke_state, reduce_to_qubits, FisherResult};
use cavity_sense::optimizer::{anneal, Objective, OptimizationTrace};
use cavity_sense::pulse::{digitize, PulseParams};
use cavity_sense::sweep::{kappa_sweep, n_sweep, SweepParameter, SweepResult};
use cavity_sense::zeeman::{
    admixture, cavity_excited_label, coupling_strength, energy_scan, find_magic_field, sensitivity_scan,
    transition_sensitivity, write_energy_csv, write_sensitivity_csv, AtomData,
};
use clap::{Parser, Subcommand};
use serde_json::json;

pub use config::{Manifold, RunConfig, StateSource};
pub use output::{config_hash, RunDir};

const FORMATS_HELP: &str = "\
Output files (every CSV starts with a `# config_hash=<sha256> seed=<u64>` line):
  optimize: pulse.json, trace.csv (chain,iteration,best_F,accepted_F,temperature),
            steps.csv (step_index,omega1,omega2,phi), fisher.csv (theta,F), result.json
  fisher:   fisher.csv (theta,F), result.json
  sweep:    sweep.csv (kappa|N,F_max,theta_star,status), result.json
  zeeman:   energies.csv (B_gauss,E_F<f>_m<m>...), sensitivity.csv (B_gauss,delta_f_hz), result.json
  all:      manifest.json
See FORMATS.md for units.";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<cavity_sense::Error> for CliError {
    fn from(e: cavity_sense::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("writing output: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "cavity-sense", version, about = "Entangling pulses and Fisher information for atoms in a lossy cavity", after_help = FORMATS_HELP)]
pub struct Cli {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `rng_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for chains, sweep points and noise realizations.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Stored pulse JSON to evaluate instead of optimising.
    #[arg(long, global = true)]
    pub reuse_pulse: Option<PathBuf>,
    /// Run directory (default `runs/<command>-<hash prefix>`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Anneal a pulse for the configured scenario.
    Optimize,
    /// F(theta) on the 256-point grid.
    Fisher {
        #[arg(long, value_enum)]
        state: Option<StateSource>,
    },
    /// F_max over a kappa or atom-number grid.
    Sweep {
        /// `kappa` or `n`.
        #[arg(long)]
        parameter: Option<String>,
        /// Comma-separated grid.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Level energies, field sensitivity and the magic field.
    Zeeman {
        #[arg(long, value_enum)]
        manifold: Option<Manifold>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::Fisher { .. } => "fisher",
            Command::Sweep { .. } => "sweep",
            Command::Zeeman { .. } => "zeeman",
        }
    }
}

/// Configuration after command-line overrides, with the stored pulse loaded.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ResolvedRun {
    pub command: &'static str,
    pub config: RunConfig,
    pub pulse: Option<PulseParams<f64>>,
}

pub fn resolve(cli: &Cli) -> Result<ResolvedRun, CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.rng_seed = s;
    }
    config.optimizer.rng_seed = config.rng_seed;
    if let Some(p) = &cli.reuse_pulse {
        config.pulse_file = Some(p.clone());
    }
    if let Some(o) = &cli.out {
        config.output_dir = Some(o.clone());
    }
    match &cli.command {
        Command::Fisher { state: Some(s) } => config.fisher.state = *s,
        Command::Sweep { parameter, values } => {
            if let Some(p) = parameter {
                config.sweep.parameter = match p.to_ascii_lowercase().as_str() {
                    "kappa" => SweepParameter::Kappa,
                    "n" => SweepParameter::N,
                    other => return Err(CliError::Config(format!("unknown sweep parameter {other:?}"))),
                };
            }
            if let Some(v) = values {
                config.sweep.values = v.clone();
            }
        }
        Command::Zeeman { manifold: Some(m) } => config.zeeman.manifold = *m,
        _ => {}
    }
    config.validate()?;
    let pulse = config.load_pulse()?;
    Ok(ResolvedRun { command: cli.command.name(), config, pulse })
}

/// Parses nothing; runs an already-parsed command line.
pub fn run(cli: &Cli) -> Result<RunDir, CliError> {
    let resolved = resolve(cli)?;
    match cli.workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| execute(&resolved)),
        None => execute(&resolved),
    }
}

pub fn execute(run: &ResolvedRun) -> Result<RunDir, CliError> {
    let dir = RunDir::create(run)?;
    match run.command {
        "optimize" => optimize(run, &dir)?,
        "fisher" => fisher(run, &dir)?,
        "sweep" => sweep(run, &dir)?,
        "zeeman" => zeeman(run, &dir)?,
        other => return Err(CliError::Config(format!("unknown command {other}"))),
    }
    dir.write_manifest(run)?;
    Ok(dir)
}

fn fisher_of_pulse(run: &ResolvedRun, pulse: &PulseParams<f64>) -> Result<FisherResult, CliError> {
    let c = &run.config;
    let obj = Objective::new(c.scenario, c.physical.clone(), c.optimizer.clone())?;
    let rho = obj.final_state(pulse)?;
    let rho = zero_spurious_coherences(&rho, obj.basis(), c.scenario.excitations);
    let q = reduce_to_qubits(&rho, obj.basis())?;
    Ok(analyze(&q, &c.scenario)?)
}

fn optimize(run: &ResolvedRun, dir: &RunDir) -> Result<(), CliError> {
    let c = &run.config;
    let trace = match &run.pulse {
        Some(p) => {
            log::info!("evaluating stored pulse instead of annealing");
            OptimizationTrace { records: Vec::new(), best_chain: 0, best_pulse: p.clone(), f_max: f64::NAN }
        }
        None => anneal(&c.scenario, &c.physical, &c.optimizer)?,
    };
    let result = fisher_of_pulse(run, &trace.best_pulse)?;
    dir.write_json("pulse.json", &trace.best_pulse)?;
    dir.write_csv("trace.csv", |w| trace.write_csv(w))?;
    let steps = digitize(&trace.best_pulse, c.optimizer.omega_max())?;
    dir.write_csv("steps.csv", |w| steps.write_csv(w))?;
    dir.write_csv("fisher.csv", |w| result.write_csv(w))?;
    dir.write_json("result.json", &json!({
        "F_max": result.f_max,
        "theta_star": result.theta_star,
        "baseline_classical": result.baseline_classical,
        "baseline_dicke": result.baseline_dicke,
        "discarded_population": result.discarded_population,
        "best_chain": trace.best_chain,
    }))?;
    println!(
        "F_max = {:.6} at theta = {:.6} (classical {}, Dicke {:.4})",
        result.f_max, result.theta_star, result.baseline_classical, result.baseline_dicke
    );
    Ok(())
}

fn fisher(run: &ResolvedRun, dir: &RunDir) -> Result<(), CliError> {
    let c = &run.config;
    let (n, m) = (c.scenario.n_atoms, c.scenario.excitations);
    let result = match c.fisher.state {
        StateSource::Pulse => {
            let pulse = run
                .pulse
                .as_ref()
                .or(c.optimizer.initial_pulse.as_ref())
                .ok_or_else(|| CliError::Config("fisher --state pulse needs --reuse-pulse or optimizer.initial_pulse".into()))?;
            fisher_of_pulse(run, pulse)?
        }
        StateSource::Dicke => analyze(&make_dicke_state::<f64>(n, m)?, &c.scenario)?,
        StateSource::Classical => analyze(&make_classical_state::<f64>(n)?, &c.scenario)?,
    };
    dir.write_csv("fisher.csv", |w| result.write_csv(w))?;
    dir.write_json("result.json", &result)?;
    println!("F_max = {:.6} at theta = {:.6}", result.f_max, result.theta_star);
    Ok(())
}

fn sweep(run: &ResolvedRun, dir: &RunDir) -> Result<(), CliError> {
    let c = &run.config;
    let result: SweepResult = match c.sweep.parameter {
        SweepParameter::Kappa => kappa_sweep(&c.scenario, &c.physical, &c.optimizer, &c.sweep.values, run.pulse.as_ref()),
        SweepParameter::N => {
            let ns: Vec<usize> = c.sweep.values.iter().map(|v| *v as usize).collect();
            n_sweep(c.scenario.case, &c.physical, &c.optimizer, &ns, run.pulse.as_ref())
        }
    };
    dir.write_csv("sweep.csv", |w| result.write_csv(w))?;
    let failed = result.points.iter().filter(|p| p.error.is_some()).count();
    dir.write_json("result.json", &json!({
        "parameter": result.parameter,
        "fit_a": result.fit_a,
        "points": result.points.len(),
        "failed_points": failed,
    }))?;
    for p in &result.points {
        match (p.f_max, &p.error) {
            (Some(f), _) => println!("{} = {}: F_max = {:.6}", result.parameter, p.value, f),
            (None, Some(e)) => println!("{} = {}: failed ({e})", result.parameter, p.value),
            _ => {}
        }
    }
    if let Some(a) = result.fit_a {
        println!("fit F = N + a N^2: a = {a:.4}");
    }
    if failed == result.points.len() {
        return Err(CliError::Numerical("every sweep point failed".into()));
    }
    Ok(())
}

fn zeeman(run: &ResolvedRun, dir: &RunDir) -> Result<(), CliError> {
    let z = &run.config.zeeman;
    let data = AtomData::rb87();
    let level = match z.manifold {
        Manifold::Ground => &data.ground,
        Manifold::Excited => &data.excited,
    };
    let fields = z.fields();
    let pair = z.level_pair();
    let scan = energy_scan(level, &fields)?;
    dir.write_csv("energies.csv", |w| write_energy_csv(&fields, &scan, w))?;
    let sens = sensitivity_scan(level, &pair, &fields, z.delta_b)?;
    dir.write_csv("sensitivity.csv", |w| write_sensitivity_csv(&sens, w))?;
    let mut summary = json!({ "manifold": z.manifold, "pair": z.pair });
    if let Some([lo, hi]) = z.magic_range {
        let b0 = find_magic_field(level, &pair, (lo, hi))?;
        let df = transition_sensitivity(level, &pair, b0, z.delta_b)?;
        let g0 = coupling_strength(&data, b0, &z.cavity)?;
        let mix = admixture(&data.excited, cavity_excited_label(), b0)?;
        println!("B0 = {b0:.3} G, delta_f({} G) = {df:.3e} Hz, g0/2pi = {g0:.3} MHz", z.delta_b);
        summary["magic_field_gauss"] = json!(b0);
        summary["delta_f_hz"] = json!(df);
        summary["g0_mhz"] = json!(g0);
        summary["excited_admixture"] = json!(mix);
    }
    dir.write_json("result.json", &summary)?;
    Ok(())
}
