//! `valley-qed`: runs the emission and edge-mode scenarios from config files
//! and flags, and writes CSV/JSON artifacts.

mod config;
mod error;
mod output;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use valley_qed::emitter::WEAK_COUPLING_LIMIT;
use valley_qed::scenario::Check;

use config::{parse_angle, Angle, Param, ScenarioConfig, ScenarioKind};
use error::CliError;

/// Default output root when neither `--output` nor `run.output_dir` is set.
const OUTPUT_ENV: &str = "VALLEY_QED_OUTPUT";

const EXIT_CHECK: u8 = 3;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(name = "valley-qed", version, about = "Giant-atom emission into a gapped honeycomb photonic lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory (default: run.output_dir, then $VALLEY_QED_OUTPUT/<scenario>, then output/<scenario>).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also evaluate the reference checks for the scenario; exit 3 if any fails.
        #[arg(long)]
        check: bool,
    },
    /// Run a scenario for a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values; angles may be written as multiples of pi.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Print the resolved config as TOML.
        #[arg(long)]
        print: bool,
    },
    /// Describe the available scenarios.
    ListScenarios,
}

#[derive(Args)]
struct Source {
    /// TOML config, or a JSON config or manifest.
    config: Option<PathBuf>,
    /// Scenario to run (replaces the config's scenario).
    #[arg(long, value_enum)]
    scenario: Option<ScenarioKind>,
}

#[derive(Args, Default)]
struct Overrides {
    /// Uniform sublattice detuning.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Domain-wall detuning amplitude.
    #[arg(long)]
    delta0: Option<f64>,
    /// Domain-wall width.
    #[arg(long)]
    lambda: Option<f64>,
    /// Atom-lattice coupling.
    #[arg(long)]
    g: Option<f64>,
    /// Atomic transition frequency.
    #[arg(long, allow_hyphen_values = true)]
    omega0: Option<f64>,
    /// Phase of the second coupling point, e.g. `pi/3` or `-pi/3`.
    #[arg(long, allow_hyphen_values = true)]
    phase: Option<Angle>,
    /// Lattice size (cells per side; ribbon width; band grid).
    #[arg(long, conflicts_with = "full_scale")]
    size: Option<usize>,
    /// Use the large lattices instead of the desk-scale defaults.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt_report: Option<f64>,
}

fn load(source: &Source, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match (&source.config, source.scenario) {
        (Some(path), kind) => {
            let mut cfg = ScenarioConfig::load(path)?;
            if let Some(k) = kind {
                cfg.scenario = k;
            }
            cfg
        }
        (None, Some(kind)) => ScenarioConfig::new(kind),
        (None, None) => return Err(CliError::Config("give a config file or --scenario".into())),
    };
    if overrides.full_scale {
        cfg.run.full_scale = true;
    }
    if let Some(v) = overrides.t_final {
        cfg.run.t_final = Some(v);
    }
    if let Some(v) = overrides.dt_report {
        cfg.run.dt_report = Some(v);
    }
    cfg.resolve();
    let params = [
        (Param::Delta, overrides.delta),
        (Param::Delta0, overrides.delta0),
        (Param::Lambda, overrides.lambda),
        (Param::G, overrides.g),
        (Param::Omega0, overrides.omega0),
        (Param::Phase, overrides.phase.map(|a| a.0)),
    ];
    for (p, v) in params {
        if let Some(v) = v {
            cfg.set_param(p, v)?;
        }
    }
    if let Some(n) = overrides.size {
        cfg.set_size(n)?;
    }
    Ok(cfg)
}

fn output_dir(cfg: &ScenarioConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.run.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("output"));
    root.join(cfg.scenario.name())
}

fn print_checks(title: &str, checks: &[Check]) {
    if checks.is_empty() {
        return;
    }
    println!("{title}:");
    for c in checks {
        println!("  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn warnings(cfg: &ScenarioConfig) -> Vec<String> {
    let mut w = Vec::new();
    if let Some(r) = cfg.coupling_ratio() {
        if r.abs() >= WEAK_COUPLING_LIMIT {
            w.push(format!(
                "g/J = {r:.3} is outside the weak-coupling regime (g/J << 3/2 is required; warning threshold {WEAK_COUPLING_LIMIT})"
            ));
        }
    }
    if cfg.scenario == ScenarioKind::Chiral && cfg.chiral.omega0.abs() >= cfg.chiral.delta0.abs() {
        w.push(format!(
            "omega0 = {} lies outside the bulk gap |omega| < {}; the edge-mode rate formulas do not apply",
            cfg.chiral.omega0, cfg.chiral.delta0
        ));
    }
    w
}

fn cmd_run(source: &Source, overrides: &Overrides, output: Option<&Path>, check: bool) -> Result<u8, CliError> {
    let cfg = load(source, overrides)?;
    for w in warnings(&cfg) {
        eprintln!("warning: {w}");
    }
    let dir = output_dir(&cfg, output);
    let outcome = runner::run_scenario(&cfg, &dir)?;
    println!("scenario {} -> {}", cfg.scenario, dir.display());
    for (k, v) in &outcome.scalars {
        println!("  {k} = {v:.6}");
    }
    print_checks("consistency", &outcome.consistency);
    if check {
        print_checks("checks", &outcome.acceptance);
    }
    Ok(if !outcome.consistent() {
        EXIT_NUMERICAL
    } else if check && !outcome.accepted() {
        EXIT_CHECK
    } else {
        0
    })
}

fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_angle(v).map_err(CliError::Config))
        .collect()
}

fn cmd_sweep(
    source: &Source,
    overrides: &Overrides,
    param: Param,
    values: &str,
    output: Option<&Path>,
) -> Result<u8, CliError> {
    let cfg = load(source, overrides)?;
    let values = parse_values(values)?;
    let dir = match output {
        Some(p) => p.to_path_buf(),
        None => output_dir(&cfg, None).with_file_name(format!("{}_sweep_{param}", cfg.scenario)),
    };
    let rows = runner::sweep(&cfg, param, &values, &dir)?;
    println!("sweep {param} over {} values -> {}", rows.len(), dir.display());
    for r in &rows {
        match &r.result {
            Ok(_) => println!("  {param} = {}: {}", r.value, r.status()),
            Err(e) => println!("  {param} = {}: error: {e}", r.value),
        }
    }
    Ok(0)
}

fn cmd_validate(source: &Source, overrides: &Overrides, print: bool) -> Result<u8, CliError> {
    let cfg = load(source, overrides)?;
    cfg.validate()?;
    if print {
        print!("{}", cfg.to_toml());
    }
    for w in warnings(&cfg) {
        println!("warning: {w}");
    }
    println!("config ok: scenario {}", cfg.scenario);
    Ok(0)
}

fn cmd_list() {
    for k in ScenarioKind::ALL {
        println!("{:<8} {}", k.name(), k.description());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { source, overrides, output, check } => cmd_run(source, overrides, output.as_deref(), *check),
        Command::Sweep { source, overrides, param, values, output } => {
            cmd_sweep(source, overrides, *param, values, output.as_deref())
        }
        Command::Validate { source, overrides, print } => cmd_validate(source, overrides, *print),
        Command::ListScenarios => {
            cmd_list();
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
