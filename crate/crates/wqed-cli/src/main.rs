mod config;
mod output;
mod presets;
mod scenarios;
mod sweep;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "wqed", version, about = "Single-excitation dynamics of qubit chains in a 1D waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; default is one per logical core.
    #[arg(long)]
    jobs: Option<usize>,
    /// Relative quadrature tolerance (overrides `tolerance.rel`).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print the normalized chain.
    Validate(Common),
    /// Collective decay rates (poles) over a θ grid.
    Poles(Common),
    /// Long-format sweep of the decay rates over θ or N.
    DecaySweep(Common),
    /// Spontaneous emission from a photon-free initial state.
    Spontaneous(Common),
    /// Single-photon pulse scattering.
    Scatter(Common),
    /// Pulse-parameter optimization.
    Optimize(Common),
    /// Delay-equation oracle against the residue or quadrature route.
    Oracle(Common),
    /// Zero-reflection points and line shapes.
    Fano(Common),
    /// Run whatever scenario the configuration names.
    Run(Common),
    /// Run a named preset (`list` prints them).
    ReproduceFigure {
        id: String,
        #[command(flatten)]
        common: Common,
    },
}

/// Failure with a machine-readable kind and an exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub code: u8,
    pub extra: Vec<(String, serde_json::Value)>,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>, code: u8) -> Self {
        CliError { kind: kind.into(), message: message.into(), code, extra: Vec::new() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("ConfigError", message, 2)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new("IoError", message, 2)
    }

    fn record(&self) -> String {
        let mut m = serde_json::Map::new();
        m.insert("status".into(), "error".into());
        m.insert("kind".into(), self.kind.clone().into());
        m.insert("message".into(), self.message.clone().into());
        m.insert("exit_code".into(), self.code.into());
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        serde_json::Value::Object(m).to_string()
    }
}

impl From<wqed::Error> for CliError {
    fn from(e: wqed::Error) -> Self {
        let debug = format!("{e:?}");
        let kind: String = debug.chars().take_while(|c| c.is_alphanumeric()).collect();
        CliError::new(&kind, e.to_string(), 3)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

fn load(common: &Common, preset: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = match (preset, &common.config) {
        (Some(id), None) => presets::load(id)?,
        (Some(_), Some(_)) => return Err(CliError::config("reproduce-figure takes a preset id, not --config")),
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => return Err(CliError::config("--config is required")),
    };
    if let Some(t) = common.tol {
        if !(t > 0.0) {
            return Err(CliError::config(format!("--tol must be positive, got {t}")));
        }
        cfg.tolerance.rel = Some(t);
    }
    if let Some(j) = common.jobs {
        cfg.run.jobs = Some(j);
    }
    if let Some(out) = &common.out {
        cfg.output.dir = Some(out.to_string_lossy().into_owned());
    } else if let (Some(id), None) = (preset, &cfg.output.dir) {
        cfg.output.dir = Some(format!("figures/{id}"));
    }
    Ok(cfg)
}

fn init_pool(cfg: &RunConfig) -> Result<(), CliError> {
    let jobs = cfg.run.jobs.unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::new("ThreadPool", e.to_string(), 2))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (scenario, common, preset) = match cli.command {
        Command::Validate(c) => ("validate", c, None),
        Command::Poles(c) => ("poles", c, None),
        Command::DecaySweep(c) => ("decay-sweep", c, None),
        Command::Spontaneous(c) => ("spontaneous", c, None),
        Command::Scatter(c) => ("scatter", c, None),
        Command::Optimize(c) => ("optimize", c, None),
        Command::Oracle(c) => ("oracle", c, None),
        Command::Fano(c) => ("fano", c, None),
        Command::Run(c) => ("run", c, None),
        Command::ReproduceFigure { id, common } => {
            if id == "list" {
                for (id, cfg) in presets::all()? {
                    println!("{id}\t{}\tcriteria {:?}\t{}", cfg.scenario.as_deref().unwrap_or("-"), cfg.criteria, cfg.title.unwrap_or_default());
                }
                return Ok(());
            }
            ("run", common, Some(id))
        }
    };
    let cfg = load(&common, preset.as_deref())?;
    let scenario = if scenario == "run" {
        cfg.scenario.clone().ok_or_else(|| CliError::config("config does not name a scenario"))?
    } else {
        scenario.to_string()
    };
    init_pool(&cfg)?;
    let report = scenarios::run(&scenario, &cfg)?;
    for line in report {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.code)
        }
    }
}
