//! `floqnet`: Floquet analysis, master stability functions and network
//! simulation from the command line.
//!
//! Exit codes: 0 on success, 1 on numerical failure or failed verification,
//! 2 on configuration or usage errors.

mod commands;
mod config;
mod output;
mod verify;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::{ExperimentConfig, Spacing};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(floqnet::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

impl From<floqnet::Error> for CliError {
    fn from(e: floqnet::Error) -> Self {
        use floqnet::Error as E;
        match e {
            E::InvalidParam(_)
            | E::InvalidAdjacency(_)
            | E::DimensionMismatch(_)
            | E::InvalidInput(_)
            | E::DisconnectedGraph { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "floqnet",
    version,
    about = "Floquet multipliers, master stability functions and coupled-oscillator simulation"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name; overrides the config.
    #[arg(long)]
    model: Option<String>,
    /// Model parameter as key=value; repeatable, overrides the config.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate the attracting limit cycle and report its period.
    LimitCycle {
        #[command(flatten)]
        model: ModelArgs,
        /// Uniform phase samples along the cycle.
        #[arg(long, default_value_t = 512)]
        samples: usize,
        /// CSV of the cycle samples (JSON sidecar alongside).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monodromy matrix, multipliers and the determinant identity at one kappa.
    Floquet {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        kappa: f64,
        /// Coupling mask diagonal, e.g. 0,1.
        #[arg(long, value_delimiter = ',')]
        mask: Option<Vec<f64>>,
        /// Also compute the Lyapunov-Floquet factorization.
        #[arg(long)]
        lf: bool,
        /// CSV of multipliers (JSON sidecar alongside).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the master stability function over a kappa grid.
    Msf {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        mask: Option<Vec<f64>>,
        #[arg(long)]
        kappa_min: Option<f64>,
        #[arg(long)]
        kappa_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_enum)]
        spacing: Option<SpacingArg>,
        #[arg(long, default_value = "msf.csv")]
        out: PathBuf,
        /// Write a gnuplot script next to the CSV.
        #[arg(long)]
        emit_plot_script: bool,
    },
    /// Simulate a network of coupled oscillators.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "simulate.csv")]
        out: PathBuf,
        #[arg(long)]
        emit_plot_script: bool,
        /// Include the MSF synchronization prediction in the summary.
        #[arg(long)]
        predict: bool,
    },
    /// Run the invariant suite and print a pass/fail table.
    Verify {
        /// Restrict checks to the configured model and graph.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Van der Pol only, fewer cases.
        #[arg(long)]
        quick: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Negate the coupling in variational integrations (mutation test).
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpacingArg {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|e| format!("parameter '{k}': {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn load_config(path: Option<&Path>) -> Result<Option<ExperimentConfig>, CliError> {
    path.map(ExperimentConfig::load).transpose()
}

impl ModelArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = load_config(self.config.as_deref())?
            .unwrap_or_else(|| ExperimentConfig::from_model("vdp", BTreeMap::new()));
        if let Some(name) = &self.model {
            if *name != cfg.model.name {
                cfg.model.params.clear();
                cfg.initial.clear();
                cfg.coupling.mask = None;
            }
            cfg.model.name = name.clone();
        }
        for (k, v) in &self.params {
            cfg.model.params.insert(k.clone(), *v);
        }
        Ok(cfg)
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FLOQNET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "FLOQNET_THREADS: '{raw}' is not a non-negative integer"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("FLOQNET_THREADS: {e}")))?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::LimitCycle {
            model,
            samples,
            out,
        } => commands::limit_cycle(&model.resolve()?, samples, out.as_deref()),
        Command::Floquet {
            model,
            kappa,
            mask,
            lf,
            out,
        } => commands::floquet(&model.resolve()?, kappa, mask, lf, out.as_deref()),
        Command::Msf {
            model,
            mask,
            kappa_min,
            kappa_max,
            points,
            spacing,
            out,
            emit_plot_script,
        } => {
            let mut cfg = model.resolve()?;
            if mask.is_some() {
                cfg.coupling.mask = mask;
            }
            let m = &mut cfg.msf;
            m.kappa_min = kappa_min.unwrap_or(m.kappa_min);
            m.kappa_max = kappa_max.unwrap_or(m.kappa_max);
            m.points = points.unwrap_or(m.points);
            if let Some(s) = spacing {
                m.spacing = match s {
                    SpacingArg::Linear => Spacing::Linear,
                    SpacingArg::Log => Spacing::Log,
                };
            }
            commands::msf(&cfg, &out, emit_plot_script)
        }
        Command::Simulate {
            config,
            out,
            emit_plot_script,
            predict,
        } => commands::simulate(
            &ExperimentConfig::load(&config)?,
            &out,
            emit_plot_script,
            predict,
        ),
        Command::Verify {
            config,
            quick,
            format,
            report,
            inject_sign_flip,
        } => {
            let opts = verify::VerifyOptions {
                quick,
                flip_coupling_sign: inject_sign_flip,
                config: load_config(config.as_deref())?,
            };
            let result = verify::run(&opts)?;
            if let Some(path) = &report {
                output::write_json(path, &result)?;
            }
            match format {
                Format::Text => output::emit(&verify::text_table(&result))?,
                Format::Json => output::emit(&format!(
                    "{}\n",
                    serde_json::to_string_pretty(&result)
                        .map_err(|e| CliError::Io(e.to_string()))?
                ))?,
            }
            let failed = result.checks.iter().filter(|c| !c.passed).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(CliError::ChecksFailed(failed))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("floqnet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
