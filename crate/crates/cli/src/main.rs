use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaoslearn::experiment::{
    emit_split_study, export_transform, run_benchmark, run_circuit, run_optimize, run_scan, write_artifacts, Benchmark,
    ExperimentConfig, Report,
};
use chaoslearn::hyperopt::Strategy;
use chaoslearn::readout::SelectionMode;
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "chaoslearn", version, about = "Chaotic feature transforms with linear readouts")]
struct Cli {
    /// TOML file merged over the benchmark's preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the train/test split and the random search.
    #[arg(long, global = true)]
    seed: Option<u32>,
    /// Iteration selection: `paper` picks on the test set, `honest` on a
    /// validation split of the training rows.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Directory for report.json and CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the report as JSON instead of a summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Paper,
    Honest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Grid,
    Random,
    CoarseToFine,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Baseline and transformed readouts for one benchmark.
    Benchmark { name: Option<Benchmark> },
    /// Exponent vs accuracy over a ρ grid.
    Scan {
        name: Option<Benchmark>,
        #[arg(long)]
        rho_min: Option<f64>,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        rho_step: Option<f64>,
    },
    /// Search transformer parameters.
    Optimize {
        name: Option<Benchmark>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
    },
    /// Benchmark with the analog circuit model as transformer.
    Circuit { name: Option<Benchmark> },
    /// Mean and spread over repeated random splits.
    SplitStudy {
        name: Option<Benchmark>,
        #[arg(long)]
        n_splits: Option<usize>,
    },
    /// Write the trajectory tensor of the prepared data.
    Transform {
        name: Option<Benchmark>,
        #[arg(long)]
        export: PathBuf,
    },
    /// Repeat the run recorded in a report.json.
    Rerun { report: PathBuf },
    /// Print the effective configuration as TOML.
    Config { name: Option<Benchmark> },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] chaoslearn::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Overlays `over` onto `base`, descending into tables.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn load_config(name: Option<Benchmark>, file: Option<&Path>) -> Result<ExperimentConfig> {
    load_config_or(name, file, None)
}

/// `fallback` applies when neither the command line nor the file names a
/// benchmark.
fn load_config_or(name: Option<Benchmark>, file: Option<&Path>, fallback: Option<Benchmark>) -> Result<ExperimentConfig> {
    let overlay = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            Some(text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let from_file = match overlay.as_ref().and_then(|t| t.get("benchmark")) {
        Some(v) => Some(
            v.clone()
                .try_into::<Benchmark>()
                .map_err(|e| CliError::Config(format!("benchmark: {e}")))?,
        ),
        None => None,
    };
    let benchmark = match (name, from_file) {
        (Some(n), Some(f)) if n != f => {
            return Err(CliError::Config(format!("command names {n} but the config file names {f}")));
        }
        (Some(n), _) | (None, Some(n)) => n,
        (None, None) => fallback.ok_or_else(|| CliError::Config("no benchmark given on the command line or in the config".into()))?,
    };
    let preset = ExperimentConfig::preset(benchmark);
    let Some(overlay) = overlay else {
        return Ok(preset);
    };
    // Transformer and readout lists replace the preset's rather than merge
    // element-wise; tables merge recursively.
    let mut value = toml::Value::try_from(&preset).map_err(|e| CliError::Config(e.to_string()))?;
    merge(&mut value, toml::Value::Table(overlay));
    value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

fn apply_flags(cfg: &mut ExperimentConfig, cli: &Cli) {
    if let Some(seed) = cli.seed {
        cfg.split.seed = seed;
        cfg.optimize.seed = seed;
    }
    if let Some(m) = cli.mode {
        cfg.mode = match m {
            ModeArg::Paper => SelectionMode::Paper,
            ModeArg::Honest => SelectionMode::Honest,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
}

fn finish(report: &Report, cfg: &ExperimentConfig, json: bool) -> Result<()> {
    if json {
        println!("{}", report.to_json()?);
    } else {
        for line in report.summary() {
            println!("{line}");
        }
    }
    if let Some(dir) = &cfg.output_dir {
        for p in write_artifacts(report, dir)? {
            log::info!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn execute(kind: &str, cfg: &ExperimentConfig) -> Result<Report> {
    Ok(match kind {
        "benchmark" => run_benchmark(cfg)?,
        "scan" => run_scan(cfg)?,
        "optimize" => run_optimize(cfg)?,
        "circuit" => run_circuit(cfg)?,
        "split-study" => emit_split_study(cfg, cfg.n_splits)?,
        other => return Err(CliError::Config(format!("unknown run kind '{other}'"))),
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg_file = cli.config.as_deref();
    let (kind, mut cfg) = match &cli.command {
        Command::Benchmark { name } => ("benchmark", load_config(*name, cfg_file)?),
        Command::Circuit { name } => ("circuit", load_config(*name, cfg_file)?),
        Command::Scan { name, rho_min, rho_max, rho_step } => {
            let mut cfg = load_config_or(*name, cfg_file, Some(Benchmark::Iris))?;
            if let Some(v) = rho_min {
                cfg.scan.rho_min = *v;
            }
            if let Some(v) = rho_max {
                cfg.scan.rho_max = *v;
            }
            if let Some(v) = rho_step {
                cfg.scan.rho_step = *v;
            }
            ("scan", cfg)
        }
        Command::Optimize { name, budget, strategy } => {
            let mut cfg = load_config(*name, cfg_file)?;
            if let Some(b) = budget {
                cfg.optimize.budget = *b;
            }
            if let Some(s) = strategy {
                cfg.optimize.strategy = match s {
                    StrategyArg::Grid => Strategy::Grid,
                    StrategyArg::Random => Strategy::Random,
                    StrategyArg::CoarseToFine => Strategy::CoarseToFine,
                };
            }
            ("optimize", cfg)
        }
        Command::SplitStudy { name, n_splits } => {
            let mut cfg = load_config(*name, cfg_file)?;
            if let Some(n) = n_splits {
                cfg.n_splits = *n;
            }
            ("split-study", cfg)
        }
        Command::Transform { name, export } => {
            let mut cfg = load_config(*name, cfg_file)?;
            apply_flags(&mut cfg, &cli);
            cfg.validate()?;
            let t = export_transform(&cfg, export)?;
            let (n, v, s, _) = t.dims();
            println!("wrote {} ({n} samples x {v} variables x {s} steps)", export.display());
            return Ok(());
        }
        Command::Config { name } => {
            let mut cfg = load_config(*name, cfg_file)?;
            apply_flags(&mut cfg, &cli);
            cfg.validate()?;
            print!("{}", toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?);
            return Ok(());
        }
        Command::Rerun { report } => {
            let text = std::fs::read_to_string(report).map_err(chaoslearn::Error::from)?;
            let previous = Report::from_json(&text)?;
            let kind = match previous.experiment_id.split_once(':') {
                Some((k, _)) => k.to_owned(),
                None => "benchmark".to_owned(),
            };
            let mut cfg = previous.config;
            cfg.output_dir = None;
            apply_flags(&mut cfg, &cli);
            cfg.validate()?;
            let report = execute(&kind, &cfg)?;
            return finish(&report, &cfg, cli.json);
        }
    };
    apply_flags(&mut cfg, &cli);
    cfg.validate()?;
    let report = execute(kind, &cfg)?;
    finish(&report, &cfg, cli.json)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
