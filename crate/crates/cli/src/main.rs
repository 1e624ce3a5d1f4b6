use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thermoproc_cli::config::{
    CoherentParams, Experiment, ExperimentConfig, Fig2Params, Fig3Params, Grid, IncoherentParams, SweepParams,
};
use thermoproc_cli::error::{CliError, Result};
use thermoproc_cli::validation::{self, MODULES};
use thermoproc_cli::{output, run_experiment};

#[derive(Parser)]
#[command(name = "thermoproc", version, about = "Thermal-process experiments and validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the validation suite and print a JSON summary.
    Validate {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(MODULES))]
        only: Option<String>,
        /// Replaces every absolute tolerance in the suite.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Also write the full report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Produce a figure's data with the default parameters, adjustable by flags.
    Fig {
        #[command(subcommand)]
        figure: Figure,
    },
    /// Check the files in a run directory against its manifest.
    Verify { dir: PathBuf },
}

#[derive(Subcommand)]
enum Figure {
    /// Extraction error against W.
    Fig2(Fig2Args),
    /// Qutrit reachable regions.
    Fig3(Fig3Args),
    /// Ground population over cooling rounds.
    Cooling(CoolingArgs),
    /// β-swap with memory over (γ, p0, d).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct OutArg {
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Fig2Args {
    #[arg(long, default_value_t = std::f64::consts::LN_2)]
    beta_e: f64,
    #[arg(long, default_value_t = 0.015)]
    w_start: f64,
    #[arg(long, default_value_t = 3.0)]
    w_stop: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 5, 20])]
    d: Vec<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct Fig3Args {
    #[arg(long, default_value_t = 0.75)]
    gamma: f64,
    #[arg(long, default_value_t = thermoproc::reachable::DEFAULT_DEPTH)]
    depth: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParadigmArg {
    Coherent,
    Incoherent,
}

#[derive(Args)]
struct CoolingArgs {
    #[arg(long, value_enum, default_value = "coherent")]
    paradigm: ParadigmArg,
    /// Coherent only.
    #[arg(long, default_value_t = 0.75)]
    gamma: f64,
    /// Incoherent only: βE of the target qubit.
    #[arg(long, default_value_t = 1.0)]
    beta_e: f64,
    /// Incoherent only: β𝓔 of the auxiliary.
    #[arg(long, default_value_t = 2.0)]
    beta_script_e: f64,
    /// Incoherent only: hot inverse temperature over cold.
    #[arg(long, default_value_t = 0.2)]
    beta_hot: f64,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8])]
    d: Vec<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.55, 0.65, 0.75, 0.85, 0.95])]
    gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.9])]
    p0: Vec<f64>,
    #[arg(long, default_value_t = 12)]
    d_max: usize,
    #[command(flatten)]
    out: OutArg,
}

fn figure_config(figure: Figure) -> ExperimentConfig {
    let (experiment, out) = match figure {
        Figure::Fig2(a) => (
            Experiment::Fig2(Fig2Params {
                beta_e: a.beta_e,
                beta_w: Grid {
                    start: a.w_start,
                    stop: a.w_stop,
                    points: a.points,
                },
                d: a.d,
            }),
            a.out.out,
        ),
        Figure::Fig3(a) => (
            Experiment::Fig3(Fig3Params {
                gamma: a.gamma,
                depth: a.depth,
            }),
            a.out.out,
        ),
        Figure::Cooling(a) => {
            let e = match a.paradigm {
                ParadigmArg::Coherent => Experiment::CoolingCoherent(CoherentParams {
                    gamma: a.gamma,
                    rounds: a.rounds.unwrap_or(CoherentParams::default().rounds),
                    d: a.d,
                }),
                ParadigmArg::Incoherent => Experiment::CoolingIncoherent(IncoherentParams {
                    beta_e: a.beta_e,
                    beta_script_e: a.beta_script_e,
                    beta_hot: a.beta_hot,
                    rounds: a.rounds.unwrap_or(IncoherentParams::default().rounds),
                    d: a.d,
                }),
            };
            (e, a.out.out)
        }
        Figure::Sweep(a) => (
            Experiment::BetaSwapSweep(SweepParams {
                gamma: a.gamma,
                p0: a.p0,
                d_max: a.d_max,
            }),
            a.out.out,
        ),
    };
    ExperimentConfig::new(experiment, out)
}

fn run_config(config: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let manifest = run_experiment(config, out)?;
    let dir = out.unwrap_or(&config.output_dir);
    for entry in &manifest.outputs {
        println!("{}", dir.join(&entry.file).display());
    }
    Ok(())
}

fn validate(only: Option<String>, tolerance: Option<f64>, json: Option<PathBuf>) -> Result<()> {
    if let Some(t) = tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::config("--tolerance", format!("must be finite and non-negative, got {t}")));
        }
    }
    let pool = thermoproc_cli::experiments::thread_pool()?;
    let report = pool.install(|| validation::run(only.as_deref(), tolerance));
    if let Some(path) = json {
        let f = output::json_file("report", &report);
        std::fs::write(&path, f.bytes).map_err(|e| CliError::io(&path, e))?;
    }
    let failures: Vec<_> = report
        .failures()
        .map(|c| serde_json::json!({"module": c.module, "name": c.name, "measured": c.measured, "detail": c.detail}))
        .collect();
    let summary = serde_json::json!({
        "passed": report.passed,
        "total": report.total,
        "failed": report.failed,
        "tolerance_override": report.tolerance_override,
        "failures": failures,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    if report.passed {
        Ok(())
    } else {
        Err(CliError::ValidationFailed {
            failed: report.failed,
            total: report.total,
        })
    }
}

fn verify(dir: &Path) -> Result<()> {
    let bad = output::verify_manifest(dir)?;
    if bad.is_empty() {
        println!("ok");
        Ok(())
    } else {
        for f in &bad {
            println!("mismatch: {f}");
        }
        Err(CliError::ValidationFailed {
            failed: bad.len(),
            total: bad.len(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => ExperimentConfig::load(&config).and_then(|c| run_config(&c, out.as_deref())),
        Command::Validate { only, tolerance, json } => validate(only, tolerance, json),
        Command::Fig { figure } => run_config(&figure_config(figure), None),
        Command::Verify { dir } => verify(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
