use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use faraday_core::engine::Engine;
use faraday_sim::commands::{cmd_optimize, cmd_spectrum, cmd_sweep, cmd_validate, CliError};
use faraday_sim::config::{ConfigError, Preset, RunConfig};

#[derive(Parser)]
#[command(name = "faraday-sim", version, about = "Nonlinear Faraday rotation in dense Rb vapor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (`section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; overrides `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Parameter bundle applied before the config file.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Worker threads; falls back to FARADAY_SIM_JOBS.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Magnetic-field sweep written as CSV.
    Sweep(Common),
    /// Operating-point search for minimal B_min.
    Optimize(Common),
    /// Cross-model consistency suites.
    Validate(Common),
    /// Velocity-averaged susceptibility against laser detuning, as CSV.
    Spectrum(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Analytic,
    Multilevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig2a,
    Fig2b,
    Fig2c,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let path = common.config.as_ref().ok_or_else(|| ConfigError {
        key: "--config".into(),
        reason: "required".into(),
        line: None,
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        key: "--config".into(),
        reason: format!("cannot read {}: {e}", path.display()),
        line: None,
    })?;
    let preset = common.preset.map(|p| match p {
        PresetArg::Fig2a => Preset::Fig2a,
        PresetArg::Fig2b => Preset::Fig2b,
        PresetArg::Fig2c => Preset::Fig2c,
    });
    let mut cfg = RunConfig::parse(&text, preset)?;
    if let Some(e) = common.engine {
        cfg.engine = match e {
            EngineArg::Analytic => Engine::Analytic,
            EngineArg::Multilevel => Engine::Multilevel,
        };
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.display().to_string());
    }
    Ok(cfg)
}

fn jobs(common: &Common) -> Result<Option<usize>, CliError> {
    let bad = |v: String| ConfigError {
        key: "--jobs".into(),
        reason: format!("expected a positive integer, got `{v}`"),
        line: None,
    };
    let n = match common.jobs {
        Some(n) => Some(n),
        None => match std::env::var("FARADAY_SIM_JOBS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| bad(v.clone()))?),
            Err(_) => None,
        },
    };
    match n {
        Some(0) => Err(bad("0".into()).into()),
        n => Ok(n),
    }
}

fn write_out(path: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Sweep(c) | Command::Optimize(c) | Command::Validate(c) | Command::Spectrum(c) => c,
    };
    if let Some(n) = jobs(common)? {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Sweep(c) => {
            let cfg = load(c)?;
            let out = cmd_sweep(&cfg)?;
            let path = cfg.output.clone().unwrap_or_else(|| "faraday_curve.csv".into());
            write_out(&path, &out.curve.to_csv())?;
            print!("{}", out.summary);
            println!("wrote {path}");
            if out.curve.failures() > 0 {
                return Err(CliError::Numerical(faraday_core::Error::Optimization(format!(
                    "{} sweep points failed, see the status column",
                    out.curve.failures()
                ))));
            }
        }
        Command::Optimize(c) => {
            let cfg = load(c)?;
            let report = cmd_optimize(&cfg)?;
            print!("{report}");
            if let Some(path) = &cfg.output {
                write_out(path, &report)?;
            }
        }
        Command::Validate(_) => {
            let (report, ok) = cmd_validate();
            print!("{report}");
            if !ok {
                return Err(CliError::Validation);
            }
        }
        Command::Spectrum(c) => {
            let cfg = load(c)?;
            let csv = cmd_spectrum(&cfg)?;
            let path = cfg.output.clone().unwrap_or_else(|| "spectrum.csv".into());
            write_out(&path, &csv)?;
            println!("wrote {path}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("faraday-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
