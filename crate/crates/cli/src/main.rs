use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wtlab::config::RunConfig;
use wtlab::pipeline::{self, Outcome};
use wtlab::{Error, Result};

/// Wave-train modulation laboratory.
#[derive(Debug, Parser)]
#[command(name = "wtlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the base profile and continue the wave-train family.
    Profile(Common),
    /// Floquet–Bloch stability report.
    Spectrum(Common),
    /// Modulation coefficients and their cross-checks.
    Coeffs(Common),
    /// Full reaction–diffusion run.
    Simulate(Common),
    /// Phase-equation and Burgers predictions from the initial phase.
    Predict(Common),
    /// Re-analyse an existing run directory.
    Analyze {
        /// Run directory written by `simulate` or `verify`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Simulate, analyse and report on the decay estimates.
    Verify(Common),
    /// Toy-model experiments.
    Toy(Common),
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: runs/<name>-<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let base = match (&self.config, &self.preset) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, Some(n)) => RunConfig::preset(n)?,
            (None, None) => return Err(Error::Usage("pass --config PATH or --preset NAME".into())),
        };
        base.with_overrides(&self.overrides)
    }
}

fn set_threads(n: usize) -> Result<()> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    Ok(())
}

type Stage = fn(&RunConfig, &std::path::Path) -> Result<Outcome>;

fn run_stage(common: &Common, name: &str, stage: Stage) -> Result<Outcome> {
    set_threads(common.threads)?;
    let cfg = common.load()?;
    let out = common.out.clone().unwrap_or_else(|| pipeline::default_out(&cfg, name));
    stage(&cfg, &out)
}

fn dispatch(cli: Cli) -> Result<Option<Outcome>> {
    let outcome = match cli.command {
        Command::Profile(c) => run_stage(&c, "profile", pipeline::profile)?,
        Command::Spectrum(c) => run_stage(&c, "spectrum", pipeline::spectrum)?,
        Command::Coeffs(c) => run_stage(&c, "coeffs", pipeline::coeffs)?,
        Command::Simulate(c) => run_stage(&c, "simulate", pipeline::simulate)?,
        Command::Predict(c) => run_stage(&c, "predict", pipeline::predict)?,
        Command::Verify(c) => run_stage(&c, "verify", pipeline::verify)?,
        Command::Toy(c) => run_stage(&c, "toy", pipeline::toy)?,
        Command::Analyze {
            run,
            threads,
            overrides,
        } => {
            set_threads(threads)?;
            pipeline::analyze(&run, &overrides)?
        }
        Command::Presets => {
            for (name, _) in wtlab::config::PRESETS {
                println!("{name}");
            }
            return Ok(None);
        }
    };
    Ok(Some(outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(outcome)) => {
            match serde_json::to_string_pretty(&outcome) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("cannot print summary: {e}"),
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}: a check failed", outcome.command);
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
