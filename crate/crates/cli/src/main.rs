//! `flowprobe`: gridsearches, Gabor fits, phase maps and aperture sweeps.
//!
//! Exit codes: 0 success, 1 computational failure, 2 usage or config error.

mod aperture;
mod config;
mod fit;
mod grid;
mod phase;
mod provider;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::aperture::{ApertureArgs, BarsArgs};
use crate::config::{load_section, resolve, CliError, CliResult, GlobalSettings, RunDir};
use crate::fit::FitArgs;
use crate::grid::GridArgs;
use crate::phase::PhaseArgs;

#[derive(Debug, Parser)]
#[command(name = "flowprobe", version, about = "Spectral receptive-field mapping of spatiotemporal filter banks")]
struct Cli {
    /// Root under which each run gets its own directory.
    #[arg(long, global = true, env = "FLOWPROBE_OUT", default_value = "flowprobe-runs")]
    out: PathBuf,
    /// Run directory name [default: the command name].
    #[arg(long, global = true)]
    run: Option<String>,
    /// TOML file with one table per command; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Translation, dilation or rotation gridsearch, or its manifest.
    Grid(GridArgs),
    /// Profiles, fits, bandwidths and summary quartiles.
    Fit(FitArgs),
    /// ψ, power and response maps over lattice frequencies.
    Phase(PhaseArgs),
    /// EPE-versus-scale sweep of a flow source on moving bars.
    Aperture(ApertureArgs),
    /// Export bar frame pairs and ground-truth flow.
    Bars(BarsArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Grid(_) => "grid",
            Command::Fit(_) => "fit",
            Command::Phase(_) => "phase",
            Command::Aperture(_) => "aperture",
            Command::Bars(_) => "bars",
        }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    global: GlobalSettings,
}

impl Context<'_> {
    fn resolve<A: Serialize + DeserializeOwned>(&self, args: &A) -> CliResult<A> {
        resolve(args, load_section(self.cli.config.as_deref(), self.cli.command.name())?)
    }

    fn open_run<A: Serialize>(&self, args: &A) -> CliResult<RunDir> {
        let run = RunDir::create(&self.cli.out, &self.global.run, self.cli.force)?;
        run.echo_config(self.cli.command.name(), &self.global, args)?;
        Ok(run)
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let ctx = Context {
        cli,
        global: GlobalSettings {
            out: cli.out.clone(),
            run: cli.run.clone().unwrap_or_else(|| cli.command.name().into()),
            threads,
            flowprobe_version: env!("CARGO_PKG_VERSION"),
        },
    };
    match &cli.command {
        Command::Grid(a) => {
            let a = ctx.resolve(a)?;
            if let Some(path) = &a.export_manifest {
                let spec = config::grid_spec(a.spec.as_deref(), a.kind)?;
                return grid::export(&a, &spec, path);
            }
            // validate before a run directory is created
            config::grid_spec(a.spec.as_deref(), a.kind)?;
            grid::run(&a, &ctx.open_run(&a)?)
        }
        Command::Fit(a) => {
            let a = ctx.resolve(a)?;
            if a.export_profiles.is_some() {
                return fit::run(&a, None);
            }
            fit::run(&a, Some(&ctx.open_run(&a)?))
        }
        Command::Phase(a) => {
            let a = ctx.resolve(a)?;
            if a.builtin.is_none() && a.filter.is_none() {
                return Err(CliError::Usage("phase needs --builtin or --filter".into()));
            }
            if let Some(f) = &a.filter {
                config::require_file(f, "filter volume")?;
            }
            phase::run(&a, &ctx.open_run(&a)?)
        }
        Command::Aperture(a) => {
            let a = ctx.resolve(a)?;
            if a.flow_dir.is_none() == a.oracle.is_none() {
                return Err(CliError::Usage("aperture needs exactly one of --flow-dir and --oracle".into()));
            }
            if let Some(d) = a.flow_dir.as_ref().filter(|d| !d.is_dir()) {
                return Err(CliError::Usage(format!("flow directory {} does not exist", d.display())));
            }
            aperture::run(&a, &ctx.open_run(&a)?)
        }
        Command::Bars(a) => {
            let a = ctx.resolve(a)?;
            aperture::bars(&a, &ctx.open_run(&a)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
