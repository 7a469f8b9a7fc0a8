//! `logchoquard`: ground states, spectra, reduction tables and concentration
//! sweeps from the command line.

mod cmd;
mod error;
mod manifest;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::params::Params;

const AFTER_HELP: &str = "\
Parameters resolve as: command-line flag, then --config file, then default.
The config file is flat `key = value` text; keys are the long flag names
(dashes or underscores), e.g.

    a = 1.0
    rmax = 20
    xi-grid = 9

Unknown keys are rejected. Potential files use the keys kind (quadratic-min,
quadratic-max, double-well, custom-coefficients), v0, x0 (as `x,y`), h11, h12, h22,
flat_radius and separation.

Exit codes: 0 success, 1 computational failure, 2 usage error, 3 I/O error.
Every run writes a JSON manifest next to its primary output (or at
--manifest). Kernel spectra are cached in $LOGCHOQUARD_CACHE when set.";

#[derive(Parser, Debug)]
#[command(name = "logchoquard", version, about = "Planar logarithmic Choquard equation toolkit", after_help = AFTER_HELP)]
struct Cli {
    /// key = value file with parameter defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// error, warn, info, debug or trace
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    /// Memory guard on nx · ny [default: 16777216]
    #[arg(long, global = true)]
    max_cells: Option<usize>,
    /// Manifest location [default: next to the primary output]
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Groundstate(cmd::groundstate::GroundstateArgs),
    Spectrum(cmd::spectrum::SpectrumArgs),
    Convolve(cmd::convolve::ConvolveArgs),
    Reduce(cmd::reduce::ReduceArgs),
    Concentrate(cmd::concentrate::ConcentrateArgs),
    Validate(cmd::validate::ValidateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Groundstate(_) => "groundstate",
            Command::Spectrum(_) => "spectrum",
            Command::Convolve(_) => "convolve",
            Command::Reduce(_) => "reduce",
            Command::Concentrate(_) => "concentrate",
            Command::Validate(_) => "validate",
        }
    }
}

fn dispatch(cli: &Cli, m: &mut RunManifest) -> CliResult<()> {
    let mut p = Params::new(cli.config.as_deref(), cli.max_cells)?;
    if let Some(c) = &cli.config {
        m.input(c)?;
    }
    let res = match &cli.command {
        Command::Groundstate(a) => cmd::groundstate::run(a, &mut p, m),
        Command::Spectrum(a) => cmd::spectrum::run(a, &mut p, m),
        Command::Convolve(a) => cmd::convolve::run(a, &mut p, m),
        Command::Reduce(a) => cmd::reduce::run(a, &mut p, m),
        Command::Concentrate(a) => cmd::concentrate::run(a, &mut p, m),
        Command::Validate(a) => cmd::validate::run(a, &mut p, m),
    };
    m.config = p.snapshot.clone();
    res?;
    let failed = m.failed_required();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        Err(CliError::Compute(format!("required checks failed: {}", names.join(", "))))
    }
}

/// Manifest for a command line that did not parse: placed at `--manifest`
/// when given, else as `<subcommand>.manifest.json` in the working directory.
fn parse_failure_manifest(e: &clap::Error) -> RunManifest {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let known: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
    let name = args.iter().find(|a| known.contains(a)).map_or("logchoquard", String::as_str);
    let pinned = args.iter().enumerate().find_map(|(i, a)| match a.strip_prefix("--manifest") {
        Some("") => args.get(i + 1).cloned(),
        Some(rest) => rest.strip_prefix('=').map(str::to_string),
        None => None,
    });
    let mut m = RunManifest::new(PathBuf::from(format!("{name}.manifest.json")), name);
    if let Some(p) = pinned {
        m.path = PathBuf::from(p);
    }
    m.result("parse_error", e.to_string().trim_end());
    m
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            return match parse_failure_manifest(&e).write(&Err(CliError::usage(e.kind().to_string()))) {
                Ok(()) => ExitCode::from(2),
                Err(_) => ExitCode::from(3),
            };
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();

    let name = cli.command.name();
    let mut m = RunManifest::new(PathBuf::from(format!("{name}.manifest.json")), name);
    if let Some(path) = &cli.manifest {
        m.path = path.clone();
        m.pinned = true;
    }
    let outcome = dispatch(&cli, &mut m);
    if let Err(e) = m.write(&outcome) {
        eprintln!("error: cannot write manifest {}: {e}", m.path.display());
        return ExitCode::from(3);
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
