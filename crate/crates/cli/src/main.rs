mod design;
mod error;
mod fits;
mod output;
mod synth;
mod textfile;

use std::path::PathBuf;
use std::process::ExitCode;

use antenna_core::materials::MaterialLibrary;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "antenna", version, about = "Membrane antenna design and emitter spectroscopy analysis")]
struct Cli {
    /// Directory of `wavelength_nm n k` tables replacing the bundled ones
    #[arg(long, global = true, env = "ANTENNA_MATERIALS_DIR")]
    materials_dir: Option<PathBuf>,
    /// Worker thread cap (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Reflectivity spectrum of a stack: CSV wavelength_nm,R
    Reflectivity(design::ReflectivityArgs),
    /// Collected-power enhancement spectrum of an embedded dipole
    Enhance(design::EnhanceArgs),
    /// Weighted enhancement over a parameter grid
    Sweep(design::SweepArgs),
    /// Maximize weighted enhancement over bounded design parameters
    Optimize(design::OptimizeArgs),
    /// Ratio of weighted enhancements in two spectral windows
    WindowRatio(design::WindowRatioArgs),
    /// Two-resonance ODMR fit
    FitOdmr(fits::FitOdmrArgs),
    /// Three-level autocorrelation fit
    FitG2(fits::FitG2Args),
    /// Saturation fit with errors in both variables
    FitSaturation(fits::FitSaturationArgs),
    /// Fit, filter and summarize PLE scans
    PleAnalyze(fits::PleAnalyzeArgs),
    /// Polarization preselection of emitter traces
    Preselect(fits::PreselectArgs),
    /// Seeded synthetic datasets
    Synth(synth::SynthArgs),
    /// Re-execute the configuration echoed in an output file
    #[serde(skip)]
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone)]
struct RerunArgs {
    /// CSV or JSON output carrying a config echo
    #[arg(long)]
    from: PathBuf,
    /// Main output path (directory for synth ple-scan)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Secondary output (sweep summary, ple-analyze line table)
    #[arg(long)]
    extra_out: Option<PathBuf>,
}

/// What gets echoed into every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    materials_dir: Option<PathBuf>,
    #[serde(flatten)]
    command: Command,
}

impl Command {
    fn resolve(&mut self) -> Result<(), CliError> {
        match self {
            Command::Reflectivity(a) => a.resolve(),
            Command::Enhance(a) => a.resolve(),
            Command::Sweep(a) => a.resolve(),
            Command::Optimize(a) => a.resolve(),
            Command::WindowRatio(a) => a.resolve(),
            Command::FitOdmr(a) => a.resolve(),
            Command::FitG2(a) => a.resolve(),
            Command::FitSaturation(a) => a.resolve(),
            Command::PleAnalyze(a) => a.resolve(),
            Command::Preselect(a) => a.resolve(),
            Command::Synth(a) => a.resolve(),
            Command::Rerun(_) => Ok(()),
        }
    }

    fn set_outputs(&mut self, out: Option<PathBuf>, extra: Option<PathBuf>) {
        match self {
            Command::Reflectivity(a) => a.out = out,
            Command::Enhance(a) => a.out = out,
            Command::Sweep(a) => {
                a.out = out;
                a.summary = extra;
            }
            Command::Optimize(a) => a.out = out,
            Command::WindowRatio(a) => a.out = out,
            Command::FitOdmr(a) => a.out = out,
            Command::FitG2(a) => a.out = out,
            Command::FitSaturation(a) => a.out = out,
            Command::PleAnalyze(a) => {
                a.out = out;
                a.lines_out = extra;
            }
            Command::Preselect(a) => a.out = out,
            Command::Synth(a) => a.out = out,
            Command::Rerun(_) => {}
        }
    }
}

fn library(dir: &Option<PathBuf>) -> Result<MaterialLibrary, CliError> {
    match dir {
        Some(d) => {
            if !d.is_dir() {
                return Err(CliError::usage(format!("materials dir {} does not exist", d.display())));
            }
            Ok(MaterialLibrary::load_dir(d)?)
        }
        None => Ok(MaterialLibrary::bundled()),
    }
}

fn execute(mut cfg: RunConfig) -> Result<(), CliError> {
    cfg.command.resolve()?;
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let needs_lib = matches!(
        cfg.command,
        Command::Reflectivity(_) | Command::Enhance(_) | Command::Sweep(_) | Command::Optimize(_) | Command::WindowRatio(_)
    );
    let lib = if needs_lib { library(&cfg.materials_dir)? } else { MaterialLibrary::default() };
    match &cfg.command {
        Command::Reflectivity(a) => a.run(&lib, &echo),
        Command::Enhance(a) => a.run(&lib, &echo),
        Command::Sweep(a) => a.run(&lib, &echo),
        Command::Optimize(a) => a.run(&lib, &echo),
        Command::WindowRatio(a) => a.run(&lib, &echo),
        Command::FitOdmr(a) => a.run(&echo),
        Command::FitG2(a) => a.run(&echo),
        Command::FitSaturation(a) => a.run(&echo),
        Command::PleAnalyze(a) => a.run(&echo),
        Command::Preselect(a) => a.run(&echo),
        Command::Synth(a) => a.run(&echo),
        Command::Rerun(_) => unreachable!(),
    }
}

fn rerun(args: RerunArgs) -> Result<(), CliError> {
    let value = output::read_config(&args.from)?;
    let mut cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| CliError::usage(format!("{}: unusable config echo: {e}", args.from.display())))?;
    cfg.command.set_outputs(args.out, args.extra_out);
    execute(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::failed("threads", e))?;
    }
    match cli.command {
        Command::Rerun(a) => rerun(a),
        command => execute(RunConfig { materials_dir: cli.materials_dir, command }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.to_string().trim_end());
            eprintln!("{}", err.record());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
