use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serfsim_cli::{
    apply_overrides, parse_config, run_command, CliError, Command, OutputFormat, Overrides,
};

/// Spin-dynamics simulation, Kalman filtering, spin-noise spectroscopy and
/// entanglement witnesses for continuously probed hot vapors.
#[derive(Parser)]
#[command(name = "serfsim", version, about)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides SERFSIM_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base random seed (overrides experiment.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for scan points.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output formats.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[command(subcommand)]
    command: CommandArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    #[value(name = "csv")]
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::CsvSvg => OutputFormat::CsvSvg,
        }
    }
}

#[derive(Subcommand, Clone, Copy)]
enum CommandArg {
    /// Sample a spin trajectory and its polarimeter record.
    Simulate,
    /// Kalman-filter a photocurrent record.
    Filter,
    /// Spin-noise spectra with Lorentzian line fits.
    Spectrum,
    /// Density calibration from linewidth-vs-frequency data.
    Calibrate,
    /// Squeezing/entanglement witness at the configured operating point.
    Witness,
    /// Conditioned variance across a Larmor-frequency sweep.
    ScanField,
    /// Post-measurement variance decay across a gradient sweep.
    ScanGradient,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Simulate => Command::Simulate,
            CommandArg::Filter => Command::Filter,
            CommandArg::Spectrum => Command::Spectrum,
            CommandArg::Calibrate => Command::Calibrate,
            CommandArg::Witness => Command::Witness,
            CommandArg::ScanField => Command::ScanField,
            CommandArg::ScanGradient => Command::ScanGradient,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required; see --help".into()))?;
    let mut cfg = parse_config(&config_path)?;
    apply_overrides(
        &mut cfg,
        &Overrides {
            out: cli.out.map(|p| p.display().to_string()),
            seed: cli.seed,
            format: cli.format.map(Into::into),
        },
    );
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure --jobs: {e}")))?;
    }

    let manifest = run_command(cli.command.into(), &cfg)?;
    println!(
        "{}: wrote {} files to {} (manifest.json, config {})",
        manifest.command,
        manifest.files.len(),
        cfg.output.directory,
        &manifest.config_hash[..12]
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
