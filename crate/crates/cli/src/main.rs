use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use qfim3d_cli::commands;
use qfim3d_cli::output::{pick_format, write_report};
use qfim3d_cli::{init_threads, CliError, ConfigArgs, Format, Report, RunConfig};

/// Quantum and classical Fisher information for 3D localisation and
/// two-emitter resolution.
#[derive(Parser)]
#[command(name = "qfim3d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// 3×3 localisation QFIm and Γ of one emitter
    SingleQfim(ConfigArgs),
    /// Direct-detection CFI against detector distance
    CfiSweep(ConfigArgs),
    /// Transverse QFI of LG modes relative to the Gaussian
    LgTable(ConfigArgs),
    /// QFIm, Γ and ℜ of two incoherent emitters
    TwoQfim(ConfigArgs),
    /// ℜ over a grid of separations
    RMap(ConfigArgs),
    /// Compare nearly coincident emitters with the coincidence limit
    LimitCheck(ConfigArgs),
    /// Closed form vs subspace vs oracle on a test lattice
    Validate(ConfigArgs),
}

type Runner = fn(&RunConfig) -> Result<Report, CliError>;

fn run(cli: Cli) -> Result<bool, CliError> {
    let threads = init_threads()?;
    let (args, runner, fallback): (ConfigArgs, Runner, Format) = match cli.command {
        Command::SingleQfim(a) => (a, commands::single_qfim, Format::Json),
        Command::CfiSweep(a) => (a, commands::cfi_sweep, Format::Csv),
        Command::LgTable(a) => (a, commands::lg_table, Format::Csv),
        Command::TwoQfim(a) => (a, commands::two_qfim, Format::Json),
        Command::RMap(a) => (a, commands::r_map, Format::Csv),
        Command::LimitCheck(a) => (a, commands::limit_check, Format::Csv),
        Command::Validate(a) => (a, commands::validate, Format::Csv),
    };
    let cfg = args.resolve()?;
    let start = Instant::now();
    let report = runner(&cfg)?;
    let format = pick_format(&cfg, fallback);
    if let Some(side) = write_report(
        &report,
        &cfg,
        format,
        start.elapsed().as_secs_f64(),
        threads,
    )? {
        eprintln!(
            "wrote {} (metadata in {})",
            cfg.output.as_ref().unwrap().display(),
            side.display()
        );
    }
    if report.failed {
        eprintln!(
            "numerical check failed: {}",
            serde_json::to_string(&report.diagnostics)?
        );
    }
    Ok(!report.failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
