use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use apfamily::cli::{cmd_design, cmd_run, cmd_selftest, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};

/// LMS / BNDR-LMS / R-AP system-identification benchmarks.
#[derive(Debug, Parser)]
#[command(name = "apfamily", version)]
struct Cli {
    /// Output directory for `run` (overrides the config's `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for ensemble runs; outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment file and write CSV results.
    Run { config: PathBuf },
    /// Print the coefficients of a windowed-sinc high-pass FIR.
    Design { taps: usize, cutoff_fn: f64 },
    /// Run the built-in randomized consistency checks.
    Selftest,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            });
        }
    };

    match cli.command {
        Command::Run { config } => match cmd_run(&config, cli.out.as_deref(), cli.threads) {
            Ok(output) => {
                for w in &output.warnings {
                    eprintln!("warning: {w}");
                }
                print!("{}", apfamily::cli::summary_csv(&output.reports));
                eprintln!("wrote {}", output.out_dir.display());
                exit(EXIT_OK)
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit(e.exit_code())
            }
        },
        Command::Design { taps, cutoff_fn } => match cmd_design(taps, cutoff_fn) {
            Ok(listing) => {
                print!("{listing}");
                exit(EXIT_OK)
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit(e.exit_code())
            }
        },
        Command::Selftest => {
            let report = cmd_selftest();
            for s in &report.suites {
                println!(
                    "{} {}: {} instances, {} failures, worst {:.3e} (tolerance {:.0e})",
                    if s.passed() { "PASS" } else { "FAIL" },
                    s.name,
                    s.instances,
                    s.failures,
                    s.worst,
                    s.tolerance
                );
            }
            exit(if report.passed() {
                EXIT_OK
            } else {
                EXIT_RUNTIME
            })
        }
    }
}
