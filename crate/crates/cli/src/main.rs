use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otaform::commands::{cmd_paper, cmd_run, cmd_verify, CliError};
use otaform_core::verify::Corruption;

/// Exit status for a property-suite violation.
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "otaform", version, about = "Over-the-air formation control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its trace and report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the three bundled experiments and summarize them.
    Paper {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a property suite: tau1, lemma1, hull, seminorm, contraction or tracking.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trials: Option<usize>,
        /// Feed the suite deliberately broken matrices.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match cli.command {
        Command::Run { config, out, seed } => match cmd_run(&config, &out, seed) {
            Ok(report) => {
                println!(
                    "{}: {} (mse ratio {:.3e}, ota {}, n2n {}) -> {}",
                    report.scenario.name,
                    report.verdict,
                    report.mse_ratio,
                    report.ledger.ota_count,
                    report.ledger.n2n_count,
                    out.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Paper { out, seed } => match cmd_paper(&out, seed) {
            Ok(summary) => {
                print!("{}", summary.table());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { suite, seed, trials, corrupt } => {
            let corruption = if corrupt { Corruption::InflateFirstRow } else { Corruption::None };
            match cmd_verify(&suite, seed, trials, corruption) {
                Ok(report) => {
                    println!("{report}");
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_VIOLATION)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
