use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ordercomplete_cli::{exit, run_pipeline, verify, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "ordercomplete",
    version,
    about = "Order completion solver for nonlinear PDE systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the global pair and the refinement stages, then write certificates.
    Run {
        /// Problem file.
        spec: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        gamma: f64,
        #[arg(long, default_value_t = 5)]
        stages: usize,
        /// Points per axis; overrides the problem file.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        eps_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        skip_assumption_check: bool,
        /// Do not write CSV samples.
        #[arg(long)]
        no_samples: bool,
        /// Only re-check the artifacts already in `--out`.
        #[arg(long)]
        verify_only: bool,
    },
    /// Re-check a certificate directory from its artifacts.
    Verify { dir: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return code(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::PASS
            });
        }
    };
    let outcome = match cli.command {
        Command::Run {
            spec,
            gamma,
            stages,
            grid,
            eps_max,
            seed,
            out,
            skip_assumption_check,
            no_samples,
            verify_only,
        } => {
            let cfg = RunConfig {
                gamma,
                stages,
                grid,
                eps_max,
                seed,
                skip_assumption_check,
                emit_samples: !no_samples,
                verify_only,
                ..RunConfig::new(spec, out)
            };
            run_pipeline(&cfg).map(|o| (o.verdict, o.summary))
        }
        Command::Verify { dir } => verify(&dir).map(|o| (o.pass, o.report)),
    };
    match outcome {
        Ok((pass, text)) => {
            print!("{text}");
            code(if pass { exit::PASS } else { exit::CERTIFICATE })
        }
        Err(e) => {
            eprintln!("error: {e}");
            code(e.exit_code())
        }
    }
}
