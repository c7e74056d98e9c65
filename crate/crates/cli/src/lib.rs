//! `taskseq` command line: validate, run and train scenario files, and host
//! single engines for remote pipelines.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use taskseq_core::engines::{local_engine, EngineRole};
use taskseq_core::scenario::{
    load_scenario, run_scenario, train_scenario, validate_scenario, RunOptions, ScenarioError,
};
use taskseq_core::wire::{default_port, serve_engine};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCENARIO: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "taskseq", version, about = "Task-sequencing manipulation simulator")]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; replaces the scenario's output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Training worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file and report every diagnostic.
    Validate { file: PathBuf },
    /// Run an execute-mode scenario and write its trajectory log.
    Run { file: PathBuf },
    /// Train a scenario's train_task and freeze the parameters.
    Train { file: PathBuf },
    /// Host one engine role over TCP until killed.
    ServeEngine {
        #[arg(long)]
        role: EngineRole,
        /// Listening port (default: TASKSEQ_PORT or 7471; 0 picks a free port).
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn report(e: &ScenarioError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCENARIO } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    let opts = RunOptions {
        out_dir: cli.out.clone(),
        seed: cli.seed,
        workers: cli.workers,
    };

    match cli.command {
        Command::Validate { file } => {
            let loaded = match load_scenario(&file) {
                Ok(l) => l,
                Err(e) => return report(&e),
            };
            let diagnostics = validate_scenario(&loaded.scenario);
            for d in &diagnostics {
                eprintln!("{}: {d}", file.display());
            }
            if diagnostics.is_empty() {
                println!("{}: ok", file.display());
                EXIT_OK
            } else {
                EXIT_SCENARIO
            }
        }
        Command::Run { file } => {
            let result = load_scenario(&file).and_then(|l| run_scenario(&l, &opts));
            match result {
                Ok(summary) => {
                    println!(
                        "episodes {} successes {} success_rate {}",
                        summary.episodes, summary.successes, summary.success_rate
                    );
                    EXIT_OK
                }
                Err(e) => report(&e),
            }
        }
        Command::Train { file } => {
            let result = load_scenario(&file).and_then(|l| train_scenario(&l, &opts));
            match result {
                Ok(outcome) => {
                    println!(
                        "iterations {} success_rate {} params {}",
                        outcome.report.iterations.len(),
                        outcome.evaluation.success_rate,
                        outcome.params_path.display()
                    );
                    EXIT_OK
                }
                Err(e) => report(&e),
            }
        }
        Command::ServeEngine { role, port, host } => {
            let endpoint = format!("{host}:{}", port.unwrap_or_else(default_port));
            match serve_engine(local_engine(role), &endpoint) {
                Ok(handle) => {
                    println!("serving {role} on {}", handle.local_addr());
                    let _ = std::io::stdout().flush();
                    handle.join();
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: cannot serve {role} on {endpoint}: {e}");
                    EXIT_RUNTIME
                }
            }
        }
    }
}
