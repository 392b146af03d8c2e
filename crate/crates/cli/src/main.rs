use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use overfit_sim::harness::{self, ExperimentKind};
use overfit_sim::Error;

/// Exit status for configs that fail to load or validate.
const EXIT_SCHEMA: u8 = 2;
/// Exit status for failures while an experiment runs.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "overfit-sim", version, about = "Seeded flat-minimum selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output root; overrides $OVERFIT_SIM_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and list the defaults it would receive.
    Validate { config: PathBuf },
    /// List the experiment kinds a config may name.
    ListExperiments,
}

fn report_error(stage: &str, err: &Error, code: u8) -> ExitCode {
    let body = serde_json::json!({
        "stage": stage,
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": code,
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                emit(&format!("{:<20} {}", k.name(), k.description()));
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let report = harness::validate(&config);
            emit(&report.to_string());
            match &report.outcome {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => report_error("validate", e, EXIT_SCHEMA),
            }
        }
        Command::Run { config, out } => {
            let cfg = match harness::load_config(&config) {
                Ok(c) => c,
                Err(e) => return report_error("config", &e, EXIT_SCHEMA),
            };
            let root = out.unwrap_or_else(harness::output_root);
            match harness::run(&cfg, &root) {
                Ok(record) => {
                    emit(&serde_json::to_string_pretty(&record).unwrap_or_default());
                    ExitCode::SUCCESS
                }
                Err(e) => report_error("run", &e, EXIT_RUNTIME),
            }
        }
    }
}
