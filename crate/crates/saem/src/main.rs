use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "saem", version, about = "Stochastic-approximation EM experiments on reference models")]
#[command(after_long_help = saem::config::keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured replications; writes trace_<r>.csv and report.json.
    #[command(after_long_help = saem::config::keys_help())]
    Run {
        config: PathBuf,
        /// Replications run in parallel at most this many at a time.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides `output.dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check score and information against finite differences at theta0.
    #[command(after_long_help = saem::config::keys_help())]
    Validate { config: PathBuf },
    /// Solve the observed likelihood by direct maximization and exact EM.
    #[command(after_long_help = saem::config::keys_help())]
    Oracle { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, jobs, output_dir } => saem::run_experiment(&config, output_dir.as_deref(), jobs.max(1))
            .map(|o| format!("wrote {}", o.output_dir.join("report.json").display())),
        Command::Validate { config } => saem::validate_experiment(&config),
        Command::Oracle { config } => saem::oracle_experiment(&config),
    };
    match result {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("saem: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
