use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use svkit_core::scenario::{self, OutputFormat, RunOptions};

#[derive(Parser)]
#[command(name = "svkit", version, about = "Subunit vectors, reachability and viscosity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["structured-text", "csv"])]
        format: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List built-in families, operators, functions and task kinds.
    Catalog,
}

fn init_threads() {
    if let Some(n) = std::env::var("SVKIT_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_threads();
    match cli.command {
        Command::Catalog => {
            print!("{}", scenario::catalog_text());
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            format,
            seed,
        } => {
            let opts = RunOptions {
                out_dir: Some(out.unwrap_or_else(|| PathBuf::from("."))),
                format: format.map(|f| f.parse::<OutputFormat>().expect("validated by clap")),
                seed,
            };
            match scenario::run_file(&config, &opts) {
                Ok(report) => {
                    for t in &report.tasks {
                        println!("[{:02}] {:<22} {:?}: {}", t.index, t.kind, t.outcome, t.message);
                    }
                    println!(
                        "{}: {} passed, {} failed, {} errors",
                        report.scenario, report.passed, report.failed, report.errors
                    );
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
