use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use dsco::run::{write_sweep_csv, THREADS_VAR};
use dsco::{load_config, parse_cases, run_to_dir, sweep, thread_count, to_json};
use dsco_core::benchmark::{benchmark, BENCHMARK_NAMES};

/// Topology and fibre-angle optimisation of 2D composite structures.
///
/// Logging goes to stderr and is controlled by RUST_LOG (default `warn`).
#[derive(Debug, Parser)]
#[command(name = "dsco", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a JSON problem file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one case of a built-in benchmark.
    Benchmark {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(BENCHMARK_NAMES))]
        name: String,
        /// Case letter, e.g. `h`.
        #[arg(long)]
        case: char,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several cases of a benchmark and write `case,compliance,iterations`.
    #[command(after_help = format!("Cases run in parallel on {THREADS_VAR} threads (default: all cores)."))]
    Sweep {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(BENCHMARK_NAMES))]
        name: String,
        /// Case list such as `a..n` or `a,b,h`.
        #[arg(long)]
        cases: String,
        /// Write each case's files under this directory and the table to
        /// `sweep.csv` in it, instead of the table to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a problem file and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run { config, out } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            report(run_to_dir(&cfg, &out)?)
        }
        Command::Benchmark { name, case, out } => {
            let b = benchmark(&name, case)?;
            report(run_to_dir(&b.config, &out)?)
        }
        Command::Sweep { name, cases, out } => {
            let cases = parse_cases(&cases)?;
            let rows = sweep(&name, &cases, thread_count(), out.as_deref())?;
            match out {
                Some(dir) => {
                    let path = dir.join("sweep.csv");
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_sweep_csv(&rows, file)?;
                    println!("{}", path.display());
                }
                None => write_sweep_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config).with_context(|| format!("validating {}", config.display()))?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", to_json(&cfg))?;
            Ok(())
        }
    }
}

fn report(r: dsco::RunReport) -> anyhow::Result<()> {
    let s = &r.summary;
    let h = s.h_eta.map_or_else(|| "-".to_string(), |h| format!("{h:.4}"));
    println!(
        "compliance {:.6}  iterations {} (DMO {}, SBPTO {}, CFAO {})  h_eta {h}  volume {:.4}  -> {}",
        s.compliance,
        s.iterations,
        s.stages.dmo,
        s.stages.sbpto,
        s.stages.cfao,
        s.volume_fraction,
        r.out_dir.display()
    );
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
