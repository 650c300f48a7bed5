use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gvi::cli::{self, parse_key_value, CliError, RawConfig};

#[derive(Parser)]
#[command(name = "gvi", version, about = "Integrate constrained Hamiltonian systems and compare methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with one or more methods and write CSV traces.
    Run(RunArgs),
    /// Summarize trace CSV files.
    Summarize {
        /// Trace files written by `run`.
        files: Vec<PathBuf>,
        /// Print CSV instead of a text table.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// INI-style config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated method list.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    decimate: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario override `key=value`, or `method.key=value` for a method setting.
    #[arg(long = "set", value_parser = parse_key_value)]
    sets: Vec<(String, String)>,
    /// Tolerance override `eps_active|eps_tangent|eps_solver=value`.
    #[arg(long = "tol", value_parser = parse_key_value)]
    tols: Vec<(String, String)>,
}

fn run(args: RunArgs) -> Result<i32, CliError> {
    let file = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let flags = RawConfig {
        scenario: args.scenario,
        methods: args.method,
        h: args.h,
        duration: args.duration,
        out: args.out,
        decimate: args.decimate,
        seed: args.seed,
        sets: args.sets,
        tols: args.tols,
    };
    let config = file.merge(flags).into_run_config()?;
    let report = cli::run(&config)?;
    print!("{}", report.summary_text);
    for r in &report.results {
        if let Some(f) = &r.trace.failure {
            eprintln!("{}: {f}", r.label);
        }
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_USAGE } else { cli::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match parsed.command {
        Command::Run(args) => run(args),
        Command::Summarize { files, csv } => cli::summarize(&files).map(|rows| {
            if csv {
                print!("{}", cli::summary_csv(&rows));
            } else {
                print!("{}", cli::summary_text(&rows));
            }
            if rows.iter().any(|r| r.failure_t.is_some()) {
                cli::EXIT_STEP_FAILURE
            } else {
                cli::EXIT_OK
            }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("gvi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
