//! `adaptrand`: simulate response-adaptive dose-finding trials and check the
//! design's analytical guarantees numerically.
//!
//! Exit codes: 0 success, 1 invalid configuration or flags, 2 runtime
//! failure, 3 verification FAIL.

use std::path::PathBuf;
use std::process::ExitCode;

use adaptrand_cli::{
    execute_run, execute_verify, CliError, PresetName, RunOptions, RunSource, VerifyArgs,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adaptrand",
    version,
    about = "Response-adaptive block randomization trial simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate designs and write operating-characteristic reports
    Run(RunArgs),
    /// Numerically check the design's analytical guarantees
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Args)]
struct RunArgs {
    /// JSON design configuration file
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in scenario preset: table1, table2, table3, figure1,
    /// case-study, or figure2
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Simulated trials per design
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    iterations: u64,

    /// Master seed; reports are bit-identical for a fixed seed
    #[arg(long, value_name = "U64", default_value_t = 20240815)]
    seed: u64,

    /// Worker threads (0 = library default); never affects results
    #[arg(long, value_name = "N", default_value_t = 0)]
    workers: usize,

    /// Output directory (default: $ADAPTRAND_OUT, else the working
    /// directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Conditional rejection probability decreases in the first-stage weight
    Lemma1 {
        /// Final-test critical value
        #[arg(long, default_value_t = 1.959963984540054)]
        c: f64,
        /// Selection threshold offset
        #[arg(long = "c-prime", default_value_t = 0.0)]
        c_prime: f64,
        /// Number of interior weight grid points
        #[arg(long, default_value_t = 17)]
        grid: usize,
        /// Monte Carlo cross-check draws (0 = quadrature only)
        #[arg(long, default_value_t = 0)]
        draws: u64,
        #[arg(long, default_value_t = 20240815)]
        seed: u64,
    },
    /// Two-arm selection: rejection probability never exceeds the level
    Theorem1 {
        /// Number of random parameter tuples
        #[arg(long, default_value_t = 100)]
        sweep: u64,
        #[arg(long, default_value_t = 20240815)]
        seed: u64,
    },
    /// Three-arm selection: level control and the middle-selection term
    Theorem3 {
        /// Monte Carlo draws
        #[arg(long, default_value_t = 10_000_000)]
        draws: u64,
        #[arg(long, default_value_t = 20240815)]
        seed: u64,
    },
    /// Larger stage-2 blocks never increase the first-stage weight
    W1Ordering {
        /// Number of random size/scaling tuples
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 20240815)]
        seed: u64,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("ADAPTRAND_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let source = match (args.config, args.preset) {
        (Some(path), None) => RunSource::ConfigFile(path),
        (None, Some(name)) => RunSource::Preset(name.parse::<PresetName>()?),
        _ => {
            return Err(CliError::Validation(
                "exactly one of --config or --preset is required".to_string(),
            ))
        }
    };
    let written = execute_run(&RunOptions {
        source,
        iterations: args.iterations,
        seed: args.seed,
        workers: args.workers,
        out_dir: out_dir(args.out),
    })?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn verify(command: VerifyCommand) -> Result<(), CliError> {
    let args = match command {
        VerifyCommand::Lemma1 {
            c,
            c_prime,
            grid,
            draws,
            seed,
        } => VerifyArgs::Lemma1 {
            c,
            c_prime,
            grid,
            draws,
            seed,
        },
        VerifyCommand::Theorem1 { sweep, seed } => VerifyArgs::Theorem1 { sweep, seed },
        VerifyCommand::Theorem3 { draws, seed } => VerifyArgs::Theorem3 { draws, seed },
        VerifyCommand::W1Ordering { samples, seed } => VerifyArgs::W1Ordering { samples, seed },
    };
    let outcome = execute_verify(&args)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    if outcome.pass {
        Ok(())
    } else {
        Err(CliError::VerificationFailed(
            "one or more checks failed".to_string(),
        ))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // flag validation problem.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Verify(command) => verify(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
