use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "anonradio",
    version,
    about = "Leader election in anonymous radio networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// One stable summary line.
    Text,
    /// Structured JSON document.
    Doc,
    /// Graphviz DOT.
    Dot,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether a leader can be elected and print the verdict.
    Classify {
        path: PathBuf,
        /// Write the partition trace document here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Exit with status 2 on a NO verdict.
        #[arg(long)]
        strict_exit: bool,
    },
    /// Run the canonical protocol and report the elected leader.
    Elect {
        path: PathBuf,
        /// Write the execution trace document here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        round_cap: Option<u64>,
    },
    /// Simulate the canonical protocol round by round.
    Simulate {
        path: PathBuf,
        /// Write the execution trace document here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        round_cap: Option<u64>,
    },
    /// Write a configuration file for a named family or a random instance.
    Gen {
        #[command(subcommand)]
        family: Family,
        /// Output file; standard output when omitted.
        #[arg(long, short, global = true)]
        output: Option<PathBuf>,
    },
    /// Cross-check the classifier against simulated histories.
    Check {
        #[arg(required_unless_present = "random", conflicts_with = "random")]
        path: Option<PathBuf>,
        /// Batch mode over seeded random configurations.
        #[arg(long, num_args = 4, value_names = ["N_MAX", "TAG_MAX", "COUNT", "SEED"])]
        random: Option<Vec<u64>>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Debug, Subcommand)]
pub enum Family {
    /// Four-node path, feasible, needs at least m rounds.
    Hm { m: u64 },
    /// Four-node path, infeasible.
    Sm { m: u64 },
    /// Path of 4m+1 nodes whose center is elected after m iterations.
    Gm { m: usize },
    /// Connected G(n, p) graph with uniform tags in 0..=max_tag.
    Random {
        n: usize,
        p: f64,
        max_tag: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Exit statuses shared by every subcommand.
pub mod status {
    pub const OK: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const INFEASIBLE: u8 = 2;
    pub const MISMATCH: u8 = 3;
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                status::ERROR
            } else {
                status::OK
            });
        }
    };
    let outcome = match cli.command {
        Command::Classify {
            path,
            trace,
            format,
            strict_exit,
        } => commands::classify(&path, trace.as_deref(), format, strict_exit),
        Command::Elect {
            path,
            trace,
            format,
            round_cap,
        } => commands::elect(&path, trace.as_deref(), format, round_cap),
        Command::Simulate {
            path,
            trace,
            format,
            round_cap,
        } => commands::simulate(&path, trace.as_deref(), format, round_cap),
        Command::Gen { family, output } => commands::generate(&family, output.as_deref()),
        Command::Check {
            path,
            random,
            format,
        } => match random {
            Some(params) => commands::check_batch(&params, format),
            None => commands::check_file(&path.expect("clap requires a path"), format),
        },
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(status::ERROR)
        }
    }
}
