use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jflow::geometry::dump;
use jflow::scenario::{compare_limits, parse_scenario, run_scenario, ParseOptions};
use jflow::Error;

#[derive(Parser)]
#[command(name = "jflow", version, about = "J-flow and critical-equation scenarios on the flat 2-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every enabled stage of a scenario and write its reports.
    Run {
        scenario: PathBuf,
        /// Output directory; overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat unknown keys as errors.
        #[arg(long)]
        strict: bool,
        /// `dotted.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        strict: bool,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare two field dumps up to an additive constant.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

fn report(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            out,
            strict,
            overrides,
        } => {
            let options = ParseOptions {
                strict,
                overrides,
                base_dir: None,
            };
            let parsed = match parse_scenario(&scenario, &options) {
                Ok(p) => p,
                Err(e) => return report(&e),
            };
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            let outcome = match run_scenario(&parsed, out.as_deref()) {
                Ok(o) => o,
                Err(e) => return report(&e),
            };
            let s = &outcome.summary;
            println!("{}", serde_json::to_string_pretty(s).expect("summary serializes"));
            if s.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed verdicts: {}", s.failed_verdicts().join(", "));
                ExitCode::from(1)
            }
        }
        Command::Validate {
            scenario,
            strict,
            overrides,
        } => {
            let options = ParseOptions {
                strict,
                overrides,
                base_dir: None,
            };
            match parse_scenario(&scenario, &options) {
                Ok(p) => {
                    for w in &p.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("ok {} ({})", p.config.name, p.hash);
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            }
        }
        Command::Compare {
            first,
            second,
            tolerance,
        } => {
            let fields = dump::load(&first).and_then(|a| Ok((a, dump::load(&second)?)));
            let result = fields.and_then(|(a, b)| compare_limits(&a, &b, None, tolerance));
            match result {
                Ok(c) => {
                    println!("{}", serde_json::to_string_pretty(&c).expect("comparison serializes"));
                    if c.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => report(&e),
            }
        }
    }
}
