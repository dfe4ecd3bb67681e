//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::grid::angular_derivative;

pub mod io;
pub mod run;
pub mod scenario;

pub use io::{load_field, load_field_on, save_field, FieldHeader};
pub use run::{run_scenario, Manifest, Outcome, RunOptions};
pub use scenario::{expected_counts, scenario_hash, Experiment, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ksym",
    version,
    about = "k-invariant solutions of semilinear problems on disks and annuli, and their symmetry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a scenario and write its outputs.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Seed for the sampled residual directions.
        #[arg(long, default_value_t = 0)]
        seed_rng: u64,
    },
    /// Parse and validate a scenario without computing.
    Validate { scenario: PathBuf },
    /// Print the header and basic statistics of a saved field.
    Inspect { field: PathBuf },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::Format { .. }
        | Error::TruncatedPayload { .. }
        | Error::Io(_)
        | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { scenario, out, workers, seed_rng } => {
            let (sc, hash) = match Scenario::load(&scenario) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("{}: {e}", scenario.display());
                    return EXIT_CONFIG;
                }
            };
            let opts = RunOptions { out, workers, seed_rng };
            match run_scenario(&sc, &hash, &opts) {
                Ok(outcome) => {
                    for r in &outcome.manifest.runs {
                        match &r.error {
                            Some(e) => eprintln!("{}: failed: {e}", r.name),
                            None => println!("{}: ok", r.name),
                        }
                    }
                    if let Some(m) = &outcome.manifest.multiplicity {
                        println!(
                            "distinct solutions: {} (expected at least {})",
                            m.count_distinct, m.expected.rotational
                        );
                    }
                    println!("wrote {}", opts.out.join("report.json").display());
                    if outcome.failed > 0 {
                        EXIT_NUMERICAL
                    } else {
                        EXIT_OK
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    exit_code(&e)
                }
            }
        }
        Command::Validate { scenario } => match Scenario::load(&scenario) {
            Ok((sc, hash)) => {
                println!("{}: ok ({:?}, sha256 {hash})", scenario.display(), sc.experiment);
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}: {e}", scenario.display());
                EXIT_CONFIG
            }
        },
        Command::Inspect { field } => match load_field(&field) {
            Ok(u) => {
                let g = u.grid();
                let (lo, hi) =
                    u.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                println!("domain   {:?} [{}, {}]", g.domain().kind, g.domain().r_inner, g.domain().r_outer);
                println!("grid     {} x {}", g.n_r(), g.n_theta());
                println!("range    [{lo:e}, {hi:e}]");
                println!("l2       {:e}", u.l2_norm());
                let un = u.sup_norm();
                println!("|u_t|/|u| {:e}", if un == 0.0 { 0.0 } else { angular_derivative(&u).sup_norm() / un });
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}: {e}", field.display());
                EXIT_CONFIG
            }
        },
    }
}
