//! `skinmesh`: safe-interval tables, parameter feasibility, growth
//! simulations and randomized property checks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skinmesh::feasibility::ElementSizes;
use skinmesh::verify::{Population, VerifyMode};
use skinmesh::Error;

use commands::{FeasibleGrid, VerifyArgs};
use config::Settings;

const EXIT_INPUT: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_SAFETY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "skinmesh",
    version,
    about = "Meshing of growing skin surfaces with relaxed scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Safe intervals of edges and triangles for a range of size ratios.
    Tables {
        #[command(flatten)]
        settings: Settings,
        /// Distances from the unacceptable threshold, as multiples of it.
        #[arg(
            long = "a",
            value_delimiter = ',',
            default_value = "1.0,1.5,2.0,2.5,3.0,3.5,4.0"
        )]
        a_values: Vec<f64>,
        /// Print CSV instead of aligned tables.
        #[arg(long)]
        csv: bool,
    },
    /// Feasible region of (C, Q) as a CSV grid, or a condition report for
    /// the configured parameters.
    Feasible {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, default_value_t = 0.01)]
        c_min: f64,
        #[arg(long, default_value_t = 0.12)]
        c_max: f64,
        #[arg(long, default_value_t = 1.0)]
        q_min: f64,
        #[arg(long, default_value_t = 3.0)]
        q_max: f64,
        #[arg(long, default_value_t = 56)]
        c_steps: usize,
        #[arg(long, default_value_t = 51)]
        q_steps: usize,
        /// Element sizes `r_ab,r_bc,r_wx,r_abc,r_vwx` for Conditions (IV)-(V).
        #[arg(long, value_delimiter = ',', num_args = 5)]
        sizes: Option<Vec<f64>>,
        /// Report the conditions at this many Q values in [q0, q1] instead.
        #[arg(long, value_name = "SAMPLES")]
        check: Option<usize>,
    },
    /// Grow the skin of a sphere set over a time window.
    Grow {
        /// `.spheres` file with one `x y z w` record per line.
        spheres: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Randomized checks of the motion bounds.
    Verify {
        /// speed, length-lemma, height-lemma or reflection.
        mode: Option<VerifyMode>,
        #[command(flatten)]
        settings: Settings,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// neighbours or mesh-sized.
        #[arg(long)]
        population: Option<Population>,
        /// Re-run a single recorded trial.
        #[arg(long, value_name = "FILE")]
        replay: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) | Error::Degenerate { .. } => {
            EXIT_INPUT
        }
        Error::SafetyViolation(_) => EXIT_SAFETY,
        _ => EXIT_NUMERIC,
    }
}

fn run(cli: Cli) -> skinmesh::Result<bool> {
    match cli.command {
        Command::Tables {
            settings,
            a_values,
            csv,
        } => commands::tables(&settings.resolve()?, &a_values, csv).map(|_| true),
        Command::Feasible {
            settings,
            c_min,
            c_max,
            q_min,
            q_max,
            c_steps,
            q_steps,
            sizes,
            check,
        } => {
            let sizes = sizes.map(|s| ElementSizes {
                r_ab: s[0],
                r_bc: s[1],
                r_wx: s[2],
                r_abc: s[3],
                r_vwx: s[4],
            });
            let grid = FeasibleGrid {
                c_range: (c_min, c_max),
                q_range: (q_min, q_max),
                steps: (c_steps, q_steps),
                sizes,
            };
            commands::feasible(&settings.resolve()?, &grid, check).map(|_| true)
        }
        Command::Grow { spheres, settings } => {
            commands::grow_cmd(&settings.resolve()?, &spheres).map(|_| true)
        }
        Command::Verify {
            mode,
            settings,
            trials,
            population,
            replay,
        } => {
            let args = VerifyArgs {
                mode,
                trials,
                population,
                replay,
            };
            commands::verify_cmd(&settings.resolve()?, &args)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_SAFETY),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
