mod commands;
mod config;
mod csv_out;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, UsageError};

#[derive(Parser)]
#[command(name = "impc", version, about = "Instant MPC experiments: closed-loop simulation, stability certificates and latency benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate each case and write one CSV per case plus summary.txt.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write a gnuplot script, plot.gp.
        #[arg(long)]
        plot: bool,
    },
    /// Report the composite-matrix certificate for every flow case.
    Certify {
        #[command(flatten)]
        common: Common,
    },
    /// Time one control decision of the baseline and of each flow case.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Timed decisions per controller.
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Built-in problem (dc-motor).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// JSON experiment file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Case: mpc | impc:<alpha>,<beta> | impc_gamma:<alpha>,<beta>,<gamma> | impc_proj:<alpha>,<beta>. Repeatable.
    #[arg(long = "case", value_name = "SPEC")]
    cases: Vec<String>,
    /// Existing output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Coefficient of the state block: theorem | proof.
    #[arg(long, value_name = "MODE")]
    coeff: Option<String>,
    /// Flow controller used for every flow case: impc | impc_projected | impc_gamma.
    #[arg(long, value_name = "KIND")]
    controller: Option<String>,
    /// Integrator step in seconds.
    #[arg(long, value_name = "STEP")]
    h: Option<f64>,
    /// Simulated horizon in seconds.
    #[arg(long = "T", value_name = "HORIZON")]
    t_end: Option<f64>,
    /// Storage weight δ of the plant.
    #[arg(long, value_name = "DELTA")]
    delta: Option<f64>,
}

impl Common {
    fn overrides(self, repetitions: Option<usize>) -> Overrides {
        Overrides {
            preset: self.preset,
            config: self.config,
            cases: self.cases,
            out: self.out,
            coeff: self.coeff,
            controller: self.controller,
            h: self.h,
            t_end: self.t_end,
            delta: self.delta,
            repetitions,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<String> {
    match cli.command {
        Command::Simulate { common, plot } => {
            let settings = config::resolve(&common.overrides(None))?;
            commands::simulate_cmd(&settings, plot)
        }
        Command::Certify { common } => {
            let settings = config::resolve(&common.overrides(None))?;
            commands::certify_cmd(&settings)
        }
        Command::Bench { common, repetitions } => {
            let settings = config::resolve(&common.overrides(repetitions))?;
            commands::bench_cmd(&settings)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("impc: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("impc: {e:#}");
            ExitCode::from(1)
        }
    }
}
