use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trialoffer::PolicyKind;
use trialoffer_cli::commands;
use trialoffer_cli::config::{ExperimentSpec, SweepCell};
use trialoffer_cli::verify::VerifyConfig;
use trialoffer_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "trialoffer", version, about = "Trial-offer market models, ranking policies and simulations")]
struct Cli {
    /// Directory for command outputs [default: $TRIALOFFER_OUT, else ./results].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a market with continuation to an equivalent single-trial market.
    Reduce {
        market: PathBuf,
        /// Path of the reduced market file.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compute the ranking that maximizes expected purchases.
    Optimize {
        market: PathBuf,
        /// lambda or lambda-bar
        #[arg(long, default_value = "lambda")]
        objective: String,
        /// parametric or brute
        #[arg(long, default_value = "parametric")]
        method: String,
        /// Path of the JSON record.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment spec and write a result store.
    Simulate {
        spec: PathBuf,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Run the property suite over random instances.
    Verify {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// First purchases sampled by the Monte Carlo check.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Emit scatter and trajectory CSVs for one cell of a result store.
    PlotData {
        store: PathBuf,
        #[arg(long, default_value = "quality")]
        policy: String,
        /// Continuation cell; omit both for the baseline.
        #[arg(long, requires = "r")]
        rho: Option<f64>,
        #[arg(long, requires = "rho")]
        r: Option<f64>,
        /// Keep every k-th trajectory sample.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

fn run(cli: Cli) -> Result<String> {
    let out_dir = cli.out_dir.as_deref();
    match cli.command {
        Command::Reduce { market, output } => {
            let output = output.unwrap_or_else(|| {
                commands::reduced_path(&market, &commands::default_out_dir(out_dir))
            });
            commands::reduce(&market, &output)
        }
        Command::Optimize {
            market,
            objective,
            method,
            output,
        } => {
            let objective = commands::parse_objective(&objective)?;
            let method = commands::parse_method(&method)?;
            let output = output.unwrap_or_else(|| {
                commands::optimize_path(&market, &commands::default_out_dir(out_dir))
            });
            commands::optimize(&market, objective, method, &output)
        }
        Command::Simulate { spec, quiet } => {
            let spec = ExperimentSpec::load(&spec)?;
            let out = commands::simulate_out_dir(out_dir, &spec);
            let progress = move |line: &str| {
                if !quiet {
                    eprintln!("{line}");
                }
            };
            commands::simulate(&spec, &out, &progress).map(|(_, text)| text)
        }
        Command::Verify {
            instances,
            seed,
            samples,
        } => {
            let cfg = VerifyConfig {
                instances,
                seed,
                monte_carlo_samples: samples,
            };
            commands::verify(&cfg).1
        }
        Command::PlotData {
            store,
            policy,
            rho,
            r,
            stride,
        } => {
            let policy: PolicyKind = policy.parse()?;
            let cell = rho.zip(r).map(|(rho, r)| SweepCell { rho, r });
            commands::plot_data(&store, policy, cell, out_dir, stride)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let CliError::Verification(report) = &e {
                println!("{report}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
