use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand};
use neumann_lab::parallel;
use neumann_lab::runner::{self, RunOptions, Subcommand};

#[derive(Parser)]
#[command(name = "neumann-lab", version, about = "Numerical checks of gradient and functional inequalities for Neumann semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Run one subcommand (or `all`) on a configuration file.
    Run {
        #[arg(value_parser = parse_subcommand)]
        subcommand: Subcommand,
        config: PathBuf,
        /// Seed for every experiment, replacing the configured ones.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Extrapolate the reflection bias from runs at h and h/2.
        #[arg(long)]
        richardson: bool,
        /// Treat a nonzero normal derivative of phi as a class-D failure.
        #[arg(long)]
        strict_class_d: bool,
        /// Write sample paths of the `simulate` section.
        #[arg(long)]
        dump_paths: bool,
    },
    /// List the subcommands.
    List,
}

fn parse_subcommand(s: &str) -> Result<Subcommand, String> {
    Subcommand::from_name(s).ok_or_else(|| {
        let names: Vec<_> = Subcommand::ALL.iter().map(|c| c.name()).collect();
        format!("expected one of: {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            for s in Subcommand::ALL {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { subcommand, config, seed, jobs, out, richardson, strict_class_d, dump_paths } => {
            let opts = RunOptions { seed, out, richardson, strict_class_d, dump_paths };
            match parallel::with_jobs(jobs, || runner::run_file(&config, subcommand, &opts)) {
                Ok(outcome) => {
                    for note in &outcome.notes {
                        println!("{note}");
                    }
                    println!("{}", outcome.summary(subcommand));
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
