use std::path::PathBuf;
use std::process::ExitCode;

use cavmerge::cli::{read_config, run_config, run_example, seed_dir, CliError, EXAMPLES};
use clap::{Parser, Subcommand};

/// Optimal merging control for connected automated vehicles.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed-loop simulation described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce one of the canned scenarios as plot data.
    Example {
        /// One of the names listed by `--help`.
        #[arg(long_help = format!("One of: {}", EXAMPLES.join(", ")))]
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parse a config file and print it back in canonical form.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    // Usage errors count as configuration errors, not planner failures.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out } => {
            let mut cfg = read_config(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            for r in run_config(&cfg)? {
                let o = &r.metrics.overall;
                println!(
                    "seed {}: {} vehicles, mean travel time {:.3} s, mean objective {:.3}, min slack {:.3e} m -> {}",
                    r.seed,
                    o.count,
                    o.mean_travel_time,
                    o.mean_objective,
                    r.min_safety_slack,
                    seed_dir(&cfg, r.seed).display()
                );
            }
        }
        Command::Example { name, out } => {
            for (k, v) in run_example(&name, &out)? {
                println!("{k}={v}");
            }
        }
        Command::Check { config } => print!("{}", read_config(&config)?.serialize()),
    }
    Ok(())
}
