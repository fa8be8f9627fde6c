use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chemo_cli::{describe_best, parse_config, run_jeff, run_optimize, run_simulate, run_validate, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "chemo", version, about = "Tumor / immune / drug reaction-diffusion solver and schedule optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trajectory.csv and snapshots.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output.directory` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize the boundary injection schedule.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and the solver invariants on its run.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Periodic-treatment scenario with transient tumor growth.
    Jeff {
        #[arg(long)]
        out: PathBuf,
    },
}

fn out_dir(config: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out.or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output.directory".into()))
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = parse_config(&config)?;
            let dir = out_dir(&cfg, out)?;
            let traj = run_simulate(&cfg, &dir)?;
            let last = traj.final_record();
            println!(
                "simulated to t = {} ({} steps); final masses N {:.6e} T {:.6e} I {:.6e} U {:.6e}",
                last.t,
                traj.records.len() - 1,
                last.mass[0],
                last.mass[1],
                last.mass[2],
                last.mass[3]
            );
            for w in &traj.stability.warnings {
                eprintln!("warning: {w}");
            }
            report_written(&dir);
        }
        Command::Optimize { config, out } => {
            let cfg = parse_config(&config)?;
            let dir = out_dir(&cfg, out)?;
            let result = run_optimize(&cfg, &dir)?;
            print!("{}", describe_best(&cfg, &result)?);
            report_written(&dir);
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            run_validate(&cfg)?;
        }
        Command::Jeff { out } => {
            let summary = run_jeff(&out)?;
            let passed = summary.envelope.iter().filter(|&&ok| ok).count();
            println!("envelope check for j >= 5: {passed}/{} passed", summary.envelope.len());
            report_written(&out);
            if passed != summary.envelope.len() {
                return Err(CliError::Validation("envelope check".into()));
            }
        }
    }
    Ok(())
}

fn report_written(dir: &Path) {
    println!("output written to {}", dir.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
