use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use powersim::engine::ArrivalMode;
use powersim_cli::{run, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "powersim", version, about = "Data-center power management simulator")]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Average power, PPW and NPPW over the setup-time x sleep-power grid.
    Tables(Common),
    /// Run every configured policy on the same trace and seed.
    Compare(Common),
    /// NPPW across fleet sizes.
    Scaling(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the `output` key.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evenly spaced arrivals instead of Poisson.
    #[arg(long)]
    deterministic_arrivals: bool,
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_file(&c.config)?;
    if let Some(out) = &c.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.deterministic_arrivals {
        cfg.cluster.arrivals = ArrivalMode::Deterministic;
    }
    Ok(cfg)
}

fn execute(mode: &Mode) -> Result<(), CliError> {
    match mode {
        Mode::Tables(c) => {
            let report = run::run_tables(&load(c)?)?;
            for f in report.files {
                println!("wrote {}", f.display());
            }
        }
        Mode::Compare(c) => {
            let report = run::run_compare(&load(c)?)?;
            print!("{}", report.summary);
            for f in report.files {
                println!("wrote {}", f.display());
            }
        }
        Mode::Scaling(c) => {
            let (rows, path) = run::run_scaling(&load(c)?)?;
            for r in rows {
                println!(
                    "{:>5} {:<14} nppw {:.3}  {:.1} W  t95 {:.1} ms{}",
                    r.fleet_size,
                    r.policy,
                    r.nppw,
                    r.avg_power,
                    r.t95,
                    if r.saturated { "  saturated" } else { "" }
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.mode) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
