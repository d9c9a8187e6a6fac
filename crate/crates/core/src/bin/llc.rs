use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use llc_toolkit::design::Series;
use llc_toolkit::io::{
    cmd_design, cmd_simulate, cmd_solve, cmd_sweep, load_config, output_dir, parse_scenario, CliError, ConfigError,
    ProjectConfig, SimMode, SolveRequest, SweepRequest,
};

#[derive(Parser)]
#[command(name = "llc", version, about = "LLC resonant converter design and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Project configuration (JSON). Without it the 48 V to 12 V reference is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; falls back to the config, then $LLC_OUT, then `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved. Simulations are deterministic and ignore it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize and check the tank; writes design.json and gain curves.
    Design {
        #[command(flatten)]
        common: Common,
        /// Component series for rounding: e12, e24 or none.
        #[arg(long)]
        series: Option<Series>,
        #[arg(long)]
        json: bool,
    },
    /// Run a transient, a periodic operating point or a load step.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "pop")]
        mode: SimMode,
        /// Load-step breakpoints (JSON list of {t_start, load}).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Solve the switching frequency for an output target.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        target_vout: Option<f64>,
        #[arg(long)]
        vin: Option<f64>,
        #[arg(long)]
        iout: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Periodic operating points over a normalized-frequency grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.8)]
        from: f64,
        #[arg(long, default_value_t = 1.3)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long)]
        json: bool,
    },
}

fn config(common: &Common) -> Result<ProjectConfig, CliError> {
    match &common.config {
        Some(p) => Ok(load_config(p)?),
        None => Ok(ProjectConfig::reference()),
    }
}

fn run(cli: Cli) -> Result<llc_toolkit::io::Outcome, CliError> {
    match cli.command {
        Command::Design { common, series, .. } => {
            let cfg = config(&common)?;
            cmd_design(&cfg, series, &output_dir(common.out.as_deref(), &cfg))
        }
        Command::Simulate {
            common, mode, scenario, ..
        } => {
            let cfg = config(&common)?;
            let steps = match scenario {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|source| ConfigError::Read {
                        path: p.display().to_string(),
                        source,
                    })?;
                    Some(parse_scenario(&text, &p.display().to_string())?)
                }
                None => None,
            };
            cmd_simulate(&cfg, mode, steps, &output_dir(common.out.as_deref(), &cfg))
        }
        Command::Solve {
            common,
            target_vout,
            vin,
            iout,
            json,
        } => {
            let cfg = config(&common)?;
            cmd_solve(&cfg, SolveRequest { target_vout, vin, iout }, json)
        }
        Command::Sweep {
            common,
            from,
            to,
            points,
            ..
        } => {
            let cfg = config(&common)?;
            let req = SweepRequest {
                fn_lo: from,
                fn_hi: to,
                points,
            };
            cmd_sweep(&cfg, req, &output_dir(common.out.as_deref(), &cfg))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            print!("{}", outcome.message);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("llc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
