//! Project configuration, file outputs and the command implementations
//! behind the `llc` binary.

pub mod commands;
pub mod config;
pub mod csv;
pub mod svg;

pub use commands::{
    build_report, cmd_design, cmd_simulate, cmd_solve, cmd_sweep, output_dir, solve_operating_point, CliError, Outcome,
    SimMode, SolveRequest, SolveResult, SweepRequest,
};
pub use config::{load_config, parse_config, parse_scenario, ConfigError, ProjectConfig};
pub use csv::{read_waveform_csv, write_waveform_csv};
