//! Experiment harness: configuration, command dispatch, sweeps, validation and output.

pub mod commands;
pub mod config;
pub mod emit;
pub mod phase;
pub mod validate;

pub use commands::{run, RunOutcome};
pub use config::{
    parse_config, Command, ExperimentConfig, OutputFormat, ParamRecord, RawConfig, Scheme, ValidateLevel,
};
pub use emit::{emit, Output, Table};
pub use phase::{run_phase_diagram, PhaseDiagramGrid, PhaseDiagramSpec};
pub use validate::{run_validate, run_validate_with, ValidationReport, INVARIANTS};
