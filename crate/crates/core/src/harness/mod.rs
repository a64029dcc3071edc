//! Experiment orchestration: configuration, convergence tables, law
//! validation and the command-line interface.

mod cli;
mod config;
mod convergence;
mod validate;

pub use cli::cli_main;
pub use config::{Engine, ExperimentConfig, PdeSection, StrongSection};
pub use convergence::{
    csv_string, emit_csv, format_sig10, pde_reference, run_convergence, ConvergenceReport, ConvergenceRow,
    ReportMetadata, CSV_HEADER,
};
pub use validate::{dyadic_lags, validate_law, CheckOutcome, ValidationConfig, ValidationReport};
