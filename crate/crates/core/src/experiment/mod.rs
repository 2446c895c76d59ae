//! Config-driven sweeps that write one row per curve point.

mod config;
mod figures;
mod output;
mod run;

pub use config::{
    field_error, ExperimentConfig, ExperimentKind, Format, GaussianMethod, Grid, ModelSpec, OutputSpec, Source, Spacing,
    Sweep, Units,
};
pub use figures::{figure_config, figure_names, figure_text, FIGURES};
pub use output::{audit, format_float, render, sidecar_path, write_csv, write_json, AuditViolation, Row, COLUMNS};
pub use run::{compute_rows, resolve_output, run_experiment, RunReport, EXIT_CONFIG, EXIT_FLAGGED, EXIT_OK};
