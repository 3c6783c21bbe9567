//! Scenario definitions and the bi-fidelity experiment pipeline.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod scenario;

pub use error::{ExpError, ExpResult};
pub use output::{ErrorRow, ErrorTable, Timing};
pub use pipeline::{error_table, field_errors, run_pipeline, Models, Report};
pub use scenario::{build_test1, build_test2, Model, ScenarioConfig, ScenarioName, SeiarModel, SirModel, Variant};
