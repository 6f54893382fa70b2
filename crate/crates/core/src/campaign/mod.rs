//! Seeded verification campaigns and their CSV/JSON reports.
//!
//! Inputs are drawn sequentially from a ChaCha8 stream, rows are evaluated
//! in parallel and collected in index order, so a report is a pure function
//! of the config and seed.

pub mod config;
pub mod report;
mod runs;
pub mod sampling;

pub use config::{
    load_archive, AnyArchive, CampaignConfig, CampaignKind, ContinuousArchive, Format, Model, ModelSpec, RunConfig,
};
pub use report::{Report, Rows, Summary};
pub use runs::{
    blowup, bochner, continuous, halfpower, lower_bound, pairing, psi_validate, run, run_on, BOUND_TOL, PAIRING_TOL,
};
