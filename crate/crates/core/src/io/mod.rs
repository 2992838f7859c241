//! Configuration, initial data, file formats and command drivers.

pub mod commands;
pub mod config;
pub mod initial;
pub mod snapshot;

pub use config::RunConfig;
pub use initial::{build_initial_state, project_polyhedral, BumpProfile, InitialFamily};
