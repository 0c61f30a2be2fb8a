//! Configuration, persistence, seeding and the experiment pipelines behind the `navier` command.

pub mod checks;
pub mod config;
pub mod error;
pub mod expectations;
pub mod gridio;
pub mod manifest;
pub mod runner;

pub use navier_core;
