//! Scenario-driven front end of the subrig engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod output;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{run, Overrides, ResultBundle, Status};
pub use scenario::Scenario;
