//! Sub-Riemannian geometry engine: symbolic frames, Riemannian extensions,
//! normal and abnormal extremals, and nonholonomic mechanics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtin;
pub mod error;
pub mod expr;
pub mod extremals;
pub mod geometry;
pub mod integrate;
pub mod linalg;
pub mod mechanics;

pub use error::{Error, Result};
