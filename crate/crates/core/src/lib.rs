//! Transition-risk repricing for ISIN-level investment fund portfolios.
//!
//! The crate loads portfolio and scenario data ([`ingest`]), calibrates
//! per-segment carbon-intensity distributions ([`calib`]), reprices every
//! position under a transition scenario ([`risk`]) and rolls the results up to
//! fund and sector level ([`aggregate`]).

// `!(x > 0.0)` is used on purpose so that NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod calib;
pub mod error;
pub mod ingest;
pub mod model;
pub mod report;
pub mod risk;
pub mod synth;

pub use error::{Error, Result};
pub use model::*;
