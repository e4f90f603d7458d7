//! Numerical engine for screening contracts when a principal may or may not
//! observe a binary signal about the agent's cost.

// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod contract;
pub mod distributions;
pub mod error;
pub mod garbling;
pub mod numerics;
pub mod restriction;
pub mod verify;
pub mod welfare;

pub use error::{Error, Result};
