//! Single-history digital delay channels with bounded adversarial delay
//! variation: channel functions, variation bounds and their fixed points,
//! an event-driven circuit simulator, a short-pulse filter harness, and
//! fitting and coverage analysis against measured delays.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod delay;
pub mod error;
pub mod eta;
pub mod io;
pub mod plot;
pub mod roots;
pub mod sim;
pub mod spf;
pub mod units;

pub use error::{Error, Result};
