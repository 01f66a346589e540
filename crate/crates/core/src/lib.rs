//! Simulation and verification tools for the fractional binary market.

pub mod arbitrage;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod ledger;
pub mod market;
pub mod nlist;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
