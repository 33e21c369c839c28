//! Park microgrid storage economics.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: hourly load / PV / wind series for one park, CSV ingestion and
//!   synthetic day generators.
//! - [`storage`]: the battery model and the greedy charge-on-surplus,
//!   discharge-on-deficit dispatch rule.
//! - [`costing`]: storage capital cost, total supply cost with and without storage,
//!   and the daily economic indicators.
//! - [`ga`]: genetic search over storage power and capacity minimising daily cost.
//! - [`forest`]: random-forest regression, an OLS baseline and permutation importance
//!   for explaining what drives hourly cost.

pub mod costing;
pub mod error;
pub mod forest;
pub mod ga;
pub mod scenario;
pub mod storage;

pub use error::{Error, Result};
