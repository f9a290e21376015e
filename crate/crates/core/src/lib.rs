//! Demand-response flexibility of fleets of thermostatically controlled
//! appliances.
//!
//! * [`thermo`]: the single-appliance duty-cycle model.
//! * [`analytics`]: closed-form flexibility (steady state, upper bound,
//!   IndivRed, CoordRed, increase variants, portfolios).
//! * [`protocol`]: planning and interpreting the single broadcast message.
//! * [`sim`]: exact event-driven fleet simulation and reduction/rebound reports.
//! * [`trace`]: piecewise-constant power traces.
//! * [`scenario`]: JSON scenario files driving the command-line tool.

// `!(x > y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod thermo;
pub mod trace;

pub use error::{Error, Result};
