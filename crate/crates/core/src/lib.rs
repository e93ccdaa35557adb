//! Optimal and greedy rate/power allocation for fading Gaussian
//! multiple-access channels under concave utilities, with Monte Carlo
//! machinery for the greedy policy's performance-gap bounds.
//!
//! Rates are in nats per channel use throughout.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod allocation;
pub mod bounds;
pub mod capacity;
pub mod error;
pub mod fading;
pub mod optimize;
pub mod policy;
pub mod quadrature;
pub mod stats;
pub mod utility;

pub use allocation::{MultiplierVector, PowerBudget, PowerControlOracle};
pub use bounds::{bound_sweep, BoundReport};
pub use capacity::{
    averaged_region, averaged_region_from_trace, awgn_capacity, instantaneous_region,
    AveragedRegion, ChannelState, PolymatroidRegion, RankTable, Scenario, UserSet,
};
pub use error::{Error, Result};
pub use fading::{FadingModel, FadingTrace, Marginal, Moments};
pub use optimize::{frank_wolfe, maximize_linear, FwOptions, FwReport, LinearOracle, StepRule};
pub use policy::{greedy_rate, performance_gap, RatePolicy};
pub use utility::Utility;
