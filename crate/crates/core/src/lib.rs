//! Trace-driven simulation and analysis of sleep-state power management for
//! multi-tier server clusters.
//!
//! - [`workload`]: request-rate traces (synthetic or CSV).
//! - [`engine`]: discrete-event cluster simulation with setup delays.
//! - [`policies`]: AlwaysOn, Reactive, SoftReactive and the hybrid schema.
//! - [`analysis`]: energy, power and performance-per-watt model.
//!
//! The analysis formulas are generic over [`Scalar`]; the aliases below fix
//! the two instantiations used in practice.

pub mod analysis;
pub mod engine;
mod error;
pub mod policies;
pub mod scalar;
pub mod workload;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Exact = num_rational::Ratio<i64>;

pub type EnergyModelParams = analysis::EnergyModelParams<f64>;
pub type ExactEnergyModelParams = analysis::EnergyModelParams<Exact>;
pub type MetricsTable = analysis::MetricsTable<f64>;
pub type ExactMetricsTable = analysis::MetricsTable<Exact>;
pub type MetricsInputs = analysis::MetricsInputs<f64>;
pub type MetricsCell = analysis::MetricsCell<f64>;
pub type TierInput = policies::TierInput<f64>;
pub type ExactTierInput = policies::TierInput<Exact>;
