//! Coupled modeling of IoT device energy consumption and cloud autoscaling
//! billing for media-query workloads.
//!
//! Devices produce a random volume of query bits per monitoring interval and
//! idle below an activation threshold; an aggregator uploads the combined
//! volume to a cloud service whose instance pool switches between an idle
//! and an active tier at a byte quota. This crate provides:
//!
//! - the four query-volume distribution families (uniform, Pareto,
//!   exponential, half-Gaussian) plus the fixed-volume limit, all
//!   mean-matched so families are comparable ([`dist`]);
//! - closed-form expected energy, one-sided energy variation, and expected
//!   billing, each backed by exact partial moments ([`energy`], [`billing`]);
//! - the constrained threshold optimizations (minimize variation under an
//!   energy budget, or vice versa), the billing-minimizing autoscaling
//!   quota, and proportional-fair device admission planning ([`admission`]);
//! - a seeded Monte Carlo simulator that replays the per-interval
//!   idle/active accounting and validates every closed form ([`sim`]);
//! - a scenario file format and a small CLI (`querycost`) for analysis,
//!   optimization, simulation and sweep export ([`scenario`]).
//!
//! All quantities are carried in base units: bits, Joules, dollars and
//! seconds, per monitoring interval. See the `examples/` directory for a
//! runnable tour of each capability.

pub mod admission;
pub mod billing;
pub mod dist;
pub mod energy;
pub mod numerics;
pub mod scenario;
pub mod sim;

pub use admission::{ActivityZone, AdmissionPlan, AggregatorScenario, BindingConstraint};
pub use billing::BillingParams;
pub use dist::{AggregateMode, Family, QueryVolumeDistribution, SamplerMode};
pub use energy::{DeviceProfile, EnergyConstraints, EnergyParams, EnergyRates};
pub use numerics::Tolerance;
pub use scenario::ScenarioFile;
pub use sim::{SimConfig, SweepSeries};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructor was handed parameters violating a type invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The operation is undefined for the distribution family.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Root bracketing failed: no sign change over the interval.
    #[error("no root bracketed on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    /// An iterative routine exhausted its budget before reaching tolerance.
    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: String, detail: String },

    /// A budget or scenario cannot be met by any threshold setting.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Aggregation in scaled mode needs a single distribution family.
    #[error("mixed families: {0}")]
    MixedFamilies(String),

    /// Scenario file could not be read or parsed.
    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
