//! Simulation and bound toolkit for scheduling status updates from
//! multiple stochastic sources over one transmission channel, trading
//! information freshness against transmission cost.
//!
//! The crate provides:
//!
//! - [`distributions`]: the sampling laws with exact analytic moments;
//! - [`optimizer`]: the marking-probability convex programs (closed-form
//!   water-filling plus dual bisection), offline lower bounds, policy upper
//!   bounds, and competitive-ratio formulas, generic over the scalar type;
//! - [`engine`]: an exact continuous-time discrete-event simulator with
//!   optional preemption;
//! - [`policies`]: every scheduling policy behind one decision contract;
//! - [`discrete`]: the slotted-time engine and its policies;
//! - [`metrics`]: period statistics, cost identities, and the
//!   Kolmogorov-Smirnov distance;
//! - [`scenario`]: TOML scenario configuration and policy construction;
//! - [`rng`]: counter-based splittable random streams for bit-reproducible
//!   parallel replications.

pub mod discrete;
pub mod distributions;
pub mod engine;
pub mod metrics;
pub mod optimizer;
pub mod parallel;
pub mod policies;
pub mod real;
pub mod rng;
pub mod scenario;

/// The scalar type every simulation-facing API is pinned to. The optimizer
/// itself is generic over [`real::Real`].
pub type Scalar = f64;

/// Per-source solver constants at the crate's scalar type.
pub type SourceParams = optimizer::SourceParams<Scalar>;
/// Marking probabilities plus the dual multiplier, at the crate's scalar type.
pub type ProbVector = optimizer::ProbVector<Scalar>;
/// Bound pipeline output at the crate's scalar type.
pub type BoundsReport = optimizer::BoundsReport<Scalar>;

pub use distributions::DistSpec;
pub use engine::{ReplicatedResult, SimResult};
pub use policies::PolicyConfig;
pub use scenario::{Scenario, SourceConfig};
