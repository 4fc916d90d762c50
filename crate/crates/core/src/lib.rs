//! Energy-aware resource management for heterogeneous cellular networks.
//!
//! The network is described by a set of macro and pico cells, a set of test
//! points carrying rate demands, and a set of pre-defined interference
//! patterns (ON/OFF combinations of the cells). Per-pattern link rates are
//! precomputed once; the optimizers then distribute bandwidth among patterns,
//! cells and test points so that every demand is met with minimum total
//! operational power.
//!
//! Module map:
//!
//! - [`netmodel`]: topology, channel gains, SINR/rate tables, power model and
//!   scenario generation.
//! - [`patterns`]: candidate interference-pattern sets.
//! - [`lpcore`]: dense simplex solver used by every master problem and by the
//!   reference oracles.
//! - [`balancer`]: rate balancing (feasibility test) by dual cutting planes.
//! - [`energymin`]: reweighted-ℓ1 energy minimization with an inner dual
//!   cutting-plane solver.
//! - [`baselines`]: reuse-1, range-expansion association and bias fitting.
//! - [`oracle`]: brute-force references used for verification.

pub mod balancer;
pub mod baselines;
pub mod energymin;
mod error;
pub mod lpcore;
pub mod netmodel;
pub mod oracle;
pub mod patterns;
pub mod units;

pub use balancer::{Allocation, DemandProfile};
pub use energymin::{EnergyConfig, SolveReport};
pub use error::{Error, Result};
pub use netmodel::{
    CellKind, ChannelGains, NetworkTopology, RadioConfig, RateTable, TestPoint,
};
pub use patterns::PatternSet;

/// Usage level above which a cell counts as switched on.
pub const ACTIVITY_THRESHOLD: f64 = 1e-5;
