//! Inventory Markov chains mined from grocery sales logs.
//!
//! The pipeline has four stages:
//!
//! 1. [`eventlog`]: parse transactions into an object-centric event log and
//!    cut out one product's sublog.
//! 2. [`discovery`]: estimate one purchase rate per purchased quantity and
//!    assemble a downward-only chain on the stock levels `0..=k`.
//! 3. [`ctmc`]: add restocking transitions for a supply strategy and check
//!    that the enhanced chain is irreducible.
//! 4. [`analysis`]: solve for the stationary distribution and read off
//!    expected stock, undersupply probability and expected surplus, for a
//!    single strategy or a sweep of supply rates.
//!
//! [`simulate`] samples paths of any chain and serves as an independent check
//! on the analytic solver.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the CLI
//! and the HTTP service use.
//!
//! ```
//! use shelfwise_core::{ctmc::one_hot, steady_state, Ctmc, SupplyStrategy, TimeUnit};
//!
//! // Sell one unit per hour, restock one unit every two hours.
//! let k = 10;
//! let chain = Ctmc::new(k, TimeUnit::Hours, one_hot(k + 1, k), (1..=k).map(|s| (s, s - 1, 1.0)))?;
//! let chain = chain.enhance_with_supply(&SupplyStrategy::new(1, 0.5)?)?;
//! let ss = steady_state(&chain)?;
//! assert!((ss.pi[1] / ss.pi[0] - 0.5).abs() < 1e-12);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// Tolerance checks are written as `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ctmc;
pub mod discovery;
pub mod eventlog;
pub mod scalar;
pub mod simulate;
pub mod synthetic;
pub mod units;

pub use analysis::{
    expected_quantity, expected_surplus, steady_state, undersupply_probability, what_if_sweep, AnalysisError,
};
pub use ctmc::{ChainError, IrreducibilityReport, Violation};
pub use discovery::{discover_ctmc, interval_stats, quantity_classes, DiscoveryError, SkipReason};
pub use eventlog::{
    parse_log, parse_log_file, Event, EventId, EventLog, IngestError, IngestionConfig, ObjectId, ParseMode,
    ParseReport, ProductSublog, ProductSummary, SourceFormat,
};
pub use scalar::Scalar;
pub use simulate::{empirical_occupancy, sample_trajectory, SimulationError};
pub use units::TimeUnit;

pub type Ctmc = ctmc::Ctmc<f64>;
pub type SupplyStrategy = ctmc::SupplyStrategy<f64>;
pub type SteadyState = analysis::SteadyState<f64>;
pub type WhatIfResult = analysis::WhatIfResult<f64>;
pub type SweepConfig = analysis::SweepConfig<f64>;
pub type QuantityClassStats = discovery::QuantityClassStats<f64>;
pub type DiscoveryReport = discovery::DiscoveryReport<f64>;
pub type Trajectory = simulate::Trajectory<f64>;
pub type Occupancy = simulate::Occupancy<f64>;
