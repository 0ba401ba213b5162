//! Request and response bodies, and the computations behind each endpoint.
//!
//! Everything here is independent of HTTP so the command-line tool can call
//! the same functions and produce the same JSON.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shelfwise_core::analysis::SweepConfig;
use shelfwise_core::simulate::{default_burn_in, rng_for, sample_grid, JumpProcess, RNG_NAME};
use shelfwise_core::{
    discover_ctmc, empirical_occupancy, what_if_sweep, AnalysisError, ChainError, Ctmc, DiscoveryError, EventLog,
    IngestError, ObjectId, ProductSublog, SimulationError, SupplyStrategy, TimeUnit, WhatIfResult,
};

/// Upper bound on trajectory points returned by a simulation.
pub const MAX_TRAJECTORY_POINTS: usize = 10_000;

/// Simulations expected to take more jumps than this are refused.
pub const MAX_EXPECTED_JUMPS: f64 = 2e9;

fn default_capacity() -> usize {
    100
}

fn default_batch() -> usize {
    10
}

fn default_threshold() -> usize {
    70
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub product: String,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    /// Defaults to `capacity`.
    #[serde(default)]
    pub initial: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    pub rate: f64,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default)]
    pub max_quantity: Option<u32>,
    #[serde(default)]
    pub unit: TimeUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepRequest {
    pub product: String,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    #[serde(default)]
    pub initial: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    pub rates: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default)]
    pub max_quantity: Option<u32>,
    #[serde(default)]
    pub unit: TimeUnit,
}

impl From<AnalyzeRequest> for SweepRequest {
    fn from(r: AnalyzeRequest) -> Self {
        Self {
            product: r.product,
            capacity: r.capacity,
            initial: r.initial,
            batch: r.batch,
            rates: vec![r.rate],
            threshold: r.threshold,
            max_quantity: r.max_quantity,
            unit: r.unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulateRequest {
    pub product: String,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    #[serde(default)]
    pub initial: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    pub rate: f64,
    #[serde(default)]
    pub unit: TimeUnit,
    pub horizon: f64,
    pub seed: u64,
    /// Defaults to 1% of the horizon.
    #[serde(default)]
    pub burn_in: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulateResponse {
    pub product: String,
    pub rate: f64,
    pub batch: usize,
    pub capacity: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub rng: &'static str,
    pub jumps: u64,
    /// `true` when `trajectoryDownsampled` holds every jump of the path,
    /// `false` when it is the state on an evenly spaced time grid.
    pub trajectory_exact: bool,
    pub trajectory_downsampled: Vec<TrajectoryPoint>,
    pub occupancy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    InvalidRequest,
    NoLog,
    UnknownProduct,
    NoRates,
    CapacityTooSmall,
    NotIrreducible,
    SolverFailure,
}

impl ErrorKind {
    pub fn status(self) -> u16 {
        match self {
            Self::InvalidRequest => 400,
            Self::UnknownProduct => 404,
            Self::NoLog => 409,
            Self::NoRates | Self::CapacityTooSmall | Self::NotIrreducible => 422,
            Self::SolverFailure => 500,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::InvalidRequest => "invalid_request",
            Self::NoLog => "no_log",
            Self::UnknownProduct => "unknown_product",
            Self::NoRates => "no_rates",
            Self::CapacityTooSmall => "capacity_too_small",
            Self::NotIrreducible => "not_irreducible",
            Self::SolverFailure => "solver_failure",
        }
    }
}

/// Failure of a request, carrying the body sent to clients.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    pub detail: Value,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    code: &'static str,
    detail: &'a Value,
}

impl ApiError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into(), detail: Value::Null }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::InvalidRequest, message)
    }

    pub fn no_log() -> Self {
        Self::new(ErrorKind::NoLog, "no event log is loaded")
    }

    /// `{error, code, detail}`.
    pub fn body(&self) -> Value {
        serde_json::to_value(ErrorBody { error: &self.message, code: self.kind.code(), detail: &self.detail })
            .expect("error body serializes")
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        let message = e.to_string();
        match e {
            AnalysisError::NotIrreducible(report) => Self {
                kind: ErrorKind::NotIrreducible,
                message,
                detail: json!({ "sccSizes": report.component_sizes(), "witness": report.witness }),
            },
            AnalysisError::SolverFailure(_) => Self::new(ErrorKind::SolverFailure, message),
            AnalysisError::CapacityTooLarge(_) | AnalysisError::InvalidParameter(_) | AnalysisError::Chain(_) => {
                Self::invalid(message)
            }
            AnalysisError::Discovery(d) => d.into(),
        }
    }
}

impl From<DiscoveryError> for ApiError {
    fn from(e: DiscoveryError) -> Self {
        let message = e.to_string();
        match e {
            DiscoveryError::NoRates(_) => Self::new(ErrorKind::NoRates, message),
            DiscoveryError::CapacityTooSmall { capacity, max_quantity } => Self {
                kind: ErrorKind::CapacityTooSmall,
                message,
                detail: json!({ "capacity": capacity, "maxQuantity": max_quantity }),
            },
            _ => Self::invalid(message),
        }
    }
}

impl From<ChainError> for ApiError {
    fn from(e: ChainError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<SimulationError> for ApiError {
    fn from(e: SimulationError) -> Self {
        Self::invalid(e.to_string())
    }
}

/// Cuts the product's sublog out of the log.
pub fn sublog(log: &EventLog, product: &str) -> Result<ProductSublog, ApiError> {
    log.extract_sublog(&ObjectId::from(product)).map_err(|e| match e {
        IngestError::UnknownObject(_) => {
            ApiError::new(ErrorKind::UnknownProduct, format!("unknown product {product:?}"))
        }
        other => ApiError::invalid(other.to_string()),
    })
}

/// Results of a sweep, in the order of `rates`. A reducible enhanced chain
/// is an error here rather than a flagged result.
pub fn sweep(log: &EventLog, req: &SweepRequest) -> Result<Vec<WhatIfResult>, ApiError> {
    let sub = sublog(log, &req.product)?;
    let config = SweepConfig {
        capacity: req.capacity,
        initial: req.initial.unwrap_or(req.capacity),
        batch: req.batch,
        rates: req.rates.clone(),
        max_quantity: req.max_quantity,
        threshold: req.threshold,
        unit: req.unit,
    };
    let (_, results) = what_if_sweep(&sub, &config)?;
    if let Some(report) = results.iter().find_map(|r| r.irreducibility.clone()) {
        return Err(AnalysisError::NotIrreducible(report).into());
    }
    Ok(results)
}

pub fn analyze(log: &EventLog, req: &AnalyzeRequest) -> Result<WhatIfResult, ApiError> {
    let mut results = sweep(log, &req.clone().into())?;
    Ok(results.remove(0))
}

/// Discovered chain enhanced with the requested supply, after checking the
/// simulation parameters.
pub fn simulation_chain(log: &EventLog, req: &SimulateRequest) -> Result<Ctmc, ApiError> {
    if !(req.rate.is_finite() && req.rate > 0.0) {
        return Err(ApiError::invalid(format!("supply rate {} must be positive", req.rate)));
    }
    if !(req.horizon.is_finite() && req.horizon > 0.0) {
        return Err(SimulationError::InvalidHorizon(req.horizon).into());
    }
    if req.batch == 0 || req.batch > req.capacity {
        return Err(ApiError::invalid(format!("batch {} must be within 1..={}", req.batch, req.capacity)));
    }
    let sub = sublog(log, &req.product)?;
    let initial = req.initial.unwrap_or(req.capacity);
    let (chain, _) = discover_ctmc::<f64>(&sub, req.capacity, initial, req.unit)?;
    let chain = chain.enhance_with_supply(&SupplyStrategy::new(req.batch, req.rate)?)?;
    let fastest = (0..chain.states()).map(|s| chain.exit_rate(s)).fold(0.0, f64::max);
    if fastest * req.horizon > MAX_EXPECTED_JUMPS {
        return Err(ApiError::invalid(format!(
            "horizon {} would need about {:.0} jumps; the limit is {MAX_EXPECTED_JUMPS:.0}",
            req.horizon,
            fastest * req.horizon
        )));
    }
    Ok(chain)
}

pub fn simulate(log: &EventLog, req: &SimulateRequest) -> Result<SimulateResponse, ApiError> {
    let chain = simulation_chain(log, req)?;
    let burn_in = req.burn_in.unwrap_or_else(|| default_burn_in(req.horizon));
    let occupancy = empirical_occupancy(&chain, req.horizon, req.seed, burn_in)?;

    let exact: Vec<TrajectoryPoint> = JumpProcess::new(&chain, rng_for(req.seed, 0))?
        .take_while(|&(_, t)| t < req.horizon)
        .take(MAX_TRAJECTORY_POINTS + 1)
        .map(|(state, time)| TrajectoryPoint { time, state })
        .collect();
    let trajectory_exact = exact.len() <= MAX_TRAJECTORY_POINTS;
    let trajectory = if trajectory_exact {
        exact
    } else {
        sample_grid(&chain, req.horizon, req.seed, MAX_TRAJECTORY_POINTS)?
            .into_iter()
            .map(|(time, state)| TrajectoryPoint { time, state })
            .collect()
    };
    Ok(SimulateResponse {
        product: req.product.clone(),
        rate: req.rate,
        batch: req.batch,
        capacity: req.capacity,
        horizon: req.horizon,
        burn_in: occupancy.burn_in,
        seed: req.seed,
        rng: RNG_NAME,
        jumps: occupancy.jumps,
        trajectory_exact,
        trajectory_downsampled: trajectory,
        occupancy: occupancy.pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_defaults() {
        let req: AnalyzeRequest = serde_json::from_value(json!({ "product": "p", "rate": 0.3 })).unwrap();
        assert_eq!((req.capacity, req.initial, req.batch, req.threshold), (100, None, 10, 70));
        assert_eq!(req.unit, TimeUnit::Hours);
        let sweep: SweepRequest = req.into();
        assert_eq!(sweep.rates, [0.3]);
    }

    #[test]
    fn error_statuses() {
        let invalid: ApiError = AnalysisError::InvalidParameter("x".into()).into();
        assert_eq!(invalid.kind.status(), 400);
        let no_rates: ApiError = DiscoveryError::NoRates("p".into()).into();
        assert_eq!((no_rates.kind.status(), no_rates.kind.code()), (422, "no_rates"));
        let body = no_rates.body();
        assert_eq!(body["code"], "no_rates");
        assert!(body["detail"].is_null());
        assert_eq!(ApiError::no_log().kind.status(), 409);
    }

    #[test]
    fn empty_log_has_no_products() {
        let log = EventLog::new(vec![]).unwrap();
        let err = sublog(&log, "p").unwrap_err();
        assert_eq!(err.kind, ErrorKind::UnknownProduct);
    }
}
