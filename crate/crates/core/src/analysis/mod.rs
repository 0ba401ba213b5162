//! Steady-state what-if analysis of supply strategies.
//!
//! The stationary distribution `π` of an irreducible chain solves `πQ = 0`
//! with `Σπ = 1`. It is computed by replacing one balance equation with the
//! normalisation row and solving the dense system with a pivoted LU
//! factorisation, followed by iterative refinement. The initial distribution
//! of the chain plays no role here.
//!
//! From `π` three inventory metrics are read off:
//!
//! * expected stock `Σ i·π_i`,
//! * undersupply probability `Σ_{i < m} π_i`, where `m` is the largest
//!   quantity customers buy at once (states that cannot serve every purchase),
//! * expected surplus `Σ_{i > T} (i - T)·π_i`, the expected number of units
//!   above a waste threshold `T`.

mod lu;

use rayon::prelude::*;
use serde::Serialize;

use crate::ctmc::{ChainError, Ctmc, IrreducibilityReport, SupplyStrategy};
use crate::discovery::{discover_ctmc, DiscoveryError, DiscoveryReport};
use crate::eventlog::ProductSublog;
use crate::scalar::Scalar;
use crate::units::TimeUnit;

use lu::{mat_vec, Lu};

/// Largest capacity handled by the dense direct solver.
pub const MAX_DIRECT_CAPACITY: usize = 2_000;

const MAX_REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("chain is not irreducible ({} strongly connected components)", .0.components.len())]
    NotIrreducible(IrreducibilityReport),
    #[error("steady-state solver failed: {0}")]
    SolverFailure(String),
    #[error("capacity {0} exceeds the direct solver limit of {MAX_DIRECT_CAPACITY}")]
    CapacityTooLarge(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct SolverDiagnostics<T> {
    pub method: &'static str,
    pub refinement_steps: usize,
    pub clamped_entries: usize,
    pub min_pivot: T,
}

/// Stationary distribution of an irreducible chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct SteadyState<T> {
    pub pi: Vec<T>,
    /// `max_j |(πQ)_j|`.
    pub residual: T,
    pub diagnostics: SolverDiagnostics<T>,
}

/// `max_j |Σ_i π_i q_ij|`, evaluated on the sparse generator.
pub fn balance_residual<T: Scalar>(chain: &Ctmc<T>, pi: &[T]) -> T {
    let mut flow = vec![T::zero(); chain.states()];
    for (i, &p) in pi.iter().enumerate() {
        flow[i] += p * chain.rate(i, i);
        for (j, r) in chain.row(i) {
            flow[j] += p * r;
        }
    }
    flow.into_iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Solves the global balance equations of an irreducible chain.
pub fn steady_state<T: Scalar>(chain: &Ctmc<T>) -> Result<SteadyState<T>, AnalysisError> {
    if chain.capacity() > MAX_DIRECT_CAPACITY {
        return Err(AnalysisError::CapacityTooLarge(chain.capacity()));
    }
    let report = chain.irreducibility();
    if !report.irreducible {
        return Err(AnalysisError::NotIrreducible(report));
    }

    let n = chain.states();
    // Row j of the system is column j of Q (πQ = 0 transposed); the last
    // balance equation is replaced by Σπ = 1.
    let mut system = vec![T::zero(); n * n];
    for i in 0..n {
        system[i * n + i] = chain.rate(i, i);
        for (j, r) in chain.row(i) {
            system[j * n + i] = r;
        }
    }
    for v in &mut system[(n - 1) * n..] {
        *v = T::one();
    }
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();

    let lu = Lu::factor(n, &system)
        .ok_or_else(|| AnalysisError::SolverFailure("singular balance system".into()))?;
    let mut pi = lu.solve(&rhs);
    let mut refinement_steps = 0;
    for _ in 0..MAX_REFINEMENT_STEPS {
        if balance_residual(chain, &pi) <= T::residual_tolerance() * T::lit(1e-3) {
            break;
        }
        let ax = mat_vec(n, &system, &pi);
        let correction_rhs: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let correction = lu.solve(&correction_rhs);
        pi.iter_mut().zip(&correction).for_each(|(p, &d)| *p += d);
        refinement_steps += 1;
    }

    let mut clamped_entries = 0;
    for (state, p) in pi.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(AnalysisError::SolverFailure(format!("non-finite probability at state {state}")));
        }
        if *p < T::zero() {
            if *p < -T::clamp_tolerance() {
                return Err(AnalysisError::SolverFailure(format!("probability {p} at state {state}")));
            }
            *p = T::zero();
            clamped_entries += 1;
        }
    }
    let total = pi.iter().copied().sum::<T>();
    pi.iter_mut().for_each(|p| *p /= total);

    let residual = balance_residual(chain, &pi);
    let total = pi.iter().copied().sum::<T>();
    if !(residual <= T::residual_tolerance()) {
        return Err(AnalysisError::SolverFailure(format!("balance residual {residual} above tolerance")));
    }
    if !((total - T::one()).abs() <= T::normalization_tolerance()) {
        return Err(AnalysisError::SolverFailure(format!("probabilities sum to {total}")));
    }
    Ok(SteadyState {
        pi,
        residual,
        diagnostics: SolverDiagnostics {
            method: "dense-lu-partial-pivoting",
            refinement_steps,
            clamped_entries,
            min_pivot: lu.min_pivot,
        },
    })
}

/// Expected stock level `Σ i·π_i`.
pub fn expected_quantity<T: Scalar>(pi: &[T]) -> T {
    pi.iter().enumerate().map(|(i, &p)| T::from_count(i) * p).sum()
}

/// Mass on the states `0..max_quantity`, i.e. stock too low to serve a
/// purchase of `max_quantity` units. States beyond the chain are ignored.
pub fn undersupply_probability<T: Scalar>(pi: &[T], max_quantity: usize) -> T {
    pi.iter().take(max_quantity).copied().sum()
}

/// Expected units above `threshold`: `Σ_{i > T} (i - T)·π_i`.
pub fn expected_surplus<T: Scalar>(pi: &[T], threshold: usize) -> T {
    pi.iter().enumerate().skip(threshold + 1).map(|(i, &p)| T::from_count(i - threshold) * p).sum()
}

impl<T: Scalar> SteadyState<T> {
    pub fn expected_quantity(&self) -> T {
        expected_quantity(&self.pi)
    }

    pub fn undersupply_probability(&self, max_quantity: usize) -> T {
        undersupply_probability(&self.pi, max_quantity)
    }

    pub fn expected_surplus(&self, threshold: usize) -> T {
        expected_surplus(&self.pi, threshold)
    }
}

/// Inputs shared by every rate of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<T> {
    pub capacity: usize,
    pub initial: usize,
    pub batch: usize,
    pub rates: Vec<T>,
    /// Largest single purchase; defaults to the largest quantity in the sublog.
    pub max_quantity: Option<u32>,
    pub threshold: usize,
    pub unit: TimeUnit,
}

impl<T: Scalar> SweepConfig<T> {
    /// Capacity 100, batch 10, threshold 70, hourly rates, starting full.
    pub fn with_rates(rates: Vec<T>) -> Self {
        Self { capacity: 100, initial: 100, batch: 10, rates, max_quantity: None, threshold: 70, unit: TimeUnit::Hours }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::InvalidParameter(msg));
        if self.capacity == 0 {
            return bad("capacity must be at least 1".into());
        }
        if self.rates.is_empty() {
            return bad("at least one supply rate is required".into());
        }
        if let Some(r) = self.rates.iter().find(|r| !(r.is_finite() && **r > T::zero())) {
            return bad(format!("supply rate {r} must be positive"));
        }
        if self.batch == 0 || self.batch > self.capacity {
            return bad(format!("batch {} must be within 1..={}", self.batch, self.capacity));
        }
        if self.threshold > self.capacity {
            return bad(format!("threshold {} exceeds capacity {}", self.threshold, self.capacity));
        }
        if self.initial > self.capacity {
            return bad(format!("initial state {} exceeds capacity {}", self.initial, self.capacity));
        }
        if let Some(m) = self.max_quantity {
            if m == 0 || m as usize > self.capacity {
                return bad(format!("max quantity {m} must be within 1..={}", self.capacity));
            }
        }
        Ok(())
    }
}

/// Outcome of analysing one supply strategy. Metrics are absent when the
/// enhanced chain is reducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct WhatIfResult<T> {
    pub rate: T,
    pub batch: usize,
    pub capacity: usize,
    pub threshold: usize,
    pub max_quantity: usize,
    pub pi: Option<Vec<T>>,
    pub expected_quantity: Option<T>,
    pub undersupply_probability: Option<T>,
    pub expected_surplus: Option<T>,
    pub irreducible: bool,
    pub residual: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scc_sizes: Option<Vec<usize>>,
    #[serde(skip)]
    pub irreducibility: Option<IrreducibilityReport>,
}

impl<T: Scalar> WhatIfResult<T> {
    fn from_chain(
        chain: &Ctmc<T>,
        strategy: &SupplyStrategy<T>,
        threshold: usize,
        max_quantity: usize,
    ) -> Result<Self, AnalysisError> {
        let enhanced = chain.enhance_with_supply(strategy)?;
        let base = Self {
            rate: strategy.rate(),
            batch: strategy.batch(),
            capacity: chain.capacity(),
            threshold,
            max_quantity,
            pi: None,
            expected_quantity: None,
            undersupply_probability: None,
            expected_surplus: None,
            irreducible: false,
            residual: None,
            scc_sizes: None,
            irreducibility: None,
        };
        match steady_state(&enhanced) {
            Ok(ss) => Ok(Self {
                expected_quantity: Some(ss.expected_quantity()),
                undersupply_probability: Some(ss.undersupply_probability(max_quantity)),
                expected_surplus: Some(ss.expected_surplus(threshold)),
                residual: Some(ss.residual),
                pi: Some(ss.pi),
                irreducible: true,
                ..base
            }),
            Err(AnalysisError::NotIrreducible(report)) => {
                Ok(Self { scc_sizes: Some(report.component_sizes()), irreducibility: Some(report), ..base })
            }
            Err(e) => Err(e),
        }
    }
}

/// Discovers the product's chain once, then enhances and solves it for every
/// supply rate. Results keep the order of `config.rates`.
pub fn what_if_sweep<T: Scalar>(
    sublog: &ProductSublog,
    config: &SweepConfig<T>,
) -> Result<(DiscoveryReport<T>, Vec<WhatIfResult<T>>), AnalysisError> {
    config.validate()?;
    let (chain, report) = discover_ctmc::<T>(sublog, config.capacity, config.initial, config.unit)?;
    let max_quantity = config
        .max_quantity
        .or_else(|| report.max_quantity())
        .expect("discovery succeeded on a non-empty sublog") as usize;
    let results = config
        .rates
        .par_iter()
        .map(|&rate| {
            let strategy = SupplyStrategy::new(config.batch, rate)?;
            WhatIfResult::from_chain(&chain, &strategy, config.threshold, max_quantity)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((report, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::one_hot;

    fn birth_death(k: usize, down: f64, up: f64) -> Ctmc<f64> {
        let entries = (1..=k).map(|i| (i, i - 1, down)).chain((0..k).map(|i| (i, i + 1, up)));
        Ctmc::new(k, TimeUnit::Hours, one_hot(k + 1, k), entries).unwrap()
    }

    #[test]
    fn symmetric_two_state() {
        let c: Ctmc<f64> = Ctmc::new(1, TimeUnit::Hours, vec![1.0, 0.0], [(0, 1, 3.0), (1, 0, 3.0)]).unwrap();
        let ss = steady_state(&c).unwrap();
        assert!((ss.pi[0] - 0.5).abs() < 1e-15 && (ss.pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn birth_death_geometric() {
        let (k, down, up) = (20, 1.3, 0.7);
        let ss = steady_state(&birth_death(k, down, up)).unwrap();
        let ratio: f64 = up / down;
        let weights: Vec<f64> = (0..=k).map(|i| ratio.powi(i as i32)).collect();
        let z: f64 = weights.iter().sum();
        for (p, w) in ss.pi.iter().zip(&weights) {
            assert!((p - w / z).abs() < 1e-12);
        }
        assert!(ss.residual <= 1e-12);
    }

    #[test]
    fn birth_death_in_f32() {
        let entries = (1..=10usize).map(|i| (i, i - 1, 1.0f32)).chain((0..10).map(|i| (i, i + 1, 0.5f32)));
        let c = Ctmc::new(10, TimeUnit::Hours, one_hot(11, 10), entries).unwrap();
        let ss = steady_state(&c).unwrap();
        let z: f32 = (0..=10).map(|i| 0.5f32.powi(i)).sum();
        for (i, p) in ss.pi.iter().enumerate() {
            assert!((p - 0.5f32.powi(i as i32) / z).abs() < 1e-5);
        }
    }

    #[test]
    fn reducible_chain_is_refused() {
        let c = Ctmc::new(2, TimeUnit::Hours, one_hot(3, 2), [(2, 1, 1.0), (1, 0, 1.0)]).unwrap();
        match steady_state(&c) {
            Err(AnalysisError::NotIrreducible(r)) => assert_eq!(r.components.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn initial_distribution_is_irrelevant() {
        let a = birth_death(6, 1.0, 2.0);
        let b = a.with_lambda(one_hot(7, 0)).unwrap();
        assert_eq!(steady_state(&a).unwrap().pi, steady_state(&b).unwrap().pi);
    }

    #[test]
    fn metrics_on_degenerate_distributions() {
        let pi = one_hot::<f64>(101, 42);
        assert_eq!(expected_quantity(&pi), 42.0);
        assert_eq!(expected_surplus(&pi, 42), 0.0);
        assert_eq!(expected_surplus(&pi, 40), 2.0);
        let uniform = vec![0.01f64; 100];
        assert!((undersupply_probability(&uniform, 4) - 0.04).abs() < 1e-15);
        assert_eq!(expected_surplus(&pi, 100), 0.0);
        assert_eq!(undersupply_probability(&pi, 500), 1.0);
    }

    #[test]
    fn sweep_config_validation() {
        let ok = SweepConfig::with_rates(vec![0.25]);
        assert!(ok.validate().is_ok());
        for bad in [
            SweepConfig { rates: vec![], ..ok.clone() },
            SweepConfig { rates: vec![0.0], ..ok.clone() },
            SweepConfig { rates: vec![-0.1], ..ok.clone() },
            SweepConfig { batch: 0, ..ok.clone() },
            SweepConfig { batch: 101, ..ok.clone() },
            SweepConfig { threshold: 101, ..ok.clone() },
            SweepConfig { max_quantity: Some(0), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(AnalysisError::InvalidParameter(_))), "{bad:?}");
        }
    }
}
