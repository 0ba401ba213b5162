//! Finite continuous-time Markov chains on the stock levels `0..=k`.
//!
//! A [`Ctmc`] stores its generator sparsely: only strictly positive
//! off-diagonal rates are kept, and the diagonal holds the negated exit rate
//! of each state. Chains are values; every operation returns a new chain.

mod scc;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::units::TimeUnit;

pub use scc::{strongly_connected_components, IrreducibilityReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("initial distribution has {found} entries, expected {expected}")]
    InitialLength { expected: usize, found: usize },
    #[error("invalid initial distribution: {0}")]
    InvalidInitial(String),
    #[error("state {state} outside 0..={capacity}")]
    StateOutOfRange { state: usize, capacity: usize },
    #[error("rate q[{from},{to}] = {rate} must be finite and non-negative")]
    InvalidRate { from: usize, to: usize, rate: f64 },
    #[error("self-loop q[{0},{0}] given as an off-diagonal entry")]
    SelfLoop(usize),
    #[error("entry q[{from},{to}] listed twice")]
    DuplicateEntry { from: usize, to: usize },
    #[error("supply batch must be at least 1")]
    ZeroBatch,
    #[error("supply rate {0} must be finite and non-negative")]
    InvalidSupplyRate(f64),
    #[error("supply batch {batch} exceeds capacity {capacity}")]
    BatchExceedsCapacity { batch: usize, capacity: usize },
}

/// One broken invariant reported by [`Ctmc::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Violation {
    NegativeRate { from: usize, to: usize, rate: f64 },
    NonFiniteRate { from: usize, to: usize },
    RowSum { row: usize, sum: f64 },
    NegativeInitial { state: usize, probability: f64 },
    InitialSum { sum: f64 },
}

/// A chain `(λ, Q)` over states `0..=capacity`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc<T> {
    capacity: usize,
    unit: TimeUnit,
    lambda: Vec<T>,
    rows: Vec<BTreeMap<usize, T>>,
    diagonal: Vec<T>,
}

/// Initial distribution concentrated on `state`.
pub fn one_hot<T: Scalar>(states: usize, state: usize) -> Vec<T> {
    let mut v = vec![T::zero(); states];
    v[state] = T::one();
    v
}

fn row_exit_rate<T: Scalar>(row: &BTreeMap<usize, T>) -> T {
    row.values().fold(T::zero(), |acc, &r| acc + r)
}

impl<T: Scalar> Ctmc<T> {
    /// Builds a valid chain from its off-diagonal rates; zero rates are dropped
    /// and the diagonal is derived so every row sums to zero.
    pub fn new(
        capacity: usize,
        unit: TimeUnit,
        lambda: Vec<T>,
        entries: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self, ChainError> {
        if capacity == 0 {
            return Err(ChainError::ZeroCapacity);
        }
        let states = capacity + 1;
        check_initial(&lambda, states)?;
        let mut rows = vec![BTreeMap::new(); states];
        for (from, to, rate) in entries {
            for s in [from, to] {
                if s >= states {
                    return Err(ChainError::StateOutOfRange { state: s, capacity });
                }
            }
            if from == to {
                return Err(ChainError::SelfLoop(from));
            }
            if !rate.is_finite() || rate < T::zero() {
                return Err(ChainError::InvalidRate { from, to, rate: rate.as_f64() });
            }
            if rate == T::zero() {
                continue;
            }
            if rows[from].insert(to, rate).is_some() {
                return Err(ChainError::DuplicateEntry { from, to });
            }
        }
        let diagonal = rows.iter().map(|r| -row_exit_rate(r)).collect();
        Ok(Self { capacity, unit, lambda, rows, diagonal })
    }

    /// Assembles a chain without checking any invariant. Use
    /// [`validate`](Self::validate) to inspect the result.
    ///
    /// Panics if the vector lengths or indices do not fit `capacity`.
    pub fn from_raw_parts(
        capacity: usize,
        unit: TimeUnit,
        lambda: Vec<T>,
        entries: impl IntoIterator<Item = (usize, usize, T)>,
        diagonal: Vec<T>,
    ) -> Self {
        let states = capacity + 1;
        assert_eq!(lambda.len(), states, "initial distribution length");
        assert_eq!(diagonal.len(), states, "diagonal length");
        let mut rows = vec![BTreeMap::new(); states];
        for (from, to, rate) in entries {
            assert!(from < states && to < states && from != to, "entry ({from},{to}) out of shape");
            if rate != T::zero() {
                rows[from].insert(to, rate);
            }
        }
        Self { capacity, unit, lambda, rows, diagonal }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of states, `capacity + 1`.
    pub fn states(&self) -> usize {
        self.capacity + 1
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    /// Generator entry `q[from, to]`, including the diagonal.
    pub fn rate(&self, from: usize, to: usize) -> T {
        if from == to {
            self.diagonal[from]
        } else {
            self.rows[from].get(&to).copied().unwrap_or_else(T::zero)
        }
    }

    /// Stored off-diagonal entries of one row, ordered by target state.
    pub fn row(&self, from: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.rows[from].iter().map(|(&to, &r)| (to, r))
    }

    /// All stored off-diagonal entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |(&j, &r)| (i, j, r)))
    }

    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    /// Total rate of leaving `state`, `-q[state, state]`.
    pub fn exit_rate(&self, state: usize) -> T {
        -self.diagonal[state]
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diagonal
    }

    /// Dense `(k+1) x (k+1)` copy of the generator.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.states();
        let mut dense = vec![vec![T::zero(); n]; n];
        for (i, row) in dense.iter_mut().enumerate() {
            row[i] = self.diagonal[i];
            for (&j, &r) in &self.rows[i] {
                row[j] = r;
            }
        }
        dense
    }

    pub fn with_lambda(&self, lambda: Vec<T>) -> Result<Self, ChainError> {
        check_initial(&lambda, self.states())?;
        Ok(Self { lambda, ..self.clone() })
    }

    /// Lists every broken generator/initial-distribution invariant.
    ///
    /// Off-diagonal rates must be finite and `>= 0`, each row must sum to zero
    /// within [`Scalar::row_sum_tolerance`], and `λ` must be a probability
    /// vector within [`Scalar::distribution_tolerance`].
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, &r) in row {
                if !r.is_finite() {
                    out.push(Violation::NonFiniteRate { from: i, to: j });
                } else if r < T::zero() {
                    out.push(Violation::NegativeRate { from: i, to: j, rate: r.as_f64() });
                }
            }
            let sum = row_exit_rate(row) + self.diagonal[i];
            if !(sum.abs() <= T::row_sum_tolerance()) {
                out.push(Violation::RowSum { row: i, sum: sum.as_f64() });
            }
        }
        for (s, &p) in self.lambda.iter().enumerate() {
            if !(p >= T::zero()) {
                out.push(Violation::NegativeInitial { state: s, probability: p.as_f64() });
            }
        }
        let total = self.lambda.iter().copied().sum::<T>();
        if !((total - T::one()).abs() <= T::distribution_tolerance()) {
            out.push(Violation::InitialSum { sum: total.as_f64() });
        }
        out
    }

    /// Adds supply transitions `i -> i + batch` with the strategy's rate for
    /// every `0 <= i <= k - batch`. Supply that would overflow the capacity is
    /// not modelled, so the top `batch` states gain nothing. A zero rate
    /// returns an identical chain.
    pub fn enhance_with_supply(&self, strategy: &SupplyStrategy<T>) -> Result<Self, ChainError> {
        if strategy.batch > self.capacity {
            return Err(ChainError::BatchExceedsCapacity { batch: strategy.batch, capacity: self.capacity });
        }
        let mut next = self.clone();
        if strategy.rate == T::zero() {
            return Ok(next);
        }
        for i in 0..=(self.capacity - strategy.batch) {
            *next.rows[i].entry(i + strategy.batch).or_insert_with(T::zero) += strategy.rate;
            next.diagonal[i] = -row_exit_rate(&next.rows[i]);
        }
        Ok(next)
    }

    /// Adjacency lists of the positive-rate transition digraph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.rows.iter().map(|row| row.iter().filter(|(_, &r)| r > T::zero()).map(|(&j, _)| j).collect()).collect()
    }

    /// Checks strong connectivity of the positive-rate transition digraph.
    pub fn irreducibility(&self) -> IrreducibilityReport {
        IrreducibilityReport::from_adjacency(&self.adjacency())
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducibility().irreducible
    }
}

fn check_initial<T: Scalar>(lambda: &[T], states: usize) -> Result<(), ChainError> {
    if lambda.len() != states {
        return Err(ChainError::InitialLength { expected: states, found: lambda.len() });
    }
    if let Some((s, p)) = lambda.iter().enumerate().find(|(_, p)| !(**p >= T::zero()) || !p.is_finite()) {
        return Err(ChainError::InvalidInitial(format!("p[{s}] = {p}")));
    }
    let total = lambda.iter().copied().sum::<T>();
    if !((total - T::one()).abs() <= T::distribution_tolerance()) {
        return Err(ChainError::InvalidInitial(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Restocking policy: deliveries of `batch` units arriving at `rate` per time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SupplyStrategy<T> {
    batch: usize,
    rate: T,
}

impl<T: Scalar> SupplyStrategy<T> {
    pub fn new(batch: usize, rate: T) -> Result<Self, ChainError> {
        if batch == 0 {
            return Err(ChainError::ZeroBatch);
        }
        if !rate.is_finite() || rate < T::zero() {
            return Err(ChainError::InvalidSupplyRate(rate.as_f64()));
        }
        Ok(Self { batch, rate })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn rate(&self) -> T {
        self.rate
    }
}

/// On-disk chain layout: `{capacity, unit, lambda, entries: [[i, j, rate], ...]}`
/// with the diagonal implied.
#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ChainJson<T> {
    capacity: usize,
    unit: TimeUnit,
    lambda: Vec<T>,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> Serialize for Ctmc<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ChainJson { capacity: self.capacity, unit: self.unit, lambda: self.lambda.clone(), entries: self.entries().collect() }
            .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Ctmc<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = ChainJson::<T>::deserialize(deserializer)?;
        Ctmc::new(raw.capacity, raw.unit, raw.lambda, raw.entries).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn death_chain(k: usize, rate: f64) -> Ctmc<f64> {
        Ctmc::new(k, TimeUnit::Hours, one_hot(k + 1, k), (1..=k).map(|s| (s, s - 1, rate))).unwrap()
    }

    #[test]
    fn new_derives_diagonal() {
        let c = death_chain(3, 1.0);
        assert_eq!(c.diagonal(), &[0.0, -1.0, -1.0, -1.0]);
        assert_eq!(c.rate(3, 2), 1.0);
        assert_eq!(c.rate(3, 1), 0.0);
        assert!(c.validate().is_empty());
    }

    #[test]
    fn new_rejects_bad_input() {
        let l = one_hot::<f64>(3, 0);
        assert_eq!(Ctmc::new(2, TimeUnit::Hours, l.clone(), [(1, 1, 1.0)]), Err(ChainError::SelfLoop(1)));
        assert!(matches!(Ctmc::new(2, TimeUnit::Hours, l.clone(), [(0, 1, -1.0)]), Err(ChainError::InvalidRate { .. })));
        assert!(matches!(Ctmc::new(2, TimeUnit::Hours, l.clone(), [(0, 3, 1.0)]), Err(ChainError::StateOutOfRange { .. })));
        assert!(matches!(
            Ctmc::new(2, TimeUnit::Hours, l, [(0, 1, 1.0), (0, 1, 2.0)]),
            Err(ChainError::DuplicateEntry { .. })
        ));
        assert!(Ctmc::new(2, TimeUnit::Hours, vec![0.5, 0.2, 0.2], std::iter::empty()).is_err());
        assert_eq!(Ctmc::<f64>::new(0, TimeUnit::Hours, vec![1.0], std::iter::empty()), Err(ChainError::ZeroCapacity));
    }

    #[test]
    fn zero_rates_are_not_stored() {
        let c = Ctmc::new(2, TimeUnit::Hours, one_hot::<f64>(3, 0), [(0, 1, 0.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(c.entry_count(), 1);
    }

    #[test]
    fn validate_names_negative_entry() {
        let c = Ctmc::from_raw_parts(2, TimeUnit::Hours, one_hot::<f64>(3, 0), [(0, 1, -0.5)], vec![0.5, 0.0, 0.0]);
        assert_eq!(c.validate(), vec![Violation::NegativeRate { from: 0, to: 1, rate: -0.5 }]);
    }

    #[test]
    fn validate_flags_row_sums_and_lambda() {
        let c = Ctmc::from_raw_parts(2, TimeUnit::Hours, vec![0.5, 0.2, 0.2], [(0, 1, 1.0)], vec![-1.0, 1e-9, 0.0]);
        let v = c.validate();
        assert_eq!(v.len(), 2);
        assert!(matches!(v[0], Violation::RowSum { row: 1, .. }));
        assert!(matches!(v[1], Violation::InitialSum { .. }));
    }

    #[test]
    fn supply_adds_backward_edges_up_to_capacity() {
        let c = death_chain(100, 1.0);
        let e = c.enhance_with_supply(&SupplyStrategy::new(10, 0.25).unwrap()).unwrap();
        for i in 0..=90 {
            assert_eq!(e.rate(i, i + 10), 0.25);
        }
        for i in 91..=100 {
            assert_eq!(e.row(i).filter(|&(j, _)| j > i).count(), 0, "state {i} must not be resupplied");
        }
        assert_eq!(e.exit_rate(0), 0.25);
        assert_eq!(e.exit_rate(50), 1.25);
        assert_eq!(e.exit_rate(95), 1.0);
        assert!(e.validate().is_empty());
        // value semantics
        assert_eq!(c, death_chain(100, 1.0));
    }

    #[test]
    fn zero_supply_rate_is_identity() {
        let c = death_chain(5, 1.0);
        assert_eq!(c.enhance_with_supply(&SupplyStrategy::new(2, 0.0).unwrap()).unwrap(), c);
    }

    #[test]
    fn batch_must_fit() {
        let c = death_chain(5, 1.0);
        let err = c.enhance_with_supply(&SupplyStrategy::new(6, 1.0).unwrap()).unwrap_err();
        assert_eq!(err, ChainError::BatchExceedsCapacity { batch: 6, capacity: 5 });
        assert!(SupplyStrategy::new(0, 1.0).is_err());
        assert!(SupplyStrategy::new(1, -1.0).is_err());
        assert!(SupplyStrategy::new(1, f64::NAN).is_err());
    }

    #[test]
    fn supply_full_batch_links_zero_to_capacity() {
        let c = death_chain(4, 1.0).enhance_with_supply(&SupplyStrategy::new(4, 0.5).unwrap()).unwrap();
        assert_eq!(c.rate(0, 4), 0.5);
        assert!(c.is_irreducible());
    }

    #[test]
    fn json_layout() {
        let c = Ctmc::new(1, TimeUnit::Hours, vec![0.0, 1.0], [(1, 0, 2.0), (0, 1, 0.5)]).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"capacity":1,"unit":"hours","lambda":[0.0,1.0],"entries":[[0,1,0.5],[1,0,2.0]]}"#);
        let back: Ctmc<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<Ctmc<f64>>(r#"{"capacity":1,"unit":"hours","lambda":[1.0,0.0],"entries":[[0,0,1.0]]}"#).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let c: Ctmc<f32> = Ctmc::new(2, TimeUnit::Minutes, one_hot(3, 2), [(2, 1, 0.1f32), (1, 0, 0.1)]).unwrap();
        let e = c.enhance_with_supply(&SupplyStrategy::new(1, 0.3f32).unwrap()).unwrap();
        assert!(e.validate().is_empty());
        assert!(e.is_irreducible());
    }
}
