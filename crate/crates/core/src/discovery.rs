//! Mining a purchasing-behaviour chain from one product's sales.
//!
//! Transactions are grouped by purchased quantity. For each quantity class the
//! inter-arrival times of consecutive purchases are averaged, and the inverse
//! of that mean becomes the rate of the "sell that many units" transition from
//! every stock level that can serve it. The resulting chain only ever moves
//! down; supply transitions are added afterwards with
//! [`Ctmc::enhance_with_supply`].

use std::collections::BTreeSet;

use serde::Serialize;

use crate::ctmc::{one_hot, ChainError, Ctmc};
use crate::eventlog::{Event, ObjectId, ProductSublog};
use crate::scalar::Scalar;
use crate::units::TimeUnit;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiscoveryError {
    #[error("capacity {capacity} is smaller than the largest purchased quantity {max_quantity}")]
    CapacityTooSmall { capacity: usize, max_quantity: u32 },
    #[error("initial state {initial} outside 0..={capacity}")]
    InitialOutOfRange { initial: usize, capacity: usize },
    #[error("no quantity class of `{0}` yields a rate (every class has a single event or identical timestamps)")]
    NoRates(ObjectId),
    #[error("quantity {0} is never purchased in this sublog")]
    UnknownQuantityClass(u32),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum SkipReason {
    SingleEvent,
    AllTimestampsIdentical,
}

/// Inter-arrival statistics of one quantity class.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct QuantityClassStats<T> {
    pub quantity: u32,
    pub count: usize,
    #[serde(skip)]
    pub intervals: Vec<T>,
    pub mean: Option<T>,
    pub rate: Option<T>,
    #[serde(rename = "skippedReason")]
    pub skipped: Option<SkipReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct DiscoveryReport<T> {
    pub product: ObjectId,
    pub unit: TimeUnit,
    pub capacity: usize,
    pub initial: usize,
    pub classes: Vec<QuantityClassStats<T>>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> DiscoveryReport<T> {
    /// Largest quantity purchased in any transaction (skipped classes included).
    pub fn max_quantity(&self) -> Option<u32> {
        self.classes.iter().map(|c| c.quantity).max()
    }
}

/// Distinct purchased quantities.
pub fn quantity_classes(sublog: &ProductSublog) -> BTreeSet<u32> {
    sublog.events().iter().map(Event::quantity).collect()
}

/// Duration between two events expressed in `unit`.
fn interval_in<T: Scalar>(earlier: &Event, later: &Event, unit: TimeUnit) -> T {
    let delta = later.timestamp() - earlier.timestamp();
    let nanos = delta.num_nanoseconds().map_or_else(|| delta.num_milliseconds() as f64 * 1e6, |n| n as f64);
    T::lit(nanos / (1e9 * f64::from(unit.seconds_per_unit())))
}

/// Mean inter-arrival time and rate of the purchases of exactly `quantity` units.
///
/// Intervals between successive purchases (in timestamp order, ties in log
/// order) are all kept, including zero-length ones. A class is skipped when it
/// has a single event or all of its events share one timestamp.
pub fn interval_stats<T: Scalar>(
    sublog: &ProductSublog,
    quantity: u32,
    unit: TimeUnit,
) -> Result<QuantityClassStats<T>, DiscoveryError> {
    let events: Vec<&Event> = sublog.events().iter().filter(|e| e.quantity() == quantity).collect();
    if events.is_empty() {
        return Err(DiscoveryError::UnknownQuantityClass(quantity));
    }
    let count = events.len();
    let skipped = if count == 1 {
        Some(SkipReason::SingleEvent)
    } else if events.iter().all(|e| e.timestamp() == events[0].timestamp()) {
        Some(SkipReason::AllTimestampsIdentical)
    } else {
        None
    };
    if skipped.is_some() {
        return Ok(QuantityClassStats { quantity, count, intervals: Vec::new(), mean: None, rate: None, skipped });
    }
    let intervals: Vec<T> = events.windows(2).map(|w| interval_in(w[0], w[1], unit)).collect();
    let mean = intervals.iter().copied().sum::<T>() / T::from_count(intervals.len());
    Ok(QuantityClassStats { quantity, count, intervals, mean: Some(mean), rate: Some(mean.recip()), skipped: None })
}

/// Builds the purchasing chain on states `0..=capacity`, starting in `initial`.
///
/// For every usable quantity class `q` with rate `r`, each state `s >= q`
/// gets the transition `s -> s - q` at rate `r`. State 0 is absorbing.
pub fn discover_ctmc<T: Scalar>(
    sublog: &ProductSublog,
    capacity: usize,
    initial: usize,
    unit: TimeUnit,
) -> Result<(Ctmc<T>, DiscoveryReport<T>), DiscoveryError> {
    let classes = quantity_classes(sublog);
    if let Some(&max_quantity) = classes.last() {
        if max_quantity as usize > capacity {
            return Err(DiscoveryError::CapacityTooSmall { capacity, max_quantity });
        }
    }
    if initial > capacity {
        return Err(DiscoveryError::InitialOutOfRange { initial, capacity });
    }

    let stats = classes
        .iter()
        .map(|&q| interval_stats::<T>(sublog, q, unit))
        .collect::<Result<Vec<_>, _>>()?;
    let warnings: Vec<String> = stats
        .iter()
        .filter_map(|s| {
            s.skipped.map(|reason| match reason {
                SkipReason::SingleEvent => format!("quantity {}: single event, no rate estimated", s.quantity),
                SkipReason::AllTimestampsIdentical => {
                    format!("quantity {}: all {} events share one timestamp, no rate estimated", s.quantity, s.count)
                }
            })
        })
        .collect();
    if stats.iter().all(|s| s.rate.is_none()) {
        return Err(DiscoveryError::NoRates(sublog.product().clone()));
    }

    let entries = stats.iter().filter_map(|s| s.rate.map(|r| (s.quantity as usize, r))).flat_map(|(q, r)| {
        (q..=capacity).map(move |s| (s, s - q, r))
    });
    let chain = Ctmc::new(capacity, unit, one_hot(capacity + 1, initial), entries)?;
    let report =
        DiscoveryReport { product: sublog.product().clone(), unit, capacity, initial, classes: stats, warnings };
    Ok((chain, report))
}
