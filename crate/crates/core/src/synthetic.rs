//! Synthetic sales logs with known purchase rates.
//!
//! Each quantity class is an independent Poisson process, so the rate
//! discovered from a long enough log should approach the rate it was
//! generated with.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_distr::Exp1;

use crate::eventlog::{Event, EventLog, IngestError, ObjectId, ProductSublog};
use crate::simulate::rng_for;
use crate::units::TimeUnit;

/// First timestamp of every generated log.
pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).single().expect("valid date")
}

/// Purchases of one product: `(quantity, rate per unit)` classes over `horizon` units.
/// Timestamps have millisecond resolution.
pub fn poisson_events(
    product: &ObjectId,
    classes: &[(u32, f64)],
    horizon: f64,
    unit: TimeUnit,
    seed: u64,
) -> Vec<Event> {
    let mut rng = rng_for(seed, 0);
    let ms_per_unit = f64::from(unit.seconds_per_unit()) * 1000.0;
    let mut stamped: Vec<(i64, u32)> = Vec::new();
    for &(quantity, rate) in classes {
        let mut t = 0.0;
        loop {
            t += rng.sample::<f64, _>(Exp1) / rate;
            if t >= horizon {
                break;
            }
            stamped.push(((t * ms_per_unit).round() as i64, quantity));
        }
    }
    stamped.sort_by_key(|&(ms, _)| ms);
    stamped
        .into_iter()
        .enumerate()
        .map(|(i, (ms, q))| {
            Event::new(
                format!("{product}-{i}").into(),
                [product.clone()].into(),
                q,
                epoch() + Duration::milliseconds(ms),
                BTreeMap::new(),
            )
            .expect("generated events are valid")
        })
        .collect()
}

pub fn poisson_sublog(
    product: &str,
    classes: &[(u32, f64)],
    horizon: f64,
    unit: TimeUnit,
    seed: u64,
) -> Result<ProductSublog, IngestError> {
    let product = ObjectId::from(product);
    let events = poisson_events(&product, classes, horizon, unit, seed);
    ProductSublog::from_events(product, events)
}

/// Log with several products, one seed stream per product.
pub fn poisson_log(
    products: &[(&str, Vec<(u32, f64)>)],
    horizon: f64,
    unit: TimeUnit,
    seed: u64,
) -> Result<EventLog, IngestError> {
    let mut events: Vec<Event> = products
        .iter()
        .enumerate()
        .flat_map(|(i, (name, classes))| {
            poisson_events(&ObjectId::from(*name), classes, horizon, unit, seed.wrapping_add(i as u64))
        })
        .collect();
    events.sort_by_key(Event::timestamp);
    EventLog::new(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_track_rates() {
        let s = poisson_sublog("p", &[(1, 2.0), (3, 0.5)], 10_000.0, TimeUnit::Hours, 1).unwrap();
        let ones = s.events().iter().filter(|e| e.quantity() == 1).count() as f64;
        let threes = s.events().iter().filter(|e| e.quantity() == 3).count() as f64;
        assert!((ones / 20_000.0 - 1.0).abs() < 0.03);
        assert!((threes / 5_000.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn deterministic() {
        let a = poisson_sublog("p", &[(1, 1.0)], 100.0, TimeUnit::Hours, 5).unwrap();
        let b = poisson_sublog("p", &[(1, 1.0)], 100.0, TimeUnit::Hours, 5).unwrap();
        assert_eq!(a, b);
    }
}
