//! Sample paths of a chain and their time-weighted state occupancy.
//!
//! Paths are generated with the jump-chain construction: in state `i` with
//! exit rate `r_i` the holding time is exponential with rate `r_i` and the
//! next state is `j` with probability `q_ij / r_i`. This has the same law as
//! racing one exponential clock per outgoing transition.
//!
//! Randomness comes from [`ChaCha8Rng`], which is portable and reproducible
//! across platforms. A run with seed `s` uses stream 0 of the generator seeded
//! with `s`; replicate `r` of a batch uses stream `r + 1` of the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::ctmc::Ctmc;
use crate::scalar::Scalar;

/// Name of the generator, echoed in simulation output.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Fraction of the horizon discarded by default before measuring occupancy.
pub const DEFAULT_BURN_IN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("horizon {0} must be positive and finite")]
    InvalidHorizon(f64),
    #[error("burn-in {burn_in} must lie in [0, horizon {horizon})")]
    InvalidBurnIn { burn_in: f64, horizon: f64 },
    #[error("initial distribution does not sum to a positive value")]
    InvalidInitial,
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn default_burn_in(horizon: f64) -> f64 {
    horizon * DEFAULT_BURN_IN_FRACTION
}

struct JumpTable {
    exit: Vec<f64>,
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl JumpTable {
    fn new<T: Scalar>(chain: &Ctmc<T>) -> Self {
        let n = chain.states();
        let mut exit = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            let (ts, cs): (Vec<usize>, Vec<f64>) = chain
                .row(i)
                .filter(|&(_, r)| r > T::zero())
                .map(|(j, r)| {
                    acc += r.as_f64();
                    (j, acc)
                })
                .unzip();
            exit.push(acc);
            targets.push(ts);
            cumulative.push(cs);
        }
        Self { exit, targets, cumulative }
    }
}

/// Endless iterator over `(state, entry time)` of one sample path; ends when
/// an absorbing state is entered. Times are accumulated in `f64` regardless
/// of the chain's scalar type.
pub struct JumpProcess {
    table: JumpTable,
    rng: ChaCha8Rng,
    state: usize,
    time: f64,
    started: bool,
}

impl JumpProcess {
    pub fn new<T: Scalar>(chain: &Ctmc<T>, mut rng: ChaCha8Rng) -> Result<Self, SimulationError> {
        let weights: Vec<f64> = chain.lambda().iter().map(|p| p.as_f64().max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(SimulationError::InvalidInitial);
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut state = weights.iter().rposition(|&w| w > 0.0).expect("positive mass somewhere");
        for (s, &w) in weights.iter().enumerate() {
            acc += w;
            if w > 0.0 && u < acc {
                state = s;
                break;
            }
        }
        Ok(Self { table: JumpTable::new(chain), rng, state, time: 0.0, started: false })
    }
}

impl Iterator for JumpProcess {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            self.started = true;
            return Some((self.state, 0.0));
        }
        let exit = self.table.exit[self.state];
        if exit <= 0.0 {
            return None;
        }
        let hold: f64 = self.rng.sample::<f64, _>(Exp1) / exit;
        let u = self.rng.random::<f64>() * exit;
        let cumulative = &self.table.cumulative[self.state];
        let slot = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        self.state = self.table.targets[self.state][slot];
        self.time += hold;
        Some((self.state, self.time))
    }
}

fn check_horizon(horizon: f64) -> Result<(), SimulationError> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(SimulationError::InvalidHorizon(horizon))
    }
}

/// States visited up to a horizon, with the time each was entered.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct Trajectory<T> {
    pub steps: Vec<(usize, T)>,
    pub horizon: T,
    pub seed: u64,
}

impl<T: Scalar> Trajectory<T> {
    /// State occupied at `time` (the last entry at or before it).
    pub fn state_at(&self, time: T) -> usize {
        let idx = self.steps.partition_point(|&(_, t)| t <= time);
        self.steps[idx.saturating_sub(1)].0
    }

    /// Writes `time,state` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,state")?;
        for (state, t) in &self.steps {
            writeln!(out, "{t},{state}")?;
        }
        Ok(())
    }
}

/// Samples one path on `[0, horizon)`.
pub fn sample_trajectory<T: Scalar>(chain: &Ctmc<T>, horizon: T, seed: u64) -> Result<Trajectory<T>, SimulationError> {
    let h = horizon.as_f64();
    check_horizon(h)?;
    let steps = JumpProcess::new(chain, rng_for(seed, 0))?
        .take_while(|&(_, t)| t < h)
        .map(|(s, t)| (s, T::lit(t)))
        .collect();
    Ok(Trajectory { steps, horizon, seed })
}

/// State at `points` evenly spaced times `j·horizon/points`, `j = 0..points`,
/// along the same path [`sample_trajectory`] would produce.
pub fn sample_grid<T: Scalar>(
    chain: &Ctmc<T>,
    horizon: T,
    seed: u64,
    points: usize,
) -> Result<Vec<(T, usize)>, SimulationError> {
    let h = horizon.as_f64();
    check_horizon(h)?;
    let mut jumps = JumpProcess::new(chain, rng_for(seed, 0))?.peekable();
    let mut current = jumps.next().expect("initial state").0;
    let mut out = Vec::with_capacity(points);
    for j in 0..points {
        let t = h * j as f64 / points as f64;
        while let Some(&(s, entered)) = jumps.peek() {
            if entered > t {
                break;
            }
            current = s;
            jumps.next();
        }
        out.push((T::lit(t), current));
    }
    Ok(out)
}

/// Fraction of time spent in each state over `(burn_in, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", bound = "T: Scalar")]
pub struct Occupancy<T> {
    pub pi: Vec<T>,
    pub horizon: T,
    pub burn_in: T,
    pub seed: u64,
    pub stream: u64,
    pub rng: &'static str,
    pub jumps: u64,
}

fn occupancy_on_stream<T: Scalar>(
    chain: &Ctmc<T>,
    horizon: f64,
    burn_in: f64,
    seed: u64,
    stream: u64,
) -> Result<Occupancy<T>, SimulationError> {
    check_horizon(horizon)?;
    if !(burn_in >= 0.0 && burn_in < horizon) {
        return Err(SimulationError::InvalidBurnIn { burn_in, horizon });
    }
    let mut time_in = vec![0.0f64; chain.states()];
    let mut jumps = JumpProcess::new(chain, rng_for(seed, stream))?;
    let (mut state, mut entered) = jumps.next().expect("initial state");
    let mut count = 0u64;
    loop {
        let next = jumps.next();
        let left = next.map_or(horizon, |(_, t)| t.min(horizon));
        let overlap = left - entered.max(burn_in);
        if overlap > 0.0 {
            time_in[state] += overlap;
        }
        match next {
            Some((s, t)) if t < horizon => {
                state = s;
                entered = t;
                count += 1;
            }
            _ => break,
        }
    }
    let total: f64 = time_in.iter().sum();
    let pi = time_in.into_iter().map(|d| T::lit(d / total)).collect();
    Ok(Occupancy { pi, horizon: T::lit(horizon), burn_in: T::lit(burn_in), seed, stream, rng: RNG_NAME, jumps: count })
}

/// Time-weighted occupancy of one path; deterministic per seed.
pub fn empirical_occupancy<T: Scalar>(
    chain: &Ctmc<T>,
    horizon: T,
    seed: u64,
    burn_in: T,
) -> Result<Occupancy<T>, SimulationError> {
    occupancy_on_stream(chain, horizon.as_f64(), burn_in.as_f64(), seed, 0)
}

/// Independent replicates on streams `1..=replicates`, computed in parallel.
pub fn replicate_occupancy<T: Scalar>(
    chain: &Ctmc<T>,
    horizon: T,
    seed: u64,
    burn_in: T,
    replicates: usize,
) -> Result<Vec<Occupancy<T>>, SimulationError> {
    (1..=replicates as u64)
        .into_par_iter()
        .map(|stream| occupancy_on_stream(chain, horizon.as_f64(), burn_in.as_f64(), seed, stream))
        .collect()
}

/// `Σ|a_i - b_i|`.
pub fn l1_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::{one_hot, SupplyStrategy};
    use crate::units::TimeUnit;

    fn two_state(rate: f64) -> Ctmc<f64> {
        Ctmc::new(1, TimeUnit::Hours, vec![1.0, 0.0], [(0, 1, rate), (1, 0, rate)]).unwrap()
    }

    #[test]
    fn absorbing_start_never_moves() {
        let c = Ctmc::<f64>::new(3, TimeUnit::Hours, one_hot(4, 2), std::iter::empty()).unwrap();
        let t = sample_trajectory(&c, 100.0, 1).unwrap();
        assert_eq!(t.steps, vec![(2, 0.0)]);
    }

    #[test]
    fn death_chain_descends_to_zero() {
        let k = 8;
        let entries = (1..=k).map(|s| (s, s - 1, 2.0)).chain((2..=k).map(|s| (s, s - 2, 1.0)));
        let c = Ctmc::new(k, TimeUnit::Hours, one_hot(k + 1, k), entries).unwrap();
        let t = sample_trajectory(&c, 1e6, 9).unwrap();
        assert_eq!(t.steps[0], (k, 0.0));
        assert!(t.steps.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 > w[0].1));
        assert_eq!(t.steps.last().unwrap().0, 0);
    }

    #[test]
    fn holding_time_mean() {
        let rate = 2.5;
        let t = sample_trajectory(&two_state(rate), 50_000.0, 3).unwrap();
        let jumps = t.steps.len() - 1;
        assert!(jumps >= 100_000, "{jumps}");
        let mean = t.steps[jumps].1 / jumps as f64;
        assert!((mean * rate - 1.0).abs() < 0.02, "mean holding time {mean}");
    }

    #[test]
    fn deterministic_per_seed() {
        let c = two_state(1.0);
        assert_eq!(sample_trajectory(&c, 1000.0, 5).unwrap(), sample_trajectory(&c, 1000.0, 5).unwrap());
        assert_ne!(sample_trajectory(&c, 1000.0, 5).unwrap(), sample_trajectory(&c, 1000.0, 6).unwrap());
        let a = empirical_occupancy(&c, 1000.0, 5, 10.0).unwrap();
        let b = empirical_occupancy(&c, 1000.0, 5, 10.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_occupancy() {
        let occ = empirical_occupancy(&two_state(1.0), 200_000.0, 11, 2_000.0).unwrap();
        assert!((occ.pi[0] - 0.5).abs() < 0.01 && (occ.pi[1] - 0.5).abs() < 0.01, "{:?}", occ.pi);
        assert!((occ.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_window_is_one_hot() {
        let c = two_state(1e-9);
        let occ = empirical_occupancy(&c, 10.0 + 1e-6, 1, 10.0).unwrap();
        assert_eq!(occ.pi, vec![1.0, 0.0]);
    }

    #[test]
    fn invalid_arguments() {
        let c = two_state(1.0);
        assert!(sample_trajectory(&c, 0.0, 1).is_err());
        assert!(sample_trajectory(&c, f64::INFINITY, 1).is_err());
        assert!(empirical_occupancy(&c, 10.0, 1, 10.0).is_err());
        assert!(empirical_occupancy(&c, 10.0, 1, -1.0).is_err());
    }

    #[test]
    fn grid_matches_trajectory() {
        let c = Ctmc::new(20, TimeUnit::Hours, one_hot(21, 20), (1..=20).map(|s| (s, s - 1, 1.0)))
            .unwrap()
            .enhance_with_supply(&SupplyStrategy::new(5, 0.3).unwrap())
            .unwrap();
        let traj = sample_trajectory(&c, 500.0, 77).unwrap();
        let grid = sample_grid(&c, 500.0, 77, 1000).unwrap();
        assert_eq!(grid.len(), 1000);
        for &(t, s) in &grid {
            assert_eq!(traj.state_at(t), s, "at t={t}");
        }
    }

    #[test]
    fn replicates_use_distinct_streams() {
        let c = two_state(1.0);
        let reps = replicate_occupancy(&c, 1000.0, 4, 10.0, 3).unwrap();
        assert_eq!(reps.len(), 3);
        assert_ne!(reps[0].pi, reps[1].pi);
        assert_eq!(reps[2], replicate_occupancy(&c, 1000.0, 4, 10.0, 3).unwrap()[2]);
    }

    #[test]
    fn trajectory_csv() {
        let c = Ctmc::<f64>::new(1, TimeUnit::Hours, vec![0.0, 1.0], std::iter::empty()).unwrap();
        let mut buf = Vec::new();
        sample_trajectory(&c, 1.0, 0).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,state\n0,1\n");
    }
}
