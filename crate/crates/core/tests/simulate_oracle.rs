use shelfwise_core::ctmc::{one_hot, Ctmc, SupplyStrategy};
use shelfwise_core::simulate::{l1_distance, replicate_occupancy, rng_for, JumpProcess};
use shelfwise_core::synthetic::poisson_sublog;
use shelfwise_core::{discover_ctmc, empirical_occupancy, steady_state, TimeUnit};

/// 99.9% quantiles of the chi-square distribution, indexed by degrees of freedom.
const CHI2_999: [f64; 11] = [0.0, 10.83, 13.82, 16.27, 18.47, 20.52, 22.46, 24.32, 26.12, 27.88, 29.59];

fn test_chain() -> Ctmc<f64> {
    let entries = [
        (0, 1, 0.7),
        (0, 3, 0.2),
        (1, 0, 1.5),
        (1, 2, 0.4),
        (1, 4, 2.2),
        (2, 0, 0.3),
        (2, 3, 1.0),
        (3, 4, 0.9),
        (3, 1, 0.1),
        (3, 2, 0.6),
        (4, 0, 2.0),
    ];
    Ctmc::new(4, TimeUnit::Hours, one_hot(5, 0), entries).unwrap()
}

#[test]
fn jump_targets_and_holding_times_follow_the_generator() {
    let chain = test_chain();
    let n = chain.states();
    let mut counts = vec![vec![0u64; n]; n];
    let mut hold_sum = vec![0.0; n];
    let mut path = JumpProcess::new(&chain, rng_for(2024, 0)).unwrap();
    let (mut state, mut t) = path.next().unwrap();
    for _ in 0..100_000 {
        let (next, at) = path.next().unwrap();
        counts[state][next] += 1;
        hold_sum[state] += at - t;
        state = next;
        t = at;
    }
    for i in 0..n {
        let visits: u64 = counts[i].iter().sum();
        let exit = chain.exit_rate(i);
        let targets: Vec<(usize, f64)> = chain.row(i).collect();
        let mut chi2 = 0.0;
        for &(j, r) in &targets {
            let expected = visits as f64 * r / exit;
            let diff = counts[i][j] as f64 - expected;
            chi2 += diff * diff / expected;
        }
        let jumps_elsewhere: u64 = (0..n).filter(|j| chain.rate(i, *j) == 0.0).map(|j| counts[i][j]).sum();
        assert_eq!(jumps_elsewhere, 0, "state {i} jumped along a zero rate");
        assert!(chi2 <= CHI2_999[targets.len() - 1], "state {i}: chi2 {chi2}");
        // Mean of `visits` exponentials: relative sd is 1/sqrt(visits).
        let mean_hold = hold_sum[i] / visits as f64;
        let tol = 4.0 / (visits as f64).sqrt();
        assert!((mean_hold * exit - 1.0).abs() <= tol, "state {i}: mean hold {mean_hold}");
    }
}

#[test]
fn occupancy_converges_to_steady_state() {
    let chain = test_chain();
    let pi = steady_state(&chain).unwrap().pi;
    let mut previous = f64::INFINITY;
    for horizon in [1e3, 1e4, 1e5] {
        let runs = replicate_occupancy(&chain, horizon, 17, horizon * 0.01, 8).unwrap();
        let mean_l1 = runs.iter().map(|o| l1_distance(&o.pi, &pi)).sum::<f64>() / runs.len() as f64;
        assert!(mean_l1 < previous, "horizon {horizon}: {mean_l1} did not improve on {previous}");
        previous = mean_l1;
    }
    assert!(previous < 0.02, "L1 at the longest horizon: {previous}");
}

#[test]
fn replicates_use_distinct_streams() {
    let chain = test_chain();
    let single = empirical_occupancy(&chain, 500.0, 5, 5.0).unwrap();
    let reps = replicate_occupancy(&chain, 500.0, 5, 5.0, 3).unwrap();
    assert_eq!(reps.iter().map(|o| o.stream).collect::<Vec<_>>(), [1, 2, 3]);
    assert!(reps.iter().all(|o| o.pi != single.pi));
    assert_ne!(reps[0].pi, reps[1].pi);
    assert_eq!(empirical_occupancy(&chain, 500.0, 5, 5.0).unwrap(), single);
}

#[test]
fn discovered_supply_chain_simulation_matches_solver() {
    let sub = poisson_sublog("p", &[(1, 0.1), (2, 0.2), (3, 0.3)], 20_000.0, TimeUnit::Hours, 8).unwrap();
    let (chain, _) = discover_ctmc::<f64>(&sub, 100, 100, TimeUnit::Hours).unwrap();
    let chain = chain.enhance_with_supply(&SupplyStrategy::new(10, 0.14).unwrap()).unwrap();
    let pi = steady_state(&chain).unwrap().pi;
    let occ = empirical_occupancy(&chain, 200_000.0, 99, 2_000.0).unwrap();
    let dist = l1_distance(&occ.pi, &pi);
    assert!(dist <= 0.05, "L1 {dist}");
}
