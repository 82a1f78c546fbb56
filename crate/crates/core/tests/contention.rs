use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mcdmac::protocol::{simulate_contention, MacTimings};

/// Slotted CSMA with a fixed window, written with integer slot counters: the
/// smallest counters transmit together, everyone else subtracts that count.
fn slotted_collision_rate(n: usize, window: u32, rounds: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counters: Vec<u32> = (0..n).map(|_| rng.random_range(0..window)).collect();
    let (mut sent, mut collided) = (0u64, 0u64);
    for _ in 0..rounds {
        let min = *counters.iter().min().unwrap();
        let winners: Vec<usize> = (0..n).filter(|&i| counters[i] == min).collect();
        sent += winners.len() as u64;
        if winners.len() > 1 {
            collided += winners.len() as u64;
        }
        for c in counters.iter_mut() {
            *c -= min;
        }
        for w in winners {
            counters[w] = rng.random_range(0..window);
        }
    }
    collided as f64 / sent as f64
}

#[test]
fn continuous_backoff_matches_slotted_model() {
    let timings = MacTimings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let stats = simulate_contention(10, 10_000, &timings, &mut rng);
    let oracle = slotted_collision_rate(10, timings.contention_window, 10_000, 1234);
    let got = stats.collision_rate();
    assert!(
        (got - oracle).abs() <= 0.1 * oracle,
        "engine {got:.4} vs slotted {oracle:.4}"
    );
    assert_eq!(stats.successes + stats.collided, stats.transmissions);
}

#[test]
fn lone_contender_never_collides() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let stats = simulate_contention(1, 1000, &MacTimings::default(), &mut rng);
    assert_eq!(stats.collided, 0);
    assert_eq!(stats.successes, 1000);
}
