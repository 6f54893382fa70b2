//! Seeded sampling. Every campaign draws its inputs sequentially from one
//! ChaCha8 stream before any parallel evaluation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interval::{Interval, IntervalSet};
use crate::space::{BlockLayout, Functional};

/// Separate streams keep campaigns sharing a seed independent.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `[a, b)` from two uniform endpoints, rejected until `b - a >= min_measure`.
/// Returns the interval and the number of rejected draws.
pub fn interval(rng: &mut impl Rng, min_measure: f64) -> (Interval, usize) {
    let mut rejected = 0;
    loop {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        if hi - lo >= min_measure && hi > lo {
            return (Interval::new(lo, hi).expect("ordered endpoints in [0, 1)"), rejected);
        }
        rejected += 1;
    }
}

/// Union of up to `max_parts` random intervals; zero parts gives `{}`.
pub fn interval_set(rng: &mut impl Rng, max_parts: usize) -> IntervalSet {
    let parts = rng.random_range(0..=max_parts);
    let pieces: Vec<Interval> = (0..parts).map(|_| interval(rng, 0.0).0).collect();
    IntervalSet::from_intervals(pieces)
}

/// Up to `max_support` coordinates at levels `1..=depth` with coefficients
/// uniform in `[-1, 1]`.
pub fn functional(rng: &mut impl Rng, layout: &Arc<BlockLayout>, depth: u32, max_support: usize) -> Functional {
    let size = rng.random_range(0..=max_support);
    let coeffs: Vec<(u32, u64, f64)> = (0..size)
        .map(|_| {
            let n = rng.random_range(1..=depth);
            let k = rng.random_range(1..=1u64 << n);
            (n, k, rng.random_range(-1.0..=1.0))
        })
        .collect();
    Functional::new(layout.clone(), coeffs).expect("sampled inside the layout")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let a: Vec<f64> = (0..5).map(|_| interval(&mut rng(9, 1), 0.1).0.lo()).collect();
        let b: Vec<f64> = (0..5).map(|_| interval(&mut rng(9, 1), 0.1).0.lo()).collect();
        assert_eq!(a, b);
        let c = interval(&mut rng(9, 2), 0.1).0.lo();
        assert_ne!(a[0], c);
    }

    #[test]
    fn intervals_respect_floor() {
        let mut r = rng(3, 0);
        let mut rejected = 0;
        for _ in 0..1000 {
            let (i, rej) = interval(&mut r, 0.5);
            assert!(i.measure() >= 0.5);
            rejected += rej;
        }
        // P(|x - y| < 0.5) = 3/4
        assert!(rejected > 1000);
    }
}
