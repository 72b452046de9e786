//! Seeded random streams and order-fixed reductions.
//!
//! Every random quantity is drawn from a ChaCha8 generator obtained by
//! [`stream`]: the user seed is mixed with a purpose tag (SplitMix64
//! finalizer) to give the generator key, and the work-item index selects the
//! ChaCha stream. Work items therefore own disjoint streams and produce the
//! same draws no matter which thread runs them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for [`stream`]. Distinct tags give unrelated key material.
pub mod tag {
    pub const SPHERE: u64 = 1;
    pub const SHELL_PILOT: u64 = 2;
    pub const SHELL_MAIN: u64 = 3;
    pub const CAP: u64 = 4;
    pub const OUTER: u64 = 5;
    pub const INNER: u64 = 6;
    pub const LATTICE_MESH: u64 = 7;
    pub const LATTICE_VERIFY: u64 = 8;
    pub const APERTURE: u64 = 9;
    pub const BALL: u64 = 10;
    pub const CARLESON: u64 = 11;
    pub const EXPERIMENT: u64 = 12;
    pub const RADEMACHER: u64 = 13;
}

/// SplitMix64 finalizer.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed, used when a work item launches nested estimators.
pub fn child_seed(seed: u64, tag: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(tag)).wrapping_add(index))
}

/// The generator for work item `index` of purpose `tag` under `seed`.
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(tag)));
    rng.set_stream(index);
    rng
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and variance of the mean, with pairwise accumulation.
pub fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    if m == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (m as f64 - 1.0);
    (mean, var / m as f64)
}

/// Configures the global worker pool from `TENTLAB_THREADS` when set.
///
/// Returns the worker count in effect. Calling it more than once is harmless.
pub fn configure_threads() -> usize {
    if let Some(n) = std::env::var("TENTLAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, tag::SPHERE, 3), |r, _| Some(r.gen())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, tag::SPHERE, 3), |r, _| Some(r.gen())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, tag::SPHERE, 4), |r, _| Some(r.gen())).collect();
        let d: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, tag::CAP, 3), |r, _| Some(r.gen())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn mean_and_var_of_constant() {
        let (m, v) = mean_and_var(&[2.0; 10]);
        assert_eq!(m, 2.0);
        assert_eq!(v, 0.0);
    }
}
