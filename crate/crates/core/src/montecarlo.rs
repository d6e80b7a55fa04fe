//! Schedule-independent Monte Carlo loops.
//!
//! Trials are cut into fixed blocks of [`BLOCK`] trials. Block `b` always uses
//! ChaCha stream `b` of the given seed, so results do not depend on how many
//! worker threads pick up the blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const BLOCK: usize = 1024;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a master seed with a path of tags (scheme, sweep index, purpose...).
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn block_ranges(trials: usize) -> Vec<(u64, usize)> {
    (0..trials.div_ceil(BLOCK))
        .map(|b| (b as u64, BLOCK.min(trials - b * BLOCK)))
        .collect()
}

/// Runs `f` once per trial and returns the results in trial order.
pub fn sample_stats<F>(trials: usize, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let run = |&(b, len): &(u64, usize)| {
        let mut rng = stream_rng(seed, b);
        (0..len).map(|_| f(&mut rng)).collect::<Vec<f64>>()
    };
    let blocks = block_ranges(trials);
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<f64>> = blocks.par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<f64>> = blocks.iter().map(run).collect();
    parts.concat()
}

/// Number of trials for which `f` returns true.
pub fn count_hits<F>(trials: usize, seed: u64, f: F) -> usize
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let run = |&(b, len): &(u64, usize)| {
        let mut rng = stream_rng(seed, b);
        (0..len).filter(|_| f(&mut rng)).count()
    };
    let blocks = block_ranges(trials);
    #[cfg(feature = "parallel")]
    let total = blocks.par_iter().map(run).sum();
    #[cfg(not(feature = "parallel"))]
    let total = blocks.iter().map(run).sum();
    total
}

/// Wilson score interval (95%) for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_std_error(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}
