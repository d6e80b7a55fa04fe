//! Random scenario generators shared by unit and integration tests.

use rand::Rng;

use crate::channel::ChannelSet;
use crate::numerics::{standard_complex_normal, CMatrix, CVector};

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| standard_complex_normal(rng))
}

/// Random PSD matrix of the given rank with trace `trace`.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rank: usize, trace: f64, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, rank, |_, _| standard_complex_normal(rng));
    let m = &g * g.adjoint();
    let t = m.trace().re;
    if t == 0.0 {
        m
    } else {
        m.scale(trace / t)
    }
}

/// Unstructured channel set: Gaussian LOS vectors and random low-rank NLOS
/// correlations of comparable power.
pub fn random_channel_set<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> ChannelSet {
    let rank_k = (k / 2).max(1);
    let rank_n = (n / 2).max(1);
    ChannelSet {
        h_s1: random_vector(k, rng),
        h_r1: random_vector(n, rng),
        a_t: random_vector(k, rng),
        b_t: random_vector(n, rng).unscale((n as f64).sqrt()),
        hbar_s2: random_vector(k, rng),
        hbar_r2: random_vector(n, rng),
        r_s2: random_psd(k, rank_k, 0.5 * k as f64, rng),
        r_r2: random_psd(n, rank_n, 0.5 * n as f64, rng),
        r_clutter: random_psd(k, rank_k, k as f64, rng),
    }
}
