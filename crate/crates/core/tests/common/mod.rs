//! Shared helpers and independent reference implementations for the
//! integration tests. Nothing here calls into the code under test except to
//! draw channels and build the objects being compared.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use onebit_mimo::baseband::{draw_channel, lift_channel, ChannelMatrix, Constellation, LiftedChannel, Modulation};
use onebit_mimo::spatial_code::SpatialCode;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_channel(seed: u64, k: usize, nr: usize) -> ChannelMatrix {
    draw_channel(k, nr, &mut rng(seed)).unwrap()
}

pub fn random_code(seed: u64, modulation: Modulation, k: usize, nr: usize, snr_db: f64) -> (LiftedChannel, SpatialCode) {
    let ch = lift_channel(&random_channel(seed, k, nr));
    let code = SpatialCode::build(&ch, &Constellation::new(modulation), snr_db).unwrap();
    (ch, code)
}

/// Gray 4-QAM written out by hand: first label bit on the real part.
pub fn qam4_points() -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..4)
        .map(|w| {
            let (b1, b2) = ((w >> 1) & 1, w & 1);
            Complex64::new(if b1 == 0 { s } else { -s }, if b2 == 0 { s } else { -s })
        })
        .collect()
}

pub fn bpsk_points() -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]
}

pub fn q_oracle(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Codebook rebuilt from the complex model: user `j` sends digit `j` of `l`,
/// the `N = 2 N_r` outputs are `Re(y)` followed by `Im(y)`.
pub struct OracleCode {
    pub words: Vec<Vec<u8>>,
    pub eps: Vec<Vec<f64>>,
}

pub fn oracle_code(h: &ChannelMatrix, points: &[Complex64], snr_db: f64) -> OracleCode {
    let (k, nr, m) = (h.n_users(), h.n_rx(), points.len());
    let gain = 10f64.powf(snr_db / 10.0).sqrt();
    let mut words = Vec::new();
    let mut eps = Vec::new();
    for l in 0..m.pow(k as u32) {
        let digits: Vec<usize> = (0..k).map(|j| (l / m.pow(j as u32)) % m).collect();
        let y: Vec<Complex64> = (0..nr)
            .map(|i| (0..k).map(|j| h.get(i, j) * points[digits[j]]).sum::<Complex64>() * gain)
            .collect();
        let a: Vec<f64> = y.iter().map(|v| v.re).chain(y.iter().map(|v| v.im)).collect();
        words.push(a.iter().map(|&v| u8::from(v < 0.0)).collect());
        eps.push(
            a.iter()
                .map(|&v| q_oracle(v.abs() / 0.5f64.sqrt()).clamp(1e-12, 0.5))
                .collect(),
        );
    }
    OracleCode { words, eps }
}

/// Digits of `l` in base `m`, user 0 first.
pub fn digits(l: usize, m: usize, k: usize) -> Vec<usize> {
    (0..k).map(|j| (l / m.pow(j as u32)) % m).collect()
}

/// Bit `i` (1 = most significant) of a `p`-bit label.
pub fn label(w: usize, p: usize, i: usize) -> usize {
    (w >> (p - i)) & 1
}

/// Weighted Hamming distance written directly from the definition.
pub fn weighted(r: &[u8], c: &[u8], eps: &[f64]) -> f64 {
    r.iter()
        .zip(c)
        .zip(eps)
        .filter(|((a, b), _)| a != b)
        .map(|(_, e)| (1.0 / e).ln())
        .sum()
}

pub fn bits_of(value: u64, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((value >> i) & 1) as u8).collect()
}

/// Bhattacharyya construction: the set of `n - k` indices with the largest
/// parameter, first stage on the most significant index bit.
pub fn frozen_oracle(n: usize, info: usize, design_db: f64) -> Vec<usize> {
    let stages = n.trailing_zeros();
    let z0 = (-(10f64.powf(design_db / 10.0))).exp();
    let z: Vec<f64> = (0..n)
        .map(|idx| {
            let mut v = z0;
            for s in (0..stages).rev() {
                v = if (idx >> s) & 1 == 0 { 2.0 * v - v * v } else { v * v };
            }
            v
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[b].partial_cmp(&z[a]).unwrap().then(a.cmp(&b)));
    let mut frozen = order[..n - info].to_vec();
    frozen.sort_unstable();
    frozen
}

/// `u F^{(x)n}` over GF(2) by explicit Kronecker expansion.
pub fn polar_encode_oracle(u: &[u8]) -> Vec<u8> {
    let n = u.len();
    // Row i of F^{(x)n} has a one in column j iff the bits of j are a subset of the bits of i.
    (0..n)
        .map(|j| (0..n).filter(|&i| i & j == j).fold(0u8, |acc, i| acc ^ u[i]))
        .collect()
}
