//! Channel codes behind a common encode/decode interface.
//!
//! LLRs follow one sign convention across the crate: positive favours bit 0.

use crate::error::{invalid, shape, Result};

/// A binary block code with a soft-input decoder.
///
/// The detectors only need `decode` for the LLR stream of one user and
/// `encode` to regenerate the transmitted coded bits from a decoded block.
pub trait ChannelCode: Send + Sync {
    /// Coded block length `n`.
    fn block_len(&self) -> usize;

    /// Information bits per block.
    fn info_len(&self) -> usize;

    fn encode(&self, info: &[u8]) -> Result<Vec<u8>>;

    fn decode(&self, llrs: &[f64]) -> Result<Vec<u8>>;

    /// Short human-readable description, recorded in result metadata.
    fn describe(&self) -> String;
}

/// Frozen positions (0-based, ascending) of a length-`n`, rate-`rate` polar
/// code: the `n(1 - rate)` synthetic channels with the largest Bhattacharyya
/// parameter, starting from `Z = exp(-10^(design_db / 10))` and applying
/// `Z -> (2Z - Z^2, Z^2)` once per stage. Ties freeze the lower index.
pub fn construct_frozen_set(n: usize, rate: f64, design_db: f64) -> Result<Vec<usize>> {
    let info = info_len_for(n, rate)?;
    let mut z = vec![(-(10f64.powf(design_db / 10.0))).exp()];
    while z.len() < n {
        z = z
            .iter()
            .flat_map(|&v| [2.0 * v - v * v, v * v])
            .collect();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    let mut frozen = order[..n - info].to_vec();
    frozen.sort_unstable();
    Ok(frozen)
}

fn info_len_for(n: usize, rate: f64) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return invalid(format!("polar block length {n} is not a power of two >= 2"));
    }
    if !(rate > 0.0 && rate < 1.0) {
        return invalid(format!("code rate {rate} outside (0, 1)"));
    }
    let info = n as f64 * rate;
    if (info - info.round()).abs() > 1e-9 {
        return invalid(format!("n * R = {info} is not an integer"));
    }
    Ok(info.round() as usize)
}

/// `x = u F^{(x)log2 n}` over GF(2) with `F = [[1, 0], [1, 1]]`, in place.
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    let mut half = 1;
    while half < n {
        for block in (0..n).step_by(2 * half) {
            for j in block..block + half {
                bits[j] ^= bits[j + half];
            }
        }
        half *= 2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarCode {
    n: usize,
    rate: f64,
    design_db: f64,
    frozen: Vec<bool>,
    info_positions: Vec<usize>,
}

impl PolarCode {
    pub fn new(n: usize, rate: f64, design_db: f64) -> Result<Self> {
        let frozen_set = construct_frozen_set(n, rate, design_db)?;
        let mut frozen = vec![false; n];
        for &i in &frozen_set {
            frozen[i] = true;
        }
        let info_positions = (0..n).filter(|&i| !frozen[i]).collect();
        Ok(PolarCode {
            n,
            rate,
            design_db,
            frozen,
            info_positions,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn design_db(&self) -> f64 {
        self.design_db
    }

    pub fn frozen_positions(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.frozen[i]).collect()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }
}

impl ChannelCode for PolarCode {
    fn block_len(&self) -> usize {
        self.n
    }

    fn info_len(&self) -> usize {
        self.info_positions.len()
    }

    fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.info_len() {
            return shape(format!(
                "{} info bits for a polar code carrying {}",
                info.len(),
                self.info_len()
            ));
        }
        let mut u = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            if b > 1 {
                return invalid(format!("info bit value {b} is not binary"));
            }
            u[pos] = b;
        }
        polar_transform(&mut u);
        Ok(u)
    }

    /// Successive-cancellation decoding with min-sum check-node updates.
    /// A zero LLR decides bit 0; frozen positions always decode to 0.
    fn decode(&self, llrs: &[f64]) -> Result<Vec<u8>> {
        if llrs.len() != self.n {
            return shape(format!("{} LLRs for block length {}", llrs.len(), self.n));
        }
        if let Some(i) = llrs.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite LLR at position {i}"));
        }
        let mut u = Vec::with_capacity(self.n);
        sc_node(llrs, &self.frozen, &mut u);
        Ok(self.info_positions.iter().map(|&i| u[i]).collect())
    }

    fn describe(&self) -> String {
        format!(
            "polar n={} R={} bhattacharyya design {} dB, SC min-sum decoder",
            self.n, self.rate, self.design_db
        )
    }
}

#[inline]
fn check_node(a: f64, b: f64) -> f64 {
    let mag = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -mag
    } else {
        mag
    }
}

// Decodes the subtree rooted at `llrs`, pushes its u-decisions and returns the
// re-encoded partial sums of the subtree.
fn sc_node(llrs: &[f64], frozen: &[bool], u: &mut Vec<u8>) -> Vec<u8> {
    let n = llrs.len();
    if n == 1 {
        let bit = if frozen[0] || llrs[0] >= 0.0 { 0 } else { 1 };
        u.push(bit);
        return vec![bit];
    }
    let half = n / 2;
    let (top, bottom) = llrs.split_at(half);
    let left: Vec<f64> = top.iter().zip(bottom).map(|(&a, &b)| check_node(a, b)).collect();
    let v1 = sc_node(&left, &frozen[..half], u);
    let right: Vec<f64> = top
        .iter()
        .zip(bottom)
        .zip(&v1)
        .map(|((&a, &b), &s)| if s == 0 { b + a } else { b - a })
        .collect();
    let v2 = sc_node(&right, &frozen[half..], u);
    v1.iter().zip(&v2).map(|(a, b)| a ^ b).chain(v2.iter().copied()).collect()
}

/// Repeats the information block `repeats` times. Used as a minimal code in
/// tests and small experiments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepetitionCode {
    info: usize,
    repeats: usize,
}

impl RepetitionCode {
    pub fn new(info: usize, repeats: usize) -> Result<Self> {
        if info == 0 || repeats == 0 {
            return invalid("repetition code needs positive sizes");
        }
        Ok(RepetitionCode { info, repeats })
    }
}

impl ChannelCode for RepetitionCode {
    fn block_len(&self) -> usize {
        self.info * self.repeats
    }

    fn info_len(&self) -> usize {
        self.info
    }

    fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.info {
            return shape(format!("{} info bits for repetition code of {}", info.len(), self.info));
        }
        Ok(info.iter().copied().cycle().take(self.block_len()).collect())
    }

    fn decode(&self, llrs: &[f64]) -> Result<Vec<u8>> {
        if llrs.len() != self.block_len() {
            return shape(format!("{} LLRs for block length {}", llrs.len(), self.block_len()));
        }
        let mut sums = vec![0.0; self.info];
        for (i, &v) in llrs.iter().enumerate() {
            if !v.is_finite() {
                return invalid(format!("non-finite LLR at position {i}"));
            }
            sums[i % self.info] += v;
        }
        Ok(sums.iter().map(|&s| u8::from(s < 0.0)).collect())
    }

    fn describe(&self) -> String {
        format!("repetition k={} x{}", self.info, self.repeats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // G_n as an explicit Kronecker power, multiplied out over GF(2).
    fn kronecker_encode(u: &[u8]) -> Vec<u8> {
        let n = u.len();
        let mut g = vec![vec![1u8]];
        while g.len() < n {
            let s = g.len();
            let mut next = vec![vec![0u8; 2 * s]; 2 * s];
            for i in 0..s {
                for j in 0..s {
                    next[i][j] = g[i][j];
                    next[s + i][j] = g[i][j];
                    next[s + i][s + j] = g[i][j];
                }
            }
            g = next;
        }
        (0..n)
            .map(|col| (0..n).fold(0u8, |acc, row| acc ^ (u[row] & g[row][col])))
            .collect()
    }

    #[test]
    fn frozen_set_examples() {
        assert_eq!(construct_frozen_set(2, 0.5, 0.0).unwrap(), vec![0]);
        let f = construct_frozen_set(128, 0.5, 0.0).unwrap();
        assert_eq!(f.len(), 64);
        assert_eq!(f, construct_frozen_set(128, 0.5, 0.0).unwrap());
        assert!(f.contains(&0) && !f.contains(&127));
        assert!(construct_frozen_set(100, 0.5, 0.0).is_err());
        assert!(construct_frozen_set(8, 0.3, 0.0).is_err());
        assert!(construct_frozen_set(8, 1.0, 0.0).is_err());
    }

    #[test]
    fn encode_examples() {
        let code = PolarCode::new(2, 0.5, 0.0).unwrap();
        assert_eq!(code.encode(&[1]).unwrap(), vec![1, 1]);
        assert_eq!(code.encode(&[0]).unwrap(), vec![0, 0]);
        assert!(code.encode(&[1, 0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u: Vec<u8> = (0..4).map(|_| rng.random_range(0..2)).collect();
            let mut x = u.clone();
            polar_transform(&mut x);
            assert_eq!(x, kronecker_encode(&u));
        }
        let u: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
        let mut x = u.clone();
        polar_transform(&mut x);
        assert_eq!(x, kronecker_encode(&u));
    }

    #[test]
    fn decode_examples() {
        let code = PolarCode::new(2, 0.5, 0.0).unwrap();
        assert_eq!(code.decode(&[-10.0, -10.0]).unwrap(), vec![1]);
        let big = PolarCode::new(128, 0.5, 0.0).unwrap();
        assert_eq!(big.decode(&[0.0; 128]).unwrap(), vec![0; 64]);
        let mut bad = vec![1.0; 128];
        bad[5] = f64::NAN;
        assert!(big.decode(&bad).is_err());
        assert!(big.decode(&[1.0; 64]).is_err());
    }

    #[test]
    fn noiseless_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [2usize, 4, 8, 16, 32, 64, 128, 256] {
            for rate in [0.25, 0.5, 0.75] {
                if (n as f64 * rate).fract() != 0.0 {
                    continue;
                }
                let code = PolarCode::new(n, rate, 0.0).unwrap();
                for _ in 0..20 {
                    let info: Vec<u8> = (0..code.info_len()).map(|_| rng.random_range(0..2)).collect();
                    let llrs: Vec<f64> = code
                        .encode(&info)
                        .unwrap()
                        .iter()
                        .map(|&b| if b == 0 { 1e3 } else { -1e3 })
                        .collect();
                    assert_eq!(code.decode(&llrs).unwrap(), info);
                }
            }
        }
    }

    #[test]
    fn repetition_code() {
        let code = RepetitionCode::new(3, 2).unwrap();
        assert_eq!(code.encode(&[1, 0, 1]).unwrap(), vec![1, 0, 1, 1, 0, 1]);
        assert_eq!(
            code.decode(&[-1.0, 2.0, 0.5, -1.0, -1.0, -3.0]).unwrap(),
            vec![1, 0, 1]
        );
    }
}
