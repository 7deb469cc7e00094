//! The spatial-domain code induced by a known channel.
//!
//! Every joint message `l in {0, ..., m^K - 1}` (digit `j` of the base-`m`
//! expansion is user `j`'s message) maps to the noiseless quantized channel
//! output `c_l`. Each of the `N` observation dimensions then behaves as a
//! binary symmetric channel whose crossover probability `eps[l][i]` depends on
//! the transmitted message. Codewords are kept packed in a `u64` and the
//! per-codeword weights `ln(1 / eps)` are stored row-contiguously so that the
//! weighted Hamming scan is an XOR followed by a masked weight sum.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use crate::baseband::{
    label_bit, modulate, snr_linear, Constellation, LiftedChannel, ObservationVector,
    MAX_DIMS, NOISE_STD,
};
use crate::error::{invalid, shape, Error, Result};

/// Lower clamp on crossover probabilities; keeps every weight finite.
pub const EPS_MIN: f64 = 1e-12;
/// Upper clamp on crossover probabilities.
pub const EPS_MAX: f64 = 0.5;

/// Standard Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Sign-flip probability of a quantized dimension whose noiseless input is
/// `a`, under real Gaussian noise of standard deviation `sigma`.
pub fn crossover(a: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid(format!("noise std must be positive, got {sigma}"));
    }
    if a.is_nan() {
        return invalid("NaN channel projection");
    }
    Ok(clamp_eps(q_function(a.abs() / sigma)))
}

fn clamp_eps(eps: f64) -> f64 {
    eps.clamp(EPS_MIN, EPS_MAX)
}

/// Base-`m` expansion of `l` into `k` digits, least significant first.
pub fn expand_index(l: usize, m: usize, k: usize) -> Result<Vec<usize>> {
    let size = checked_pow(m, k)?;
    if l >= size {
        return invalid(format!("index {l} out of range for {m}^{k} codewords"));
    }
    let mut rest = l;
    Ok((0..k)
        .map(|_| {
            let d = rest % m;
            rest /= m;
            d
        })
        .collect())
}

/// Inverse of [`expand_index`].
pub fn compress_messages(messages: &[usize], m: usize) -> Result<usize> {
    let mut l = 0usize;
    for (j, &w) in messages.iter().enumerate().rev() {
        if w >= m {
            return invalid(format!("message {w} of user {j} out of range for m = {m}"));
        }
        l = l
            .checked_mul(m)
            .and_then(|v| v.checked_add(w))
            .ok_or_else(|| Error::InvalidInput("joint message index overflows".into()))?;
    }
    Ok(l)
}

fn checked_pow(m: usize, k: usize) -> Result<usize> {
    if m < 2 {
        return invalid(format!("modulation order must be at least 2, got {m}"));
    }
    u32::try_from(k)
        .ok()
        .and_then(|k| m.checked_pow(k))
        .ok_or_else(|| Error::InvalidInput(format!("{m}^{k} codewords overflow")))
}

/// Weighted Hamming distance `sum_i alpha_i 1{x_i != y_i}`.
pub fn weighted_hamming(x: &[u8], y: &[u8], alpha: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() != alpha.len() {
        return shape(format!(
            "weighted Hamming operands have lengths {}, {} and {}",
            x.len(),
            y.len(),
            alpha.len()
        ));
    }
    Ok(x.iter()
        .zip(y)
        .zip(alpha)
        .filter(|((a, b), _)| a != b)
        .map(|(_, w)| w)
        .sum())
}

#[derive(Debug, Clone)]
pub struct SpatialCode {
    order: usize,
    bits: usize,
    users: usize,
    dims: usize,
    powers: Vec<usize>,
    codewords: Vec<u64>,
    eps: Vec<f64>,
    weights: Vec<f64>,
}

impl SpatialCode {
    /// Builds the code for `channel` with users transmitting at `snr_db`.
    pub fn build(channel: &LiftedChannel, constellation: &Constellation, snr_db: f64) -> Result<Self> {
        let m = constellation.order();
        let k = channel.n_users();
        let dims = channel.dims();
        if dims > MAX_DIMS {
            return invalid(format!("{dims} observation dimensions exceed {MAX_DIMS}"));
        }
        let size = checked_pow(m, k)?;
        let gain = snr_linear(snr_db).sqrt();

        // contrib[(j * m + w) * dims + i]: user j sending w, seen at dimension i
        let real = channel.real();
        let cols = channel.input_dims();
        let mut contrib = vec![0.0; k * m * dims];
        for j in 0..k {
            for w in 0..m {
                let s = modulate(w, constellation)?;
                let block = &mut contrib[(j * m + w) * dims..(j * m + w + 1) * dims];
                for (i, c) in block.iter_mut().enumerate() {
                    *c = gain * (real[i * cols + j] * s.re + real[i * cols + k + j] * s.im);
                }
            }
        }

        let mut codewords = Vec::with_capacity(size);
        let mut eps = Vec::with_capacity(size * dims);
        let mut projection = vec![0.0; dims];
        let mut digits = vec![0usize; k];
        for _ in 0..size {
            projection.iter_mut().for_each(|a| *a = 0.0);
            for (j, &w) in digits.iter().enumerate() {
                let block = &contrib[(j * m + w) * dims..(j * m + w + 1) * dims];
                projection.iter_mut().zip(block).for_each(|(a, c)| *a += c);
            }
            let mut word = 0u64;
            for (i, &a) in projection.iter().enumerate() {
                if a < 0.0 {
                    word |= 1 << i;
                }
                eps.push(crossover(a, NOISE_STD)?);
            }
            codewords.push(word);
            for d in digits.iter_mut() {
                *d += 1;
                if *d < m {
                    break;
                }
                *d = 0;
            }
        }
        Ok(Self::assemble(m, k, dims, codewords, eps))
    }

    /// Builds a code from explicit codewords and crossover probabilities
    /// (one row of `N` entries per joint message). Probabilities are clamped
    /// to `[EPS_MIN, EPS_MAX]`.
    pub fn from_parts(order: usize, users: usize, codewords: &[Vec<u8>], eps: &[Vec<f64>]) -> Result<Self> {
        if !order.is_power_of_two() {
            return invalid(format!("modulation order {order} is not a power of two"));
        }
        let size = checked_pow(order, users)?;
        if codewords.len() != size || eps.len() != size {
            return shape(format!(
                "expected {size} codewords and crossover rows, got {} and {}",
                codewords.len(),
                eps.len()
            ));
        }
        let dims = codewords.first().map_or(0, Vec::len);
        let mut packed = Vec::with_capacity(size);
        let mut flat = Vec::with_capacity(size * dims);
        for (word, row) in codewords.iter().zip(eps) {
            if word.len() != dims || row.len() != dims {
                return shape("codeword and crossover rows must all have length N");
            }
            packed.push(ObservationVector::from_bits(word)?.packed());
            for &e in row {
                if !(0.0..=1.0).contains(&e) {
                    return invalid(format!("crossover probability {e} outside [0, 1]"));
                }
                flat.push(clamp_eps(e));
            }
        }
        Ok(Self::assemble(order, users, dims, packed, flat))
    }

    fn assemble(order: usize, users: usize, dims: usize, codewords: Vec<u64>, eps: Vec<f64>) -> Self {
        let weights = eps.iter().map(|e| -e.ln()).collect();
        let powers = (0..=users).map(|j| order.pow(j as u32)).collect();
        SpatialCode {
            order,
            bits: order.trailing_zeros() as usize,
            users,
            dims,
            powers,
            codewords,
            eps,
            weights,
        }
    }

    /// Number of codewords, `m^K`.
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Codeword length `N`.
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// `m^j`.
    pub fn power(&self, j: usize) -> usize {
        self.powers[j]
    }

    /// User `user`'s message inside joint message `l`.
    #[inline]
    pub fn digit(&self, l: usize, user: usize) -> usize {
        (l >> (user * self.bits)) & (self.order - 1)
    }

    pub fn codeword(&self, l: usize) -> Vec<u8> {
        ObservationVector::from_packed(self.codewords[l], self.dims).to_bits()
    }

    pub fn codeword_packed(&self, l: usize) -> u64 {
        self.codewords[l]
    }

    pub fn eps(&self, l: usize) -> &[f64] {
        &self.eps[l * self.dims..(l + 1) * self.dims]
    }

    /// `ln(1 / eps[l][i])` for every dimension.
    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l * self.dims..(l + 1) * self.dims]
    }

    /// Weighted Hamming distance between `r` and `c_l` under `c_l`'s weights.
    #[inline]
    pub fn distance(&self, r: &ObservationVector, l: usize) -> f64 {
        debug_assert_eq!(r.len(), self.dims);
        let weights = self.weights(l);
        let mut diff = r.packed() ^ self.codewords[l];
        let mut acc = 0.0;
        while diff != 0 {
            acc += weights[diff.trailing_zeros() as usize];
            diff &= diff - 1;
        }
        acc
    }

    pub(crate) fn check_observation(&self, r: &ObservationVector) -> Result<()> {
        if r.len() != self.dims {
            return shape(format!(
                "observation has {} bits, code has length {}",
                r.len(),
                self.dims
            ));
        }
        Ok(())
    }

    pub(crate) fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.users {
            return invalid(format!("user {user} out of range for K = {}", self.users));
        }
        Ok(())
    }
}

/// Free-function form of [`SpatialCode::build`].
pub fn build_code(channel: &LiftedChannel, constellation: &Constellation, snr_db: f64) -> Result<SpatialCode> {
    SpatialCode::build(channel, constellation, snr_db)
}

/// Restricts one user's message label bit: bit `bit` (1-based, 1 = MSB) of
/// `user`'s message must equal `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitConstraint {
    pub user: usize,
    pub bit: usize,
    pub value: u8,
}

/// Selects a subcode: users with fixed messages plus an optional label-bit
/// restriction on one further user.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubcodeSelector {
    pub fixed: Vec<(usize, usize)>,
    pub bit: Option<BitConstraint>,
}

impl SubcodeSelector {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn fix(mut self, user: usize, message: usize) -> Self {
        self.fixed.push((user, message));
        self
    }

    pub fn with_bit(mut self, user: usize, bit: usize, value: u8) -> Self {
        self.bit = Some(BitConstraint { user, bit, value });
        self
    }

    /// Validates against `code` and returns the deduplicated fixed constraints.
    fn resolve(&self, code: &SpatialCode) -> Result<Vec<(usize, usize)>> {
        let mut fixed = BTreeMap::new();
        for &(user, msg) in &self.fixed {
            code.check_user(user)?;
            if msg >= code.order() {
                return invalid(format!("message {msg} out of range for m = {}", code.order()));
            }
            if let Some(prev) = fixed.insert(user, msg) {
                if prev != msg {
                    return invalid(format!("user {user} fixed to both {prev} and {msg}"));
                }
            }
        }
        if let Some(b) = self.bit {
            code.check_user(b.user)?;
            if fixed.contains_key(&b.user) {
                return invalid(format!("user {} is both fixed and bit-constrained", b.user));
            }
            if b.bit == 0 || b.bit > code.bits_per_symbol() || b.value > 1 {
                return invalid(format!("invalid bit constraint {b:?}"));
            }
        }
        Ok(fixed.into_iter().collect())
    }
}

/// All joint-message indices selected by `sel`, in increasing order.
pub fn subcode_indices(sel: &SubcodeSelector, code: &SpatialCode) -> Result<Vec<usize>> {
    let fixed = sel.resolve(code)?;
    let p = code.bits_per_symbol();
    let mut out: Vec<usize> = RefinedIndices::new(code, &fixed)
        .filter(|&l| match sel.bit {
            Some(b) => label_bit(code.digit(l, b.user), p, b.bit) as u8 == b.value,
            None => true,
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Iterates the indices of the refined code where every `(user, message)`
/// pair in `fixed` holds. `fixed` must reference distinct valid users.
#[derive(Debug, Clone)]
pub struct RefinedIndices {
    free: Vec<(usize, usize)>,
    digits: Vec<usize>,
    order: usize,
    current: usize,
    remaining: usize,
}

impl RefinedIndices {
    pub fn new(code: &SpatialCode, fixed: &[(usize, usize)]) -> Self {
        let mut is_fixed = vec![false; code.users()];
        let mut base = 0;
        for &(user, msg) in fixed {
            debug_assert!(!is_fixed[user], "user {user} fixed twice");
            is_fixed[user] = true;
            base += msg * code.power(user);
        }
        let free: Vec<(usize, usize)> = (0..code.users())
            .filter(|&u| !is_fixed[u])
            .map(|u| (u, code.power(u)))
            .collect();
        let remaining = code.order().pow(free.len() as u32);
        RefinedIndices {
            digits: vec![0; free.len()],
            free,
            order: code.order(),
            current: base,
            remaining,
        }
    }
}

impl Iterator for RefinedIndices {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.current;
        for (slot, &(_, stride)) in self.free.iter().enumerate() {
            self.digits[slot] += 1;
            self.current += stride;
            if self.digits[slot] < self.order {
                break;
            }
            self.digits[slot] = 0;
            self.current -= self.order * stride;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for RefinedIndices {}

/// Distance measure between two subcodes used for decoding-order selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SetDistance {
    /// Squared Euclidean distance between the codeword centroids.
    #[default]
    Centroid,
    /// Smallest Hamming distance between a codeword of each set.
    MinHamming,
}

/// Squared distance between the centroids of two index sets.
pub fn set_distance(a: &[usize], b: &[usize], code: &SpatialCode) -> Result<f64> {
    set_distance_with(SetDistance::Centroid, a, b, code)
}

pub fn set_distance_with(metric: SetDistance, a: &[usize], b: &[usize], code: &SpatialCode) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("set distance needs two nonempty sets");
    }
    if let Some(&l) = a.iter().chain(b).find(|&&l| l >= code.len()) {
        return invalid(format!("codeword index {l} out of range"));
    }
    Ok(match metric {
        SetDistance::Centroid => {
            let ca = centroid(a, code);
            let cb = centroid(b, code);
            ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum()
        }
        SetDistance::MinHamming => a
            .iter()
            .flat_map(|&i| {
                b.iter()
                    .map(move |&j| (code.codeword_packed(i) ^ code.codeword_packed(j)).count_ones())
            })
            .min()
            .unwrap_or(0) as f64,
    })
}

fn centroid(set: &[usize], code: &SpatialCode) -> Vec<f64> {
    let mut acc = vec![0.0; code.dims()];
    for &l in set {
        let word = code.codeword_packed(l);
        for (i, v) in acc.iter_mut().enumerate() {
            *v += ((word >> i) & 1) as f64;
        }
    }
    let n = set.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    acc
}

/// `ln P(r | l)` under the parallel binary symmetric channel model.
///
/// # Panics
/// If `l` is not a valid codeword index.
pub fn exact_loglikelihood(r: &ObservationVector, l: usize, code: &SpatialCode) -> f64 {
    let diff = r.packed() ^ code.codeword_packed(l);
    code.eps(l)
        .iter()
        .enumerate()
        .map(|(i, &e)| if (diff >> i) & 1 == 1 { e.ln() } else { (1.0 - e).ln() })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseband::{lift_channel, ChannelMatrix, Modulation};
    use num_complex::Complex64;

    // Q(x) by composite Simpson integration of the Gaussian density on [x, x + 12].
    fn q_by_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = 12.0 / n as f64;
        let f = |u: f64| (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(x) + f(x + 12.0);
        for j in 1..n {
            let u = x + j as f64 * h;
            s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(u);
        }
        s * h / 3.0
    }

    fn identity_code() -> SpatialCode {
        let ch = lift_channel(&ChannelMatrix::new(1, 1, vec![Complex64::new(1.0, 0.0)]).unwrap());
        SpatialCode::build(&ch, &Constellation::new(Modulation::Qam4), 0.0).unwrap()
    }

    #[test]
    fn q_function_matches_quadrature() {
        for x in [0.0, 0.3, 1.0, 2.5, 4.0] {
            assert!((q_function(x) - q_by_quadrature(x)).abs() < 1e-10, "{x}");
        }
        assert!((q_by_quadrature(1.0) - 0.158655).abs() < 1e-6);
    }

    #[test]
    fn crossover_examples() {
        assert_eq!(crossover(0.0, 1.0).unwrap(), 0.5);
        assert!((crossover(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2).unwrap() - 0.158655).abs() < 1e-6);
        assert_eq!(crossover(1e3, 1.0).unwrap(), EPS_MIN);
        assert!(crossover(1.0, 0.0).is_err());
        assert!(crossover(1.0, -1.0).is_err());
        let mut prev = 0.5;
        for j in 0..200 {
            let e = crossover(-(j as f64) * 0.05, 0.7).unwrap();
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn index_expansion() {
        assert_eq!(expand_index(0, 4, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(expand_index(7, 4, 2).unwrap(), vec![3, 1]);
        for l in 0..64 {
            assert_eq!(compress_messages(&expand_index(l, 4, 3).unwrap(), 4).unwrap(), l);
        }
        assert!(expand_index(16, 4, 2).is_err());
        assert!(compress_messages(&[4, 0], 4).is_err());
    }

    #[test]
    fn weighted_hamming_examples() {
        assert_eq!(weighted_hamming(&[0, 1], &[0, 1], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(weighted_hamming(&[0, 0], &[1, 1], &[1.25, 2.5]).unwrap(), 3.75);
        assert_eq!(
            weighted_hamming(&[0, 1, 1], &[0, 0, 1], &[1.5, 2.5, 4.0]).unwrap(),
            2.5
        );
        assert!(matches!(
            weighted_hamming(&[0], &[0, 1], &[1.0, 1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_user_identity_code() {
        let code = identity_code();
        assert_eq!(code.len(), 4);
        assert_eq!(code.codeword(0), vec![0, 0]);
        assert_eq!(code.codeword(1), vec![0, 1]);
        assert_eq!(code.codeword(3), vec![1, 1]);
        for l in 0..4 {
            for &e in code.eps(l) {
                assert!((e - 0.158655).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn packed_distance_matches_generic() {
        let code = identity_code();
        for r in 0..4u8 {
            let bits = [r & 1, r >> 1];
            let obs = ObservationVector::from_bits(&bits).unwrap();
            for l in 0..4 {
                let d = weighted_hamming(&bits, &code.codeword(l), code.weights(l)).unwrap();
                assert_eq!(d, code.distance(&obs, l));
            }
        }
    }

    fn toy_code(m: usize, k: usize) -> SpatialCode {
        let size = m.pow(k as u32);
        let words = vec![vec![0u8; 2]; size];
        let eps = vec![vec![0.1; 2]; size];
        SpatialCode::from_parts(m, k, &words, &eps).unwrap()
    }

    #[test]
    fn subcode_examples() {
        let code = toy_code(4, 2);
        assert_eq!(
            subcode_indices(&SubcodeSelector::all(), &code).unwrap(),
            (0..16).collect::<Vec<_>>()
        );
        let fixed = SubcodeSelector::all().fix(0, 3);
        assert_eq!(subcode_indices(&fixed, &code).unwrap(), vec![3, 7, 11, 15]);
        let bit = fixed.with_bit(1, 1, 0);
        assert_eq!(subcode_indices(&bit, &code).unwrap(), vec![3, 7]);

        let contradictory = SubcodeSelector::all().fix(0, 1).fix(0, 2);
        assert!(matches!(
            subcode_indices(&contradictory, &code),
            Err(Error::InvalidInput(_))
        ));
        let repeated = SubcodeSelector::all().fix(0, 1).fix(0, 1);
        assert_eq!(subcode_indices(&repeated, &code).unwrap().len(), 4);
        assert!(subcode_indices(&SubcodeSelector::all().fix(2, 0), &code).is_err());
    }

    #[test]
    fn refined_sizes_divide_by_m() {
        let code = toy_code(4, 3);
        for mask in 0..8usize {
            let fixed: Vec<(usize, usize)> =
                (0..3).filter(|u| mask >> u & 1 == 1).map(|u| (u, u + 1)).collect();
            let got: Vec<usize> = RefinedIndices::new(&code, &fixed).collect();
            assert_eq!(got.len(), 4usize.pow(3 - fixed.len() as u32));
            for l in got {
                for &(u, w) in &fixed {
                    assert_eq!(code.digit(l, u), w);
                }
            }
        }
    }

    #[test]
    fn set_distance_examples() {
        let words = vec![vec![0, 0], vec![1, 1], vec![1, 0], vec![0, 1]];
        let code = SpatialCode::from_parts(2, 2, &words, &vec![vec![0.2; 2]; 4]).unwrap();
        assert_eq!(set_distance(&[0, 1], &[0, 1], &code).unwrap(), 0.0);
        assert_eq!(set_distance(&[0], &[1], &code).unwrap(), 2.0);
        assert_eq!(set_distance(&[0, 1], &[2], &code).unwrap(), 0.5);
        assert_eq!(set_distance(&[2], &[0, 1], &code).unwrap(), 0.5);
        assert!(set_distance(&[], &[1], &code).is_err());
        assert_eq!(
            set_distance_with(SetDistance::MinHamming, &[0], &[1, 2], &code).unwrap(),
            1.0
        );
    }

    #[test]
    fn loglikelihood_examples() {
        let code = SpatialCode::from_parts(2, 1, &[vec![0, 0], vec![1, 0]], &[vec![0.1, 0.2], vec![0.1, 0.2]]).unwrap();
        let same = ObservationVector::from_bits(&[0, 0]).unwrap();
        let flip = ObservationVector::from_bits(&[1, 1]).unwrap();
        assert!((exact_loglikelihood(&same, 0, &code) - (-0.328504066972)).abs() < 1e-9);
        assert!((exact_loglikelihood(&flip, 0, &code) - (-3.912023005428)).abs() < 1e-9);
    }
}
