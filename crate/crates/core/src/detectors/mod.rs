//! Soft-output detection from one-bit observations.
//!
//! * SO: per-bit LLRs as the difference of the minimum weighted Hamming
//!   distances over the two bit-split subcodes of the full code.
//! * SCSO: users are decoded one after another; user `k`'s LLRs are computed
//!   over the code refined by the per-slot messages recovered (decode, then
//!   re-encode) for the users decoded before it.
//! * Ordered SCSO: as SCSO, with the decoding order chosen greedily from the
//!   centroid distance between bit-split subcodes (see [`order`]).
//!
//! The LLR of label bit `i` of user `k` in slot `t` lands at coded position
//! [`coded_position`]`(t, p, i)` of that user's LLR stream. Positive LLRs favour 0.

mod order;
mod zf;

pub use order::{
    order_score, select_first_user, select_first_user_with, select_next_user, select_next_user_with,
};
pub use zf::{detect_frame_zf, zf_soft_llrs, ZfDetector, QUANTIZATION_DISTORTION};

use nalgebra::{DMatrix, DVector};

use crate::baseband::{coded_position, label_bit, messages_from_coded_bits, ObservationVector};
use crate::error::{invalid, shape, Error, Result};
use crate::fec::ChannelCode;
use crate::spatial_code::{exact_loglikelihood, expand_index, RefinedIndices, SetDistance, SpatialCode};

const MAX_LABEL_BITS: usize = 8;

/// Per-user LLR streams, `n` values per user.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrBlock {
    pub users: Vec<Vec<f64>>,
}

impl LlrBlock {
    pub fn user(&self, k: usize) -> &[f64] {
        &self.users[k]
    }

    pub fn all_finite(&self) -> bool {
        self.users.iter().flatten().all(|v| v.is_finite())
    }
}

/// Order in which users were passed to their channel decoders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingOrder(pub Vec<usize>);

impl DecodingOrder {
    pub fn natural(k: usize) -> Self {
        DecodingOrder((0..k).collect())
    }

    pub fn is_permutation_of(&self, k: usize) -> bool {
        let mut seen = vec![false; k];
        self.0.len() == k
            && self.0.iter().all(|&u| u < k && !std::mem::replace(&mut seen[u], true))
    }
}

/// Codeword comparisons made inside the minimum searches of one frame.
/// One comparison is one codeword visited for one label bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScanCounter(pub u64);

impl ScanCounter {
    pub fn add(&mut self, n: u64) {
        self.0 += n;
    }
}

/// Comparisons per (slot, label bit) for SO: every user scans the full code.
pub fn so_scans_per_group(m: usize, k: usize) -> u64 {
    k as u64 * (m as u64).pow(k as u32)
}

/// Comparisons per (slot, label bit) for SCSO: `sum_{j=1}^{K} m^{K-j+1}`.
pub fn scso_scans_per_group(m: usize, k: usize) -> u64 {
    (1..=k as u32).map(|j| (m as u64).pow(k as u32 - j + 1)).sum()
}

// Minimum distance of each bit-split of `user`'s label over `indices`.
// Returns the LLRs (`min over bit=1` minus `min over bit=0`) and the number
// of codewords visited.
fn split_min_llrs<I, D>(code: &SpatialCode, user: usize, indices: I, mut distance: D, out: &mut [f64]) -> u64
where
    I: Iterator<Item = usize>,
    D: FnMut(usize) -> f64,
{
    let p = code.bits_per_symbol();
    let mut best = [[f64::INFINITY; MAX_LABEL_BITS]; 2];
    let mut visited = 0u64;
    for l in indices {
        let d = distance(l);
        let w = code.digit(l, user);
        for i in 1..=p {
            let side = &mut best[label_bit(w, p, i)][i - 1];
            if d < *side {
                *side = d;
            }
        }
        visited += 1;
    }
    for i in 0..p {
        out[i] = best[1][i] - best[0][i];
    }
    visited
}

fn check_fixed(code: &SpatialCode, user: usize, fixed: &[(usize, usize)]) -> Result<()> {
    code.check_user(user)?;
    let mut seen = vec![false; code.users()];
    for &(u, w) in fixed {
        code.check_user(u)?;
        if u == user {
            return invalid(format!("user {u} cannot condition on itself"));
        }
        if std::mem::replace(&mut seen[u], true) {
            return invalid(format!("user {u} fixed more than once"));
        }
        if w >= code.order() {
            return invalid(format!("message {w} out of range for m = {}", code.order()));
        }
    }
    Ok(())
}

/// SO LLRs of `user`'s `p` label bits for one slot (entry `i - 1` is bit `i`).
pub fn so_llrs(r: &ObservationVector, code: &SpatialCode, user: usize) -> Result<Vec<f64>> {
    scso_llrs(r, code, user, &[])
}

/// SCSO LLRs of `user`'s label bits for one slot, searching only codewords
/// consistent with the `(user, message)` pairs in `fixed`.
pub fn scso_llrs(
    r: &ObservationVector,
    code: &SpatialCode,
    user: usize,
    fixed: &[(usize, usize)],
) -> Result<Vec<f64>> {
    code.check_observation(r)?;
    check_fixed(code, user, fixed)?;
    let mut out = vec![0.0; code.bits_per_symbol()];
    split_min_llrs(code, user, RefinedIndices::new(code, fixed), |l| code.distance(r, l), &mut out);
    Ok(out)
}

/// Exact per-bit LLRs `ln P(b_i = 0 | r) / P(b_i = 1 | r)` under a uniform
/// prior over the refined code. Reference for the weighted-distance LLRs.
pub fn exact_llrs(
    r: &ObservationVector,
    code: &SpatialCode,
    user: usize,
    fixed: &[(usize, usize)],
) -> Result<Vec<f64>> {
    code.check_observation(r)?;
    check_fixed(code, user, fixed)?;
    let p = code.bits_per_symbol();
    let terms: Vec<(usize, f64)> = RefinedIndices::new(code, fixed)
        .map(|l| (code.digit(l, user), exact_loglikelihood(r, l, code)))
        .collect();
    let log_sum = |i: usize, bit: usize| {
        let side = terms.iter().filter(|(w, _)| label_bit(*w, p, i) == bit).map(|t| t.1);
        let peak = side.clone().fold(f64::NEG_INFINITY, f64::max);
        peak + side.map(|v| (v - peak).exp()).sum::<f64>().ln()
    };
    Ok((1..=p).map(|i| log_sum(i, 0) - log_sum(i, 1)).collect())
}

/// Most frequent value; ties go to the smallest value.
pub fn majority(values: &[usize]) -> Result<usize> {
    let max = *values.iter().max().ok_or_else(|| Error::InvalidInput("majority of empty sequence".into()))?;
    let mut counts = vec![0usize; max + 1];
    for &v in values {
        counts[v] += 1;
    }
    let mut best = 0;
    for (v, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = v;
        }
    }
    Ok(best)
}

/// Hard maximum-likelihood joint detection; ties go to the smallest index.
pub fn ml_hard_detect(r: &ObservationVector, code: &SpatialCode) -> Result<Vec<usize>> {
    code.check_observation(r)?;
    let mut best = (0, f64::NEG_INFINITY);
    for l in 0..code.len() {
        let ll = exact_loglikelihood(r, l, code);
        if ll > best.1 {
            best = (l, ll);
        }
    }
    expand_index(best.0, code.order(), code.users())
}

/// Outcome of detecting and decoding one coded block for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetection {
    /// Decoded information bits, one block per user.
    pub info_bits: Vec<Vec<u8>>,
    pub llrs: LlrBlock,
    pub order: DecodingOrder,
    pub scans: ScanCounter,
}

/// How the successive detector picks its next user and its conditioning messages.
enum Schedule<'t> {
    Parallel,
    Natural,
    Greedy(SetDistance),
    Genie(&'t [Vec<usize>]),
}

// d(r, l) = sum_i w_li c_li + sum_i r_i w_li (1 - 2 c_li), so the table is
// one matrix product. Column-major |C| x slots is row-major slots x |C|.
fn distance_table(code: &SpatialCode, observations: &[ObservationVector]) -> Vec<f64> {
    let (size, dims) = (code.len(), code.dims());
    let bit = |word: u64, i: usize| ((word >> i) & 1) as f64;
    let mut offset = DVector::zeros(size);
    let signed = DMatrix::from_fn(size, dims, |l, i| {
        let (w, c) = (code.weights(l)[i], bit(code.codeword_packed(l), i));
        offset[l] += w * c;
        w * (1.0 - 2.0 * c)
    });
    let obs = DMatrix::from_fn(dims, observations.len(), |i, t| bit(observations[t].packed(), i));
    let mut table = signed * obs;
    for mut column in table.column_iter_mut() {
        column += &offset;
    }
    table.data.into()
}

/// Frame-level detection over a block of observations sharing one channel.
///
/// The weighted distances between every observation and every codeword are
/// computed once and shared by all detectors run on the frame.
pub struct FrameDetector<'a> {
    code: &'a SpatialCode,
    slots: usize,
    distances: Vec<f64>,
}

impl<'a> FrameDetector<'a> {
    pub fn new(code: &'a SpatialCode, observations: &[ObservationVector]) -> Result<Self> {
        for r in observations {
            code.check_observation(r)?;
        }
        Ok(FrameDetector {
            code,
            slots: observations.len(),
            distances: distance_table(code, observations),
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Non-successive SO detection: every user's LLRs come from the full code.
    pub fn so(&self, decoder: &dyn ChannelCode) -> Result<FrameDetection> {
        self.run(decoder, Schedule::Parallel)
    }

    /// SCSO in the natural user order.
    pub fn scso(&self, decoder: &dyn ChannelCode) -> Result<FrameDetection> {
        self.run(decoder, Schedule::Natural)
    }

    /// SCSO with the greedy decoding order.
    pub fn ordered_scso(&self, decoder: &dyn ChannelCode) -> Result<FrameDetection> {
        self.run(decoder, Schedule::Greedy(SetDistance::Centroid))
    }

    pub fn ordered_scso_with(&self, decoder: &dyn ChannelCode, metric: SetDistance) -> Result<FrameDetection> {
        self.run(decoder, Schedule::Greedy(metric))
    }

    /// Natural-order SCSO conditioned on the true per-slot messages
    /// (`truth[k][t]`) instead of the decoded ones.
    pub fn genie_scso(&self, decoder: &dyn ChannelCode, truth: &[Vec<usize>]) -> Result<FrameDetection> {
        if truth.len() != self.code.users() || truth.iter().any(|w| w.len() != self.slots) {
            return shape("genie messages must be K rows of one message per slot");
        }
        self.run(decoder, Schedule::Genie(truth))
    }

    fn run(&self, decoder: &dyn ChannelCode, schedule: Schedule<'_>) -> Result<FrameDetection> {
        let code = self.code;
        let (k_users, p) = (code.users(), code.bits_per_symbol());
        let n = self.slots * p;
        if decoder.block_len() != n {
            return shape(format!(
                "decoder block length {} does not match {} slots of {p} bits",
                decoder.block_len(),
                self.slots
            ));
        }

        let mut info_bits = vec![Vec::new(); k_users];
        let mut llrs = vec![Vec::new(); k_users];
        let mut order = Vec::with_capacity(k_users);
        let mut recovered: Vec<Vec<usize>> = vec![Vec::new(); k_users];
        let mut majorities = Vec::with_capacity(k_users);
        let mut scans = ScanCounter::default();
        let mut fixed = Vec::with_capacity(k_users);
        let mut slot_llrs = [0.0; MAX_LABEL_BITS];

        for step in 0..k_users {
            let user = match schedule {
                Schedule::Parallel | Schedule::Natural | Schedule::Genie(_) => step,
                Schedule::Greedy(metric) if step == 0 => select_first_user_with(code, metric),
                Schedule::Greedy(metric) => select_next_user_with(code, &order, &majorities, metric)?,
            };
            let conditioned = !matches!(schedule, Schedule::Parallel);

            let mut stream = vec![0.0; n];
            for t in 0..self.slots {
                fixed.clear();
                if conditioned {
                    fixed.extend(order.iter().map(|&u| (u, recovered[u][t])));
                }
                let row = &self.distances[t * code.len()..(t + 1) * code.len()];
                let visited = if fixed.is_empty() {
                    split_min_llrs(code, user, 0..code.len(), |l| row[l], &mut slot_llrs)
                } else {
                    split_min_llrs(code, user, RefinedIndices::new(code, &fixed), |l| row[l], &mut slot_llrs)
                };
                scans.add(visited * p as u64);
                for i in 1..=p {
                    stream[coded_position(t, p, i)] = slot_llrs[i - 1];
                }
            }

            let decoded = decoder.decode(&stream)?;
            let messages = match schedule {
                Schedule::Genie(truth) => truth[user].clone(),
                _ => messages_from_coded_bits(&decoder.encode(&decoded)?, p)?,
            };
            majorities.push(majority(&messages)?);
            recovered[user] = messages;
            order.push(user);
            info_bits[user] = decoded;
            llrs[user] = stream;
        }

        Ok(FrameDetection {
            info_bits,
            llrs: LlrBlock { users: llrs },
            order: DecodingOrder(order),
            scans,
        })
    }
}

pub fn detect_frame_so(
    observations: &[ObservationVector],
    code: &SpatialCode,
    decoder: &dyn ChannelCode,
) -> Result<FrameDetection> {
    FrameDetector::new(code, observations)?.so(decoder)
}

pub fn detect_frame_scso(
    observations: &[ObservationVector],
    code: &SpatialCode,
    decoder: &dyn ChannelCode,
) -> Result<FrameDetection> {
    FrameDetector::new(code, observations)?.scso(decoder)
}

pub fn detect_frame_ordered_scso(
    observations: &[ObservationVector],
    code: &SpatialCode,
    decoder: &dyn ChannelCode,
) -> Result<FrameDetection> {
    FrameDetector::new(code, observations)?.ordered_scso(decoder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseband::{lift_channel, ChannelMatrix, Constellation, Modulation};
    use num_complex::Complex64;

    fn identity_code() -> SpatialCode {
        let ch = lift_channel(&ChannelMatrix::new(1, 1, vec![Complex64::new(1.0, 0.0)]).unwrap());
        SpatialCode::build(&ch, &Constellation::new(Modulation::Qam4), 0.0).unwrap()
    }

    fn obs(bits: &[u8]) -> ObservationVector {
        ObservationVector::from_bits(bits).unwrap()
    }

    #[test]
    fn so_llr_single_user_examples() {
        let code = identity_code();
        let w = -(0.158655253931457f64).ln();
        let llr = so_llrs(&obs(&[0, 0]), &code, 0).unwrap();
        assert!((llr[0] - w).abs() < 1e-9 && (llr[1] - w).abs() < 1e-9);
        assert!((w - 1.84102).abs() < 1e-5);
        let llr = so_llrs(&obs(&[1, 1]), &code, 0).unwrap();
        assert!((llr[0] + w).abs() < 1e-9 && (llr[1] + w).abs() < 1e-9);
        // Real axis carries the most significant label bit.
        let llr = so_llrs(&obs(&[1, 0]), &code, 0).unwrap();
        assert!(llr[0] < 0.0 && llr[1] > 0.0);
    }

    #[test]
    fn exact_llr_signs_agree_on_identity_channel() {
        let code = identity_code();
        for r in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let approx = so_llrs(&obs(&r), &code, 0).unwrap();
            let exact = exact_llrs(&obs(&r), &code, 0, &[]).unwrap();
            for (a, e) in approx.iter().zip(&exact) {
                assert_eq!(a.signum(), e.signum());
            }
        }
    }

    #[test]
    fn scso_rejects_bad_conditioning() {
        let code = identity_code();
        assert!(scso_llrs(&obs(&[0, 0]), &code, 0, &[(0, 1)]).is_err());
        assert!(scso_llrs(&obs(&[0, 0]), &code, 1, &[]).is_err());
        assert!(scso_llrs(&obs(&[0, 0, 0]), &code, 0, &[]).is_err());
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority(&[2, 2, 3]).unwrap(), 2);
        assert_eq!(majority(&[0, 3]).unwrap(), 0);
        assert_eq!(majority(&[3, 0]).unwrap(), 0);
        assert_eq!(majority(&[1, 1, 1]).unwrap(), 1);
        assert!(majority(&[]).is_err());
    }

    #[test]
    fn ml_examples() {
        let code = identity_code();
        for l in 0..4 {
            let r = ObservationVector::from_packed(code.codeword_packed(l), 2);
            assert_eq!(ml_hard_detect(&r, &code).unwrap(), vec![l]);
        }
        let flat = SpatialCode::from_parts(2, 2, &vec![vec![0, 1, 1]; 4], &vec![vec![0.5; 3]; 4]).unwrap();
        for r in 0..8u64 {
            let r = ObservationVector::from_packed(r, 3);
            assert_eq!(ml_hard_detect(&r, &flat).unwrap(), vec![0, 0]);
        }
    }

    #[test]
    fn scan_closed_forms() {
        assert_eq!(so_scans_per_group(4, 6), 6 * 4096);
        assert_eq!(scso_scans_per_group(4, 6), 4096 + 1024 + 256 + 64 + 16 + 4);
        assert_eq!(scso_scans_per_group(2, 1), so_scans_per_group(2, 1));
    }

    #[test]
    fn decoding_order_permutation_check() {
        assert!(DecodingOrder(vec![2, 0, 1]).is_permutation_of(3));
        assert!(!DecodingOrder(vec![0, 0, 1]).is_permutation_of(3));
        assert!(!DecodingOrder(vec![0, 1]).is_permutation_of(3));
    }
}
