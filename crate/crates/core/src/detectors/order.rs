//! Greedy decoding-order selection.
//!
//! The next user is the one whose two bit-split subcodes, summed over its
//! label bits, lie furthest apart inside the code refined by the majority
//! messages of the users already decoded. Ties go to the lowest user index.

use crate::baseband::label_bit;
use crate::error::{invalid, Result};
use crate::spatial_code::{set_distance_with, RefinedIndices, SetDistance, SpatialCode};

/// `sum_i D(B_(i,0), B_(i,1))` for `user` within the code refined by `fixed`.
pub fn order_score(code: &SpatialCode, fixed: &[(usize, usize)], user: usize, metric: SetDistance) -> f64 {
    match metric {
        SetDistance::Centroid => centroid_score(code, fixed, user),
        other => {
            let p = code.bits_per_symbol();
            (1..=p)
                .map(|i| {
                    let (zero, one): (Vec<usize>, Vec<usize>) = RefinedIndices::new(code, fixed)
                        .partition(|&l| label_bit(code.digit(l, user), p, i) == 0);
                    set_distance_with(other, &zero, &one, code).unwrap_or(0.0)
                })
                .sum()
        }
    }
}

// Accumulates codeword sums per message of `user` once, then forms each
// bit split's centroids from them.
fn centroid_score(code: &SpatialCode, fixed: &[(usize, usize)], user: usize) -> f64 {
    let (m, p, dims) = (code.order(), code.bits_per_symbol(), code.dims());
    let mut sums = vec![0u32; m * dims];
    let mut counts = vec![0u32; m];
    for l in RefinedIndices::new(code, fixed) {
        let w = code.digit(l, user);
        counts[w] += 1;
        let mut word = code.codeword_packed(l);
        while word != 0 {
            sums[w * dims + word.trailing_zeros() as usize] += 1;
            word &= word - 1;
        }
    }
    let mut score = 0.0;
    for i in 1..=p {
        let mut side = [(vec![0u32; dims], 0u32), (vec![0u32; dims], 0u32)];
        for w in 0..m {
            let (acc, n) = &mut side[label_bit(w, p, i)];
            *n += counts[w];
            for (a, s) in acc.iter_mut().zip(&sums[w * dims..(w + 1) * dims]) {
                *a += s;
            }
        }
        let (n0, n1) = (side[0].1 as f64, side[1].1 as f64);
        score += side[0]
            .0
            .iter()
            .zip(&side[1].0)
            .map(|(&a, &b)| {
                let d = a as f64 / n0 - b as f64 / n1;
                d * d
            })
            .sum::<f64>();
    }
    score
}

fn argmax_user(code: &SpatialCode, fixed: &[(usize, usize)], candidates: impl Iterator<Item = usize>, metric: SetDistance) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for k in candidates {
        let s = order_score(code, fixed, k, metric);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    best.map(|(k, _)| k)
}

/// First user to decode, searching the full code.
pub fn select_first_user(code: &SpatialCode) -> usize {
    select_first_user_with(code, SetDistance::Centroid)
}

pub fn select_first_user_with(code: &SpatialCode, metric: SetDistance) -> usize {
    argmax_user(code, &[], 0..code.users(), metric).unwrap_or(0)
}

/// Next user to decode given the users already decoded (in order) and their
/// majority messages.
pub fn select_next_user(code: &SpatialCode, decoded: &[usize], majority_messages: &[usize]) -> Result<usize> {
    select_next_user_with(code, decoded, majority_messages, SetDistance::Centroid)
}

pub fn select_next_user_with(
    code: &SpatialCode,
    decoded: &[usize],
    majority_messages: &[usize],
    metric: SetDistance,
) -> Result<usize> {
    if decoded.len() != majority_messages.len() {
        return invalid("decoded users and majority messages are not aligned");
    }
    let mut taken = vec![false; code.users()];
    let mut fixed = Vec::with_capacity(decoded.len());
    for (&u, &w) in decoded.iter().zip(majority_messages) {
        code.check_user(u)?;
        if std::mem::replace(&mut taken[u], true) {
            return invalid(format!("user {u} listed twice as decoded"));
        }
        if w >= code.order() {
            return invalid(format!("majority message {w} out of range"));
        }
        fixed.push((u, w));
    }
    argmax_user(code, &fixed, (0..code.users()).filter(|&u| !taken[u]), metric)
        .ok_or_else(|| crate::error::Error::InvalidInput("every user is already decoded".into()))
}
