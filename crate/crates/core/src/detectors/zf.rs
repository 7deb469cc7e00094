//! Zero-forcing soft baseline on the sign observations.
//!
//! With `y = 1 - 2r` and the effective channel `G = sqrt(SNR) H`, the
//! estimate is `x_hat = pinv(G) y`. Real dimension `d` of the estimate gets
//! the noise-plus-distortion variance
//! `nu_d^2 = |row_d(pinv(G))|^2 / 2 + (1 - 2/pi)` and the LLR of the label
//! bit carried by that axis is `2 x_hat_d / nu_d^2`.

use nalgebra::DMatrix;

use crate::baseband::{snr_linear, LiftedChannel, Modulation, ObservationVector};
use crate::error::{invalid, shape, Error, Result};
use crate::fec::ChannelCode;

use super::{DecodingOrder, FrameDetection, LlrBlock, ScanCounter};

/// Quantization distortion floor `1 - 2/pi` of a one-bit quantizer.
pub const QUANTIZATION_DISTORTION: f64 = 1.0 - 2.0 / std::f64::consts::PI;

const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ZfDetector {
    users: usize,
    dims: usize,
    bits: usize,
    pinv: DMatrix<f64>,
    variance: Vec<f64>,
}

impl ZfDetector {
    /// Supports BPSK (real axis only) and Gray 4-QAM.
    pub fn new(channel: &LiftedChannel, modulation: Modulation, snr_db: f64) -> Result<Self> {
        let bits = match modulation {
            Modulation::Bpsk => 1,
            Modulation::Qam4 => 2,
            other => return invalid(format!("ZF soft baseline does not support {other}")),
        };
        let gain = snr_linear(snr_db).sqrt();
        let dims = channel.dims();
        let g = DMatrix::from_row_slice(dims, channel.input_dims(), channel.real()) * gain;
        let svd = g.svd(true, true);
        let largest = svd.singular_values.max();
        let smallest = svd.singular_values.min();
        if !(smallest > RANK_TOLERANCE * largest) {
            return Err(Error::SingularChannel(smallest));
        }
        let pinv = svd
            .pseudo_inverse(RANK_TOLERANCE * largest)
            .map_err(|e| Error::Internal(e.to_string()))?;
        let variance = pinv
            .row_iter()
            .map(|row| row.norm_squared() * 0.5 + QUANTIZATION_DISTORTION)
            .collect();
        Ok(ZfDetector {
            users: channel.n_users(),
            dims,
            bits,
            pinv,
            variance,
        })
    }

    /// Per-user label-bit LLRs for one slot (`[user][i - 1]`).
    pub fn slot_llrs(&self, r: &ObservationVector) -> Result<Vec<Vec<f64>>> {
        if r.len() != self.dims {
            return shape(format!("observation has {} bits, expected {}", r.len(), self.dims));
        }
        let y: Vec<f64> = (0..self.dims).map(|i| 1.0 - 2.0 * r.bit(i) as f64).collect();
        let estimate: Vec<f64> = self
            .pinv
            .row_iter()
            .map(|row| row.iter().zip(&y).map(|(a, b)| a * b).sum())
            .collect();
        let llr = |d: usize| 2.0 * estimate[d] / self.variance[d];
        Ok((0..self.users)
            .map(|k| match self.bits {
                1 => vec![llr(k)],
                _ => vec![llr(k), llr(k + self.users)],
            })
            .collect())
    }
}

/// Single-slot ZF soft LLRs for every user.
pub fn zf_soft_llrs(
    r: &ObservationVector,
    channel: &LiftedChannel,
    modulation: Modulation,
    snr_db: f64,
) -> Result<Vec<Vec<f64>>> {
    ZfDetector::new(channel, modulation, snr_db)?.slot_llrs(r)
}

pub fn detect_frame_zf(
    observations: &[ObservationVector],
    detector: &ZfDetector,
    decoder: &dyn ChannelCode,
) -> Result<FrameDetection> {
    let p = detector.bits;
    let n = observations.len() * p;
    if decoder.block_len() != n {
        return shape(format!(
            "decoder block length {} does not match {} slots of {p} bits",
            decoder.block_len(),
            observations.len()
        ));
    }
    let mut streams = vec![vec![0.0; n]; detector.users];
    for (t, r) in observations.iter().enumerate() {
        for (k, bits) in detector.slot_llrs(r)?.into_iter().enumerate() {
            for (i, v) in bits.into_iter().enumerate() {
                streams[k][crate::baseband::coded_position(t, p, i + 1)] = v;
            }
        }
    }
    let info_bits = streams
        .iter()
        .map(|s| decoder.decode(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameDetection {
        info_bits,
        llrs: LlrBlock { users: streams },
        order: DecodingOrder::natural(detector.users),
        scans: ScanCounter::default(),
    })
}
