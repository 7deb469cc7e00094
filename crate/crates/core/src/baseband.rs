//! Transmit-side signal model: constellations, bit/message packing, the
//! complex-to-real lifting of the uplink channel, Rayleigh draws, AWGN and
//! the one-bit quantizer.
//!
//! Conventions used throughout the crate:
//!
//! * Users transmit at average symbol energy `SNR_lin`; complex noise is
//!   `CN(0, 1)`, i.e. each real dimension carries variance 1/2.
//! * The quantizer maps `v >= 0` to bit 0 and `v < 0` to bit 1.
//! * Inside a block of `p` coded bits, the first coded bit is the least
//!   significant bit of the message (see [`messages_from_coded_bits`]).

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, shape, Error, Result};

/// Standard deviation of each real noise dimension (complex noise is `CN(0, 1)`).
pub const NOISE_STD: f64 = FRAC_1_SQRT_2;

/// Largest number of real observation dimensions (`2 * N_r`) supported by
/// the packed observation representation.
pub const MAX_DIMS: usize = 64;

pub fn snr_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Supported Gray-labelled modulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qam4,
    Qam16,
}

impl Modulation {
    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qam4 => "4qam",
            Modulation::Qam16 => "16qam",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" | "2qam" => Ok(Modulation::Bpsk),
            "4qam" | "qpsk" => Ok(Modulation::Qam4),
            "16qam" => Ok(Modulation::Qam16),
            other => Err(Error::InvalidInput(format!("unknown modulation '{other}'"))),
        }
    }
}

/// An `m`-ary constellation with unit average energy.
///
/// Message `w` is labelled by its `p`-bit expansion `(b_1, ..., b_p)` with
/// `b_1` the most significant bit. For 4-QAM, `b_1` selects the sign of the
/// real part and `b_2` the sign of the imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    bits: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let points = match modulation {
            Modulation::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Modulation::Qam4 => (0..4)
                .map(|w| {
                    let re = antipodal((w >> 1) & 1);
                    let im = antipodal(w & 1);
                    Complex64::new(re, im) * FRAC_1_SQRT_2
                })
                .collect(),
            Modulation::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                (0..16)
                    .map(|w| {
                        let re = gray_pam4((w >> 3) & 1, (w >> 2) & 1);
                        let im = gray_pam4((w >> 1) & 1, w & 1);
                        Complex64::new(re, im) * scale
                    })
                    .collect()
            }
        };
        let bits = points.len().trailing_zeros() as usize;
        Constellation {
            modulation,
            bits,
            points,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    /// Modulation order `m`.
    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Bits per symbol `p = log2(m)`.
    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
}

fn antipodal(bit: usize) -> f64 {
    1.0 - 2.0 * bit as f64
}

// Gray-labelled 4-PAM: 01 -> +3, 00 -> +1, 10 -> -1, 11 -> -3.
fn gray_pam4(sign_bit: usize, outer_bit: usize) -> f64 {
    antipodal(sign_bit) * (1.0 + 2.0 * outer_bit as f64)
}

/// Packs `(b_1, ..., b_p)` into `sum_i b_i 2^(p-i)`.
pub fn pack_bits(bits: &[u8]) -> Result<usize> {
    bits.iter().try_fold(0usize, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b as usize),
        other => invalid(format!("bit value {other} is not binary")),
    })
}

/// Inverse of [`pack_bits`]: the `p`-bit expansion of `w`, most significant first.
pub fn unpack_bits(w: usize, p: usize) -> Vec<u8> {
    (0..p).rev().map(|s| ((w >> s) & 1) as u8).collect()
}

/// Bit `i` (1-based, `i = 1` is the most significant) of the `p`-bit label of `w`.
#[inline]
pub fn label_bit(w: usize, p: usize, i: usize) -> usize {
    (w >> (p - i)) & 1
}

/// Groups coded bits into channel-input messages, `n / p` per block.
///
/// Slot `t` (1-based) carries `[(tau[pt], tau[pt-1], ..., tau[pt-p+1])]_p`,
/// so the last coded bit of each group is the most significant bit.
pub fn messages_from_coded_bits(coded: &[u8], p: usize) -> Result<Vec<usize>> {
    if p == 0 || !coded.len().is_multiple_of(p) {
        return shape(format!(
            "coded block length {} is not a multiple of {p} bits per symbol",
            coded.len()
        ));
    }
    coded
        .chunks_exact(p)
        .map(|group| {
            group.iter().rev().try_fold(0usize, |acc, &b| match b {
                0 | 1 => Ok((acc << 1) | b as usize),
                other => invalid(format!("coded bit value {other} is not binary")),
            })
        })
        .collect()
}

/// Inverse of [`messages_from_coded_bits`].
pub fn coded_bits_from_messages(messages: &[usize], p: usize) -> Vec<u8> {
    messages
        .iter()
        .flat_map(|&w| (0..p).map(move |j| ((w >> j) & 1) as u8))
        .collect()
}

/// Index into a user's `n` coded bits of the bit carried at label position
/// `i` (1-based) of slot `t` (0-based).
#[inline]
pub fn coded_position(slot: usize, p: usize, i: usize) -> usize {
    slot * p + (p - i)
}

pub fn modulate(w: usize, constellation: &Constellation) -> Result<Complex64> {
    constellation.points.get(w).copied().ok_or_else(|| {
        Error::InvalidInput(format!(
            "message {w} out of range for {}-ary constellation",
            constellation.order()
        ))
    })
}

/// `[Re(x); Im(x)]`.
pub fn lift_symbols(symbols: &[Complex64]) -> Vec<f64> {
    symbols
        .iter()
        .map(|s| s.re)
        .chain(symbols.iter().map(|s| s.im))
        .collect()
}

/// Complex `N_r x K` channel matrix, row-major (row `i` is receive antenna `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    n_rx: usize,
    n_users: usize,
    entries: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn new(n_rx: usize, n_users: usize, entries: Vec<Complex64>) -> Result<Self> {
        if n_rx == 0 || n_users == 0 {
            return invalid("channel needs at least one antenna and one user");
        }
        if entries.len() != n_rx * n_users {
            return shape(format!(
                "{} channel entries for a {n_rx}x{n_users} matrix",
                entries.len()
            ));
        }
        Ok(ChannelMatrix {
            n_rx,
            n_users,
            entries,
        })
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.n_users + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }
}

/// The complex channel together with its real-valued `2N_r x 2K` lifting
/// `[Re(H), -Im(H); Im(H), Re(H)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedChannel {
    complex: ChannelMatrix,
    real: Vec<f64>,
}

impl LiftedChannel {
    pub fn complex(&self) -> &ChannelMatrix {
        &self.complex
    }

    pub fn n_users(&self) -> usize {
        self.complex.n_users
    }

    pub fn n_rx(&self) -> usize {
        self.complex.n_rx
    }

    /// Number of real observation dimensions `N = 2 N_r`.
    pub fn dims(&self) -> usize {
        2 * self.complex.n_rx
    }

    /// Number of real input dimensions `2K`.
    pub fn input_dims(&self) -> usize {
        2 * self.complex.n_users
    }

    /// Row-major `2N_r x 2K` real matrix.
    pub fn real(&self) -> &[f64] {
        &self.real
    }

    /// Row `i` of the real matrix, `h_i^T`.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.input_dims();
        &self.real[i * cols..(i + 1) * cols]
    }

    /// `H x` for a real input of length `2K`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dims() {
            return shape(format!(
                "input length {} does not match 2K = {}",
                x.len(),
                self.input_dims()
            ));
        }
        Ok((0..self.dims())
            .map(|i| self.row(i).iter().zip(x).map(|(h, v)| h * v).sum())
            .collect())
    }
}

pub fn lift_channel(channel: &ChannelMatrix) -> LiftedChannel {
    let (nr, k) = (channel.n_rx, channel.n_users);
    let cols = 2 * k;
    let mut real = vec![0.0; 2 * nr * cols];
    for i in 0..nr {
        for j in 0..k {
            let h = channel.get(i, j);
            real[i * cols + j] = h.re;
            real[i * cols + k + j] = -h.im;
            real[(nr + i) * cols + j] = h.im;
            real[(nr + i) * cols + k + j] = h.re;
        }
    }
    LiftedChannel {
        complex: channel.clone(),
        real,
    }
}

/// I.i.d. `CN(0, 1)` Rayleigh channel.
pub fn draw_channel<R: Rng + ?Sized>(
    n_users: usize,
    n_rx: usize,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    let entries = (0..n_rx * n_users)
        .map(|_| complex_gaussian(rng))
        .collect();
    ChannelMatrix::new(n_rx, n_users, entries)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// Binary observation for one time slot, packed LSB-first into a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObservationVector {
    bits: u64,
    len: usize,
}

impl ObservationVector {
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() > MAX_DIMS {
            return shape(format!(
                "{} observation dimensions exceed the supported {MAX_DIMS}",
                bits.len()
            ));
        }
        let mut packed = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => packed |= 1 << i,
                other => return invalid(format!("observation bit {other} is not binary")),
            }
        }
        Ok(ObservationVector {
            bits: packed,
            len: bits.len(),
        })
    }

    pub(crate) fn from_packed(bits: u64, len: usize) -> Self {
        debug_assert!(len <= MAX_DIMS);
        ObservationVector { bits, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> u8 {
        ((self.bits >> i) & 1) as u8
    }

    pub fn packed(&self) -> u64 {
        self.bits
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    /// Every bit flipped.
    pub fn complement(&self) -> Self {
        let mask = if self.len == 64 {
            u64::MAX
        } else {
            (1u64 << self.len) - 1
        };
        ObservationVector {
            bits: !self.bits & mask,
            len: self.len,
        }
    }
}

/// One-bit ADC: 0 where `v >= 0`, 1 where `v < 0`.
pub fn one_bit_quantize(values: &[f64]) -> Result<ObservationVector> {
    if values.len() > MAX_DIMS {
        return shape(format!(
            "{} observation dimensions exceed the supported {MAX_DIMS}",
            values.len()
        ));
    }
    let mut packed = 0u64;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            return invalid(format!("NaN at quantizer input {i}"));
        }
        if v < 0.0 {
            packed |= 1 << i;
        }
    }
    Ok(ObservationVector::from_packed(packed, values.len()))
}

/// One quantized time slot: `sign(H sqrt(SNR) x + z)` with `z ~ N(0, 1/2)` per dimension.
pub fn transmit<R: Rng + ?Sized>(
    channel: &LiftedChannel,
    x: &[f64],
    snr_db: f64,
    rng: &mut R,
) -> Result<ObservationVector> {
    let gain = snr_linear(snr_db).sqrt();
    let mut received = channel.apply(x)?;
    for v in &mut received {
        let z: f64 = rng.sample(StandardNormal);
        *v = gain * *v + NOISE_STD * z;
    }
    one_bit_quantize(&received)
}
