//! Monte-Carlo FER harness.
//!
//! Every frame draws a fresh channel, fresh information blocks and fresh
//! noise from its own ChaCha stream `(seed, frame index)`. The same stream is
//! used at every SNR point and by every detector, so detector comparisons
//! and neighbouring SNR points share their random numbers. Results do not
//! depend on how frames are scheduled across threads.

mod config;
mod output;

pub use config::{parse_detectors, CodeSpec, DetectorKind, OutputFormat, SimConfig, SnrGrid, MAX_CODE_SIZE};
pub use output::{emit_results, metadata_path, parse_csv, write_csv, write_json, FerPoint, RunMetadata, CSV_HEADER};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baseband::{
    draw_channel, lift_channel, lift_symbols, messages_from_coded_bits, modulate, transmit, Constellation,
    ObservationVector,
};
use crate::detectors::{detect_frame_zf, FrameDetection, FrameDetector, ZfDetector};
use crate::error::{Error, Result};
use crate::fec::{ChannelCode, PolarCode};
use crate::spatial_code::SpatialCode;

/// Serial or rayon-parallel frame execution; both give identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Per-detector tallies for one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameTally {
    pub user_block_errors: u64,
    pub any_user_error: bool,
    pub scans: u64,
}

impl FrameTally {
    fn score(detection: &FrameDetection, truth: &[Vec<u8>]) -> Self {
        let errors = detection
            .info_bits
            .iter()
            .zip(truth)
            .filter(|(got, want)| got != want)
            .count() as u64;
        FrameTally {
            user_block_errors: errors,
            any_user_error: errors > 0,
            scans: detection.scans.0,
        }
    }
}

/// The per-frame channel stream for `(seed, frame)`.
pub fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng
}

/// One simulated coded block: channel, information bits, per-slot messages
/// and observations.
#[derive(Debug, Clone)]
pub struct Frame {
    pub channel: crate::baseband::LiftedChannel,
    pub info: Vec<Vec<u8>>,
    pub messages: Vec<Vec<usize>>,
    pub observations: Vec<ObservationVector>,
}

/// Draws frame `frame` of the sweep at `snr_db`.
pub fn simulate_frame(
    cfg: &SimConfig,
    constellation: &Constellation,
    code: &dyn ChannelCode,
    snr_db: f64,
    frame: u64,
) -> Result<Frame> {
    let mut rng = frame_rng(cfg.seed, frame);
    let channel = lift_channel(&draw_channel(cfg.users, cfg.rx, &mut rng)?);
    let p = constellation.bits_per_symbol();
    let mut info = Vec::with_capacity(cfg.users);
    let mut messages = Vec::with_capacity(cfg.users);
    for _ in 0..cfg.users {
        let bits: Vec<u8> = (0..code.info_len()).map(|_| rng.random_range(0..2u8)).collect();
        messages.push(messages_from_coded_bits(&code.encode(&bits)?, p)?);
        info.push(bits);
    }
    let slots = code.block_len() / p;
    let mut observations = Vec::with_capacity(slots);
    let mut symbols = Vec::with_capacity(cfg.users);
    for t in 0..slots {
        symbols.clear();
        for user in &messages {
            symbols.push(modulate(user[t], constellation)?);
        }
        observations.push(transmit(&channel, &lift_symbols(&symbols), snr_db, &mut rng)?);
    }
    Ok(Frame {
        channel,
        info,
        messages,
        observations,
    })
}

/// Runs every configured detector on one frame.
pub fn run_frame(
    cfg: &SimConfig,
    constellation: &Constellation,
    code: &PolarCode,
    snr_db: f64,
    frame_index: u64,
) -> Result<Vec<FrameTally>> {
    let frame = simulate_frame(cfg, constellation, code, snr_db, frame_index)?;
    let needs_code = cfg.detectors.iter().any(|d| *d != DetectorKind::Zf);
    let spatial = if needs_code {
        Some(SpatialCode::build(&frame.channel, constellation, snr_db)?)
    } else {
        None
    };
    let detector = match &spatial {
        Some(sc) => Some(FrameDetector::new(sc, &frame.observations)?),
        None => None,
    };
    let all_wrong = FrameTally {
        user_block_errors: cfg.users as u64,
        any_user_error: true,
        scans: 0,
    };
    cfg.detectors
        .iter()
        .map(|kind| {
            let detection = match (kind, &detector) {
                (DetectorKind::Zf, _) => {
                    match ZfDetector::new(&frame.channel, cfg.modulation, snr_db) {
                        Ok(zf) => detect_frame_zf(&frame.observations, &zf, code)?,
                        // A rank-deficient draw leaves ZF without an estimate.
                        Err(Error::SingularChannel(_)) => return Ok(all_wrong),
                        Err(e) => return Err(e),
                    }
                }
                (DetectorKind::So, Some(d)) => d.so(code)?,
                (DetectorKind::Scso, Some(d)) => d.scso(code)?,
                (DetectorKind::OrderedScso, Some(d)) => d.ordered_scso(code)?,
                (DetectorKind::Genie, Some(d)) => d.genie_scso(code, &frame.messages)?,
                (_, None) => unreachable!("spatial code is built whenever a code-based detector is configured"),
            };
            Ok(FrameTally::score(&detection, &frame.info))
        })
        .collect()
}

/// Timing of one SNR point, reported in the metadata rather than the rows.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PointTiming {
    pub snr_db: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<FerPoint>,
    pub timings: Vec<PointTiming>,
}

pub fn run_fer_sweep(cfg: &SimConfig) -> Result<Vec<FerPoint>> {
    Ok(run_fer_sweep_with(cfg, Execution::Parallel)?.points)
}

pub fn run_fer_sweep_with(cfg: &SimConfig, execution: Execution) -> Result<SweepResult> {
    cfg.validate()?;
    let constellation = cfg.constellation();
    let code = cfg.code.build()?;
    let mut points = Vec::new();
    let mut timings = Vec::new();
    for snr_db in cfg.snr.points() {
        let started = Instant::now();
        let job = |f: u64| run_frame(cfg, &constellation, &code, snr_db, f);
        let tallies: Vec<Vec<FrameTally>> = match execution {
            Execution::Serial => (0..cfg.frames).map(job).collect::<Result<_>>()?,
            Execution::Parallel => (0..cfg.frames).into_par_iter().map(job).collect::<Result<_>>()?,
        };
        for (d, &kind) in cfg.detectors.iter().enumerate() {
            let mut user_block_errors = 0u64;
            let mut any = 0u64;
            let mut scans = 0u64;
            for frame in &tallies {
                user_block_errors += frame[d].user_block_errors;
                any += u64::from(frame[d].any_user_error);
                scans += frame[d].scans;
            }
            points.push(FerPoint {
                snr_db,
                detector: kind,
                frames: cfg.frames,
                user_block_errors,
                fer: user_block_errors as f64 / (cfg.frames * cfg.users as u64) as f64,
                mean_scans: scans as f64 / cfg.frames as f64,
                seed: cfg.seed,
                frame_errors_any: any,
            });
        }
        timings.push(PointTiming {
            snr_db,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(SweepResult { points, timings })
}

/// Wilson score interval for `errors` out of `trials` at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// SNR at which a FER curve crosses `target`, by linear interpolation of
/// `log10(FER)` between the first bracketing pair of grid points.
pub fn snr_at_fer(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let log = |v: f64| v.max(1e-12).log10();
    curve.windows(2).find_map(|w| {
        let ((s0, f0), (s1, f1)) = (w[0], w[1]);
        if f0 >= target && f1 <= target && f0 > f1 {
            let frac = (log(f0) - log(target)) / (log(f0) - log(f1));
            Some(s0 + frac * (s1 - s0))
        } else if f0 == target {
            Some(s0)
        } else {
            None
        }
    })
}
