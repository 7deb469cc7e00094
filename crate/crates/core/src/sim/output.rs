use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DetectorKind, OutputFormat, SimConfig};
use super::PointTiming;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "snr_db,detector,frames,user_block_errors,fer,mean_scans,seed,frame_errors_any";

/// Aggregated result of one detector at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerPoint {
    pub snr_db: f64,
    #[serde(with = "detector_name")]
    pub detector: DetectorKind,
    pub frames: u64,
    /// Information blocks decoded wrongly, summed over users.
    pub user_block_errors: u64,
    /// `user_block_errors / (frames * K)`.
    pub fer: f64,
    /// Mean codeword comparisons per frame.
    pub mean_scans: f64,
    pub seed: u64,
    /// Frames in which at least one user's block was wrong.
    pub frame_errors_any: u64,
}

mod detector_name {
    use super::DetectorKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &DetectorKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(d.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DetectorKind, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Provenance and conventions written next to every result file.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub seed: u64,
    pub users: usize,
    pub rx_antennas: usize,
    pub modulation: String,
    pub code: String,
    pub code_description: String,
    pub frozen_positions: Vec<usize>,
    pub frames_per_point: u64,
    pub detectors: Vec<String>,
    pub snr_convention: String,
    pub q_function: String,
    pub crossover_clamp: [f64; 2],
    pub llr_convention: String,
    pub fer_definition: String,
    pub tie_breaks: String,
    pub rng: String,
    pub timings: Vec<PointTiming>,
}

impl RunMetadata {
    pub fn new(cfg: &SimConfig, timings: Vec<PointTiming>) -> Result<Self> {
        use crate::fec::ChannelCode;
        let code = cfg.code.build()?;
        Ok(RunMetadata {
            tool: format!("onebit-mimo {}", env!("CARGO_PKG_VERSION")),
            seed: cfg.seed,
            users: cfg.users,
            rx_antennas: cfg.rx,
            modulation: cfg.modulation.to_string(),
            code: cfg.code.to_string(),
            code_description: code.describe(),
            frozen_positions: code.frozen_positions(),
            frames_per_point: cfg.frames,
            detectors: cfg.detectors.iter().map(|d| d.to_string()).collect(),
            snr_convention: "per-user average symbol energy Es = SNR_lin, complex noise CN(0,1) \
                             (variance 1/2 per real dimension)"
                .into(),
            q_function: "eps = Q(|h_i^T x| / sqrt(1/2)), Q(x) = 0.5 erfc(x / sqrt 2)".into(),
            crossover_clamp: [crate::spatial_code::EPS_MIN, crate::spatial_code::EPS_MAX],
            llr_convention: "positive favours bit 0; weights ln(1/eps)".into(),
            fer_definition: "user_block_errors / (frames * K); frame_errors_any counts frames with \
                             any wrong user block"
                .into(),
            tie_breaks: "argmax/argmin/majority pick the smallest index or value; SC decides 0 on a \
                         zero LLR"
                .into(),
            rng: "ChaCha8, stream = frame index, shared across SNR points and detectors".into(),
            timings,
        })
    }
}

pub fn write_csv<W: Write>(points: &[FerPoint], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.snr_db, p.detector, p.frames, p.user_block_errors, p.fer, p.mean_scans, p.seed, p.frame_errors_any
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(points: &[FerPoint], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, points).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<FerPoint>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::InvalidInput(format!("unexpected CSV header {other:?}"))),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::InvalidInput(format!("expected 8 fields in '{line}'")));
            }
            let bad = |what: &str| Error::InvalidInput(format!("bad {what} in '{line}'"));
            Ok(FerPoint {
                snr_db: f[0].parse().map_err(|_| bad("snr_db"))?,
                detector: f[1].parse()?,
                frames: f[2].parse().map_err(|_| bad("frames"))?,
                user_block_errors: f[3].parse().map_err(|_| bad("user_block_errors"))?,
                fer: f[4].parse().map_err(|_| bad("fer"))?,
                mean_scans: f[5].parse().map_err(|_| bad("mean_scans"))?,
                seed: f[6].parse().map_err(|_| bad("seed"))?,
                frame_errors_any: f[7].parse().map_err(|_| bad("frame_errors_any"))?,
            })
        })
        .collect()
}

/// Sidecar metadata file written next to `path`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes the result rows to `path` and the metadata to [`metadata_path`].
pub fn emit_results(points: &[FerPoint], path: &Path, format: OutputFormat, metadata: &RunMetadata) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no result points to write".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(points, &mut out)?,
        OutputFormat::Json => write_json(points, &mut out)?,
    }
    out.flush()?;
    let mut meta = BufWriter::new(File::create(metadata_path(path))?);
    serde_json::to_writer_pretty(&mut meta, metadata).map_err(|e| Error::Io(e.into()))?;
    writeln!(meta)?;
    meta.flush()?;
    Ok(())
}
