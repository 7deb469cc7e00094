//! Sweep configuration and its flat `key = value` file format.
//!
//! ```text
//! # comment
//! k = 6
//! nr = 12
//! mod = 4qam
//! code = polar:128:0.5
//! detector = so,oscso
//! snr = -2:6:1
//! frames = 2000
//! seed = 1
//! out = results.csv
//! format = csv
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baseband::{Constellation, Modulation, MAX_DIMS};
use crate::error::{Error, Result};
use crate::fec::PolarCode;

/// Upper bound on `m^K` accepted by the harness.
pub const MAX_CODE_SIZE: usize = 1 << 20;

fn config_err<T>(field: &str, msg: impl fmt::Display) -> Result<T> {
    Err(Error::Config(format!("field '{field}': {msg}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    So,
    Scso,
    OrderedScso,
    Zf,
    /// Natural-order SCSO conditioned on the transmitted messages.
    Genie,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::So => "so",
            DetectorKind::Scso => "scso",
            DetectorKind::OrderedScso => "oscso",
            DetectorKind::Zf => "zf",
            DetectorKind::Genie => "genie",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "so" => Ok(DetectorKind::So),
            "scso" => Ok(DetectorKind::Scso),
            "oscso" | "ordered-scso" => Ok(DetectorKind::OrderedScso),
            "zf" => Ok(DetectorKind::Zf),
            "genie" | "ml-genie" => Ok(DetectorKind::Genie),
            other => config_err("detector", format!("unknown detector '{other}'")),
        }
    }
}

/// Comma-separated detector list, e.g. `so,oscso`.
pub fn parse_detectors(s: &str) -> Result<Vec<DetectorKind>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let d: DetectorKind = part.parse()?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    if out.is_empty() {
        return config_err("detector", "no detector given");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodeSpec {
    Polar { n: usize, rate: f64, design_db: f64 },
}

impl CodeSpec {
    pub fn block_len(&self) -> usize {
        match *self {
            CodeSpec::Polar { n, .. } => n,
        }
    }

    pub fn build(&self) -> Result<PolarCode> {
        match *self {
            CodeSpec::Polar { n, rate, design_db } => PolarCode::new(n, rate, design_db),
        }
    }
}

impl fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeSpec::Polar { n, rate, design_db } => write!(f, "polar:{n}:{rate}:{design_db}"),
        }
    }
}

impl FromStr for CodeSpec {
    type Err = Error;

    /// `polar:<n>:<rate>[:<design dB>]`; the design parameter defaults to 0 dB.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["polar", n, rate, rest @ ..] if rest.len() <= 1 => {
                let n = n.parse().or_else(|_| config_err("code", format!("bad block length '{n}'")))?;
                let rate = rate.parse().or_else(|_| config_err("code", format!("bad rate '{rate}'")))?;
                let design_db = match rest.first() {
                    Some(d) => d.parse().or_else(|_| config_err("code", format!("bad design SNR '{d}'")))?,
                    None => 0.0,
                };
                Ok(CodeSpec::Polar { n, rate, design_db })
            }
            _ => config_err("code", format!("expected polar:<n>:<rate>[:<design dB>], got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn points(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

impl FromStr for SnrGrid {
    type Err = Error;

    /// `A:B:STEP`, or a single value `A`.
    fn from_str(s: &str) -> Result<Self> {
        let values: Vec<f64> = s
            .split(':')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .or_else(|_| config_err("snr", format!("expected A:B:STEP, got '{s}'")))?;
        match values.as_slice() {
            [a] => Ok(SnrGrid { start: *a, stop: *a, step: 1.0 }),
            [a, b, step] => Ok(SnrGrid { start: *a, stop: *b, step: *step }),
            _ => config_err("snr", format!("expected A:B:STEP, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => config_err("format", format!("expected csv or json, got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub users: usize,
    pub rx: usize,
    pub modulation: Modulation,
    pub code: CodeSpec,
    pub snr: SnrGrid,
    pub frames: u64,
    pub seed: u64,
    pub detectors: Vec<DetectorKind>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for SimConfig {
    /// The 6-user, 12-antenna, 4-QAM, rate-1/2 length-128 polar setup.
    fn default() -> Self {
        SimConfig {
            users: 6,
            rx: 12,
            modulation: Modulation::Qam4,
            code: CodeSpec::Polar { n: 128, rate: 0.5, design_db: 0.0 },
            snr: SnrGrid { start: -4.0, stop: 4.0, step: 1.0 },
            frames: 1000,
            seed: 1,
            detectors: vec![DetectorKind::So, DetectorKind::OrderedScso],
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return config_err("k", "must be at least 1");
        }
        if self.rx == 0 {
            return config_err("nr", "must be at least 1");
        }
        if 2 * self.rx > MAX_DIMS {
            return config_err("nr", format!("2 * nr must not exceed {MAX_DIMS}"));
        }
        let m = Constellation::new(self.modulation).order();
        let size = u32::try_from(self.users).ok().and_then(|k| m.checked_pow(k));
        if size.is_none_or(|s| s > MAX_CODE_SIZE) {
            return config_err("k", format!("{m}^{} codewords exceed {MAX_CODE_SIZE}", self.users));
        }
        let p = Constellation::new(self.modulation).bits_per_symbol();
        if !self.code.block_len().is_multiple_of(p) {
            return config_err("code", format!("block length must be a multiple of {p} bits per symbol"));
        }
        if let Err(e) = self.code.build() {
            return config_err("code", e);
        }
        if self.frames == 0 {
            return config_err("frames", "must be at least 1");
        }
        if self.snr.points().is_empty() {
            return config_err("snr", "grid is empty (need step > 0 and stop >= start)");
        }
        if self.snr.points().iter().any(|v| !v.is_finite()) {
            return config_err("snr", "grid values must be finite");
        }
        if self.detectors.is_empty() {
            return config_err("detector", "no detector given");
        }
        if self.detectors.contains(&DetectorKind::Zf) && !matches!(self.modulation, Modulation::Bpsk | Modulation::Qam4) {
            return config_err("detector", "zf supports bpsk and 4qam only");
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let int = |field: &str| -> Result<u64> {
            value.parse().or_else(|_| config_err(field, format!("expected an integer, got '{value}'")))
        };
        match key.trim().to_ascii_lowercase().as_str() {
            "k" => self.users = int("k")? as usize,
            "nr" => self.rx = int("nr")? as usize,
            "mod" => self.modulation = value.parse().or_else(|e: Error| config_err("mod", e))?,
            "code" => self.code = value.parse()?,
            "detector" => self.detectors = parse_detectors(value)?,
            "snr" => self.snr = value.parse()?,
            "frames" => self.frames = int("frames")?,
            "seed" => self.seed = int("seed")?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            other => return config_err(other, "unknown key"),
        }
        Ok(())
    }

    /// Parses the flat key-value format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got '{line}'", lineno + 1))
            })?;
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.modulation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_full_file() {
        let cfg = SimConfig::parse(
            "# setup\nk = 2\nnr=4\nmod = 4qam\ncode = polar:64:0.5:1.5\ndetector = so, oscso ,genie\n\
             snr = 0:2:0.5\nframes = 10\nseed = 7 # trailing\nout = x.json\nformat = json\n",
        )
        .unwrap();
        assert_eq!(cfg.users, 2);
        assert_eq!(cfg.rx, 4);
        assert_eq!(cfg.code, CodeSpec::Polar { n: 64, rate: 0.5, design_db: 1.5 });
        assert_eq!(cfg.detectors, vec![DetectorKind::So, DetectorKind::OrderedScso, DetectorKind::Genie]);
        assert_eq!(cfg.snr.points(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.format, OutputFormat::Json);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let cfg = SimConfig { frames: 0, ..SimConfig::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("frames"), "{err}");

        let cfg = SimConfig { snr: SnrGrid { start: 3.0, stop: 1.0, step: 1.0 }, ..SimConfig::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("snr"));

        let cfg = SimConfig { code: CodeSpec::Polar { n: 100, rate: 0.5, design_db: 0.0 }, ..SimConfig::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("code"));

        assert!(SimConfig::parse("bogus = 1").is_err());
        assert!(SimConfig::parse("k 6").is_err());
        assert!(SimConfig::parse("detector = fancy").is_err());
        assert!(SimConfig::parse("snr = 1:2").is_err());
        assert!(matches!(SimConfig::parse("frames = -1"), Err(Error::Config(_))));
    }

    #[test]
    fn grid_points() {
        let g: SnrGrid = "-1:1:0.1".parse().unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 21);
        assert_eq!(pts[13], 0.3);
        assert_eq!("2.5".parse::<SnrGrid>().unwrap().points(), vec![2.5]);
    }
}
