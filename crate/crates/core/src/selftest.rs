//! Fast built-in consistency checks, run by the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseband::{draw_channel, lift_channel, Constellation, Modulation, ObservationVector};
use crate::detectors::{
    exact_llrs, ml_hard_detect, scso_scans_per_group, so_llrs, so_scans_per_group, scso_llrs, FrameDetector,
};
use crate::fec::{ChannelCode, PolarCode, RepetitionCode};
use crate::spatial_code::{exact_loglikelihood, expand_index, subcode_indices, SpatialCode, SubcodeSelector};

pub struct Check {
    pub name: &'static str,
    pub result: Result<(), String>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_code(seed: u64, k: usize, nr: usize, snr_db: f64) -> Result<SpatialCode, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = lift_channel(&draw_channel(k, nr, &mut rng).map_err(|e| e.to_string())?);
    SpatialCode::build(&ch, &Constellation::new(Modulation::Qam4), snr_db).map_err(|e| e.to_string())
}

fn oracle_equivalence() -> Result<(), String> {
    for (seed, nr) in [(0, 2), (1, 2), (2, 4)] {
        let code = random_code(seed, 2, nr, 3.0)?;
        let n = 2 * nr;
        for user in 0..2 {
            for w in 0..4 {
                let sel = SubcodeSelector::all().fix(user, w);
                let got = subcode_indices(&sel, &code).map_err(|e| e.to_string())?;
                let want: Vec<usize> = (0..16).filter(|&l| code.digit(l, user) == w).collect();
                ensure(got == want, || format!("subcode mismatch for user {user} = {w}"))?;
            }
        }
        for bits in 0..1u64 << n {
            let r = ObservationVector::from_packed(bits, n);
            let ml = ml_hard_detect(&r, &code).map_err(|e| e.to_string())?;
            let best = (0..16)
                .map(|l| (l, exact_loglikelihood(&r, l, &code)))
                .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            ensure(ml == expand_index(best.0, 4, 2).unwrap(), || format!("ML mismatch at r = {bits:08b}"))?;
            for user in 0..2 {
                let a = so_llrs(&r, &code, user).map_err(|e| e.to_string())?;
                let b = scso_llrs(&r, &code, user, &[]).map_err(|e| e.to_string())?;
                ensure(a == b, || "SCSO with empty prefix differs from SO".into())?;
                let e = exact_llrs(&r, &code, user, &[]).map_err(|e| e.to_string())?;
                ensure(e.iter().chain(&a).all(|v| v.is_finite()), || "non-finite LLR".into())?;
            }
        }
    }
    Ok(())
}

fn normalization() -> Result<(), String> {
    let code = random_code(7, 2, 4, 2.0)?;
    for l in 0..code.len() {
        let total: f64 = (0..1u64 << 8)
            .map(|r| exact_loglikelihood(&ObservationVector::from_packed(r, 8), l, &code).exp())
            .sum();
        ensure((total - 1.0).abs() < 1e-9, || format!("likelihoods of codeword {l} sum to {total}"))?;
    }
    Ok(())
}

fn polar_round_trip() -> Result<(), String> {
    let code = PolarCode::new(128, 0.5, 0.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
        let llrs: Vec<f64> = code
            .encode(&info)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|&b| if b == 0 { 1e3 } else { -1e3 })
            .collect();
        ensure(code.decode(&llrs).map_err(|e| e.to_string())? == info, || "polar round trip failed".into())?;
    }
    Ok(())
}

fn scan_accounting() -> Result<(), String> {
    let code = random_code(3, 3, 3, 4.0)?;
    let slots = 4;
    let obs: Vec<ObservationVector> = (0..slots).map(|t| ObservationVector::from_packed(t * 37 % 64, 6)).collect();
    let rep = RepetitionCode::new(2, 4).map_err(|e| e.to_string())?;
    let det = FrameDetector::new(&code, &obs).map_err(|e| e.to_string())?;
    let n = slots * 2;
    let so = det.so(&rep).map_err(|e| e.to_string())?.scans.0;
    let scso = det.scso(&rep).map_err(|e| e.to_string())?.scans.0;
    ensure(so == n * so_scans_per_group(4, 3), || format!("SO scans {so}"))?;
    ensure(scso == n * scso_scans_per_group(4, 3), || format!("SCSO scans {scso}"))
}

pub fn run() -> Vec<Check> {
    vec![
        Check { name: "oracle equivalence (K=2, N_r in {2, 4}, exhaustive r)", result: oracle_equivalence() },
        Check { name: "likelihood normalization", result: normalization() },
        Check { name: "polar n=128 noiseless round trip", result: polar_round_trip() },
        Check { name: "scan-count closed forms", result: scan_accounting() },
    ]
}
