use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use onebit_mimo::baseband::{lift_channel, ChannelMatrix, Constellation, Modulation, ObservationVector};
use onebit_mimo::detectors::{ml_hard_detect, scso_llrs, so_llrs};
use onebit_mimo::spatial_code::SpatialCode;
use onebit_mimo_ffi::*;

const H_RE: [f64; 6] = [0.3, -1.1, 0.8, 0.2, -0.5, 1.4];
const H_IM: [f64; 6] = [-0.7, 0.4, 0.1, -1.2, 0.9, 0.6];

fn last_error() -> String {
    unsafe { CStr::from_ptr(om_last_error()) }.to_string_lossy().into_owned()
}

fn new_code(snr_db: f64) -> *mut OmSpatialCode {
    let mut code = ptr::null_mut();
    let status = unsafe { om_spatial_code_new(H_RE.as_ptr(), H_IM.as_ptr(), 3, 2, OM_MOD_QAM4, snr_db, &mut code) };
    assert_eq!(status, OmStatus::Ok, "{}", last_error());
    code
}

fn rust_code(snr_db: f64) -> SpatialCode {
    let entries = H_RE.iter().zip(&H_IM).map(|(&a, &b)| num_complex::Complex64::new(a, b)).collect();
    let ch = lift_channel(&ChannelMatrix::new(3, 2, entries).unwrap());
    SpatialCode::build(&ch, &Constellation::new(Modulation::Qam4), snr_db).unwrap()
}

#[test]
fn spatial_code_matches_the_library() {
    let code = new_code(2.0);
    let reference = rust_code(2.0);
    let (mut len, mut dims) = (0, 0);
    assert_eq!(unsafe { om_spatial_code_shape(code, &mut len, &mut dims) }, OmStatus::Ok);
    assert_eq!((len, dims), (16, 6));

    let mut bits = [0u8; 6];
    let mut eps = [0.0; 6];
    for l in 0..len {
        assert_eq!(unsafe { om_spatial_code_codeword(code, l, bits.as_mut_ptr(), eps.as_mut_ptr(), 6) }, OmStatus::Ok);
        assert_eq!(bits.to_vec(), reference.codeword(l));
        assert_eq!(eps, reference.eps(l));
    }

    let mut llrs = [0.0; 2];
    let mut messages = [0usize; 2];
    for packed in [0u8, 13, 42, 63] {
        let r: Vec<u8> = (0..6).map(|i| (packed >> i) & 1).collect();
        let obs = ObservationVector::from_bits(&r).unwrap();
        for user in 0..2 {
            assert_eq!(unsafe { om_so_llrs(code, r.as_ptr(), 6, user, llrs.as_mut_ptr(), 2) }, OmStatus::Ok);
            assert_eq!(llrs.to_vec(), so_llrs(&obs, &reference, user).unwrap());
        }
        let (fu, fm) = ([0usize], [3usize]);
        let status = unsafe { om_scso_llrs(code, r.as_ptr(), 6, 1, fu.as_ptr(), fm.as_ptr(), 1, llrs.as_mut_ptr(), 2) };
        assert_eq!(status, OmStatus::Ok);
        assert_eq!(llrs.to_vec(), scso_llrs(&obs, &reference, 1, &[(0, 3)]).unwrap());
        assert_eq!(unsafe { om_ml_hard_detect(code, r.as_ptr(), 6, messages.as_mut_ptr(), 2) }, OmStatus::Ok);
        assert_eq!(messages.to_vec(), ml_hard_detect(&obs, &reference).unwrap());
    }
    unsafe { om_spatial_code_free(code) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut code = ptr::null_mut();
    let status = unsafe { om_spatial_code_new(H_RE.as_ptr(), H_IM.as_ptr(), 3, 2, 7, 0.0, &mut code) };
    assert_eq!(status, OmStatus::InvalidInput);
    assert!(code.is_null());
    assert!(last_error().contains("modulation"));

    let status = unsafe { om_spatial_code_new(ptr::null(), H_IM.as_ptr(), 3, 2, OM_MOD_QAM4, 0.0, &mut code) };
    assert_eq!(status, OmStatus::NullPointer);
    assert!(last_error().contains("h_re"));

    let code = new_code(0.0);
    assert_eq!(last_error(), "");
    let r = [0u8; 4];
    let mut llrs = [0.0; 2];
    assert_eq!(unsafe { om_so_llrs(code, r.as_ptr(), 4, 0, llrs.as_mut_ptr(), 2) }, OmStatus::Shape);
    let r = [0u8; 6];
    assert_eq!(unsafe { om_so_llrs(code, r.as_ptr(), 6, 0, llrs.as_mut_ptr(), 3) }, OmStatus::Shape);
    assert_eq!(unsafe { om_so_llrs(code, r.as_ptr(), 6, 5, llrs.as_mut_ptr(), 2) }, OmStatus::InvalidInput);
    assert_eq!(unsafe { om_spatial_code_codeword(code, 16, ptr::null_mut(), ptr::null_mut(), 6) }, OmStatus::InvalidInput);
    assert_eq!(unsafe { om_so_llrs(ptr::null(), r.as_ptr(), 6, 0, llrs.as_mut_ptr(), 2) }, OmStatus::NullPointer);
    unsafe { om_spatial_code_free(code) };
    unsafe { om_spatial_code_free(ptr::null_mut()) };
}

#[test]
fn polar_round_trip() {
    let mut polar = ptr::null_mut();
    assert_eq!(unsafe { om_polar_new(64, 0.5, 0.0, &mut polar) }, OmStatus::Ok);
    let (mut n, mut k) = (0, 0);
    assert_eq!(unsafe { om_polar_shape(polar, &mut n, &mut k) }, OmStatus::Ok);
    assert_eq!((n, k), (64, 32));
    let info: Vec<u8> = (0..k).map(|i| (i * 7 % 3 == 0) as u8).collect();
    let mut coded = vec![0u8; n];
    assert_eq!(unsafe { om_polar_encode(polar, info.as_ptr(), k, coded.as_mut_ptr(), n) }, OmStatus::Ok);
    let llrs: Vec<f64> = coded.iter().map(|&b| if b == 0 { 3.0 } else { -3.0 }).collect();
    let mut decoded = vec![9u8; k];
    assert_eq!(unsafe { om_polar_decode(polar, llrs.as_ptr(), n, decoded.as_mut_ptr(), k) }, OmStatus::Ok);
    assert_eq!(decoded, info);
    unsafe { om_polar_free(polar) };

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { om_polar_new(24, 0.5, 0.0, &mut bad) }, OmStatus::InvalidInput);
    assert!(bad.is_null());
}

#[test]
fn sweep_returns_owned_rows() {
    let config = CString::new("k = 2\nnr = 3\ncode = polar:16:0.5\nsnr = 0:2:1\nframes = 8\ndetector = so,oscso\nseed = 4\n").unwrap();
    let mut points = ptr::null_mut();
    let mut len = 0;
    assert_eq!(unsafe { om_run_sweep(config.as_ptr(), &mut points, &mut len) }, OmStatus::Ok, "{}", last_error());
    let rows = unsafe { std::slice::from_raw_parts(points, len) };
    assert_eq!(len, 6);
    assert_eq!(rows[0].detector, OM_DET_SO);
    assert_eq!(rows[1].detector, OM_DET_OSCSO);
    assert!(rows.iter().all(|p| p.frames == 8 && p.seed == 4 && (0.0..=1.0).contains(&p.fer)));
    unsafe { om_fer_points_free(points, len) };

    let bad = CString::new("frames = 0\n").unwrap();
    assert_eq!(unsafe { om_run_sweep(bad.as_ptr(), &mut points, &mut len) }, OmStatus::Config);
    assert!(points.is_null() && len == 0);
    assert!(last_error().contains("frames"));
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(om_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/onebit_mimo.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["om_spatial_code_new", "om_scso_llrs", "om_polar_decode", "om_run_sweep", "OM_STATUS_PANIC", "OmFerPoint"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler found, skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
