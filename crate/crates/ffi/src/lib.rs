//! C ABI over `onebit_mimo`.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every call returns an [`OmStatus`]; on failure [`om_last_error`] gives a
//! message for the calling thread. Panics never cross the boundary.
//! Bit and LLR buffers follow the library conventions: observation bit `i` is
//! dimension `i` (real parts first), LLRs are positive for bit 0, users are
//! 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;

use onebit_mimo::baseband::{lift_channel, ChannelMatrix, Constellation, Modulation, ObservationVector};
use onebit_mimo::detectors::{ml_hard_detect, scso_llrs, so_llrs};
use onebit_mimo::fec::{ChannelCode, PolarCode};
use onebit_mimo::sim::{run_fer_sweep, DetectorKind, FerPoint, SimConfig};
use onebit_mimo::spatial_code::SpatialCode;
use onebit_mimo::Error;


#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Shape = 3,
    SingularChannel = 4,
    Config = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// Modulation codes accepted by [`om_spatial_code_new`].
pub const OM_MOD_BPSK: u32 = 0;
pub const OM_MOD_QAM4: u32 = 1;
pub const OM_MOD_QAM16: u32 = 2;

/// Detector codes reported in [`OmFerPoint::detector`].
pub const OM_DET_SO: u32 = 0;
pub const OM_DET_SCSO: u32 = 1;
pub const OM_DET_OSCSO: u32 = 2;
pub const OM_DET_ZF: u32 = 3;
pub const OM_DET_GENIE: u32 = 4;

/// Spatial-domain code of one channel realization.
pub struct OmSpatialCode(SpatialCode);

/// Polar code with successive-cancellation decoding.
pub struct OmPolarCode(PolarCode);

/// One row of a FER sweep.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmFerPoint {
    pub snr_db: f64,
    pub detector: u32,
    pub frames: u64,
    pub user_block_errors: u64,
    pub fer: f64,
    pub mean_scans: f64,
    pub seed: u64,
    pub frame_errors_any: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
}

fn status_of(e: &Error) -> OmStatus {
    match e {
        Error::InvalidInput(_) => OmStatus::InvalidInput,
        Error::Shape(_) => OmStatus::Shape,
        Error::SingularChannel(_) => OmStatus::SingularChannel,
        Error::Config(_) => OmStatus::Config,
        Error::Io(_) => OmStatus::Io,
        _ => OmStatus::Internal,
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            OmStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            OmStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            OmStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn copy_out<T: Copy>(src: &[T], dst: &mut [T]) -> Result<(), Failure> {
    if dst.len() != src.len() {
        return Err(Error::Shape(format!("output buffer holds {}, need {}", dst.len(), src.len())).into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

fn modulation_of(code: u32) -> Result<Modulation, Failure> {
    match code {
        OM_MOD_BPSK => Ok(Modulation::Bpsk),
        OM_MOD_QAM4 => Ok(Modulation::Qam4),
        OM_MOD_QAM16 => Ok(Modulation::Qam16),
        other => Err(Error::InvalidInput(format!("unknown modulation code {other}")).into()),
    }
}

fn detector_code(kind: DetectorKind) -> u32 {
    match kind {
        DetectorKind::So => OM_DET_SO,
        DetectorKind::Scso => OM_DET_SCSO,
        DetectorKind::OrderedScso => OM_DET_OSCSO,
        DetectorKind::Zf => OM_DET_ZF,
        DetectorKind::Genie => OM_DET_GENIE,
    }
}

fn observation(bits: &[u8]) -> Result<ObservationVector, Failure> {
    Ok(ObservationVector::from_bits(bits)?)
}

/// Message describing the last failed call on this thread ("" after a
/// successful call). The pointer stays valid until the next call on the
/// same thread.
#[no_mangle]
pub extern "C" fn om_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn om_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the spatial code of an `n_rx x n_users` channel given as row-major
/// real and imaginary parts.
///
/// # Safety
/// `h_re` and `h_im` must point to `n_rx * n_users` doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn om_spatial_code_new(
    h_re: *const f64,
    h_im: *const f64,
    n_rx: usize,
    n_users: usize,
    modulation: u32,
    snr_db: f64,
    out: *mut *mut OmSpatialCode,
) -> OmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let len = n_rx.checked_mul(n_users).ok_or_else(|| Error::InvalidInput("channel size overflows".into()))?;
        let re = slice(h_re, len, "h_re")?;
        let im = slice(h_im, len, "h_im")?;
        let entries = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let channel = lift_channel(&ChannelMatrix::new(n_rx, n_users, entries)?);
        let constellation = Constellation::new(modulation_of(modulation)?);
        let code = SpatialCode::build(&channel, &constellation, snr_db)?;
        *out = Box::into_raw(Box::new(OmSpatialCode(code)));
        Ok(())
    })
}

/// # Safety
/// `code` must come from [`om_spatial_code_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn om_spatial_code_free(code: *mut OmSpatialCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Number of codewords `m^K` and codeword length `N`.
///
/// # Safety
/// `code` must be a live handle; `len` and `dims` must be writable.
#[no_mangle]
pub unsafe extern "C" fn om_spatial_code_shape(code: *const OmSpatialCode, len: *mut usize, dims: *mut usize) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        *len.as_mut().ok_or(Failure::Null("len"))? = code.len();
        *dims.as_mut().ok_or(Failure::Null("dims"))? = code.dims();
        Ok(())
    })
}

/// Writes codeword `l` (`N` bits) and its crossover probabilities.
/// Either output may be null to skip it.
///
/// # Safety
/// Non-null outputs must hold `dims` elements.
#[no_mangle]
pub unsafe extern "C" fn om_spatial_code_codeword(
    code: *const OmSpatialCode,
    l: usize,
    bits: *mut u8,
    eps: *mut f64,
    dims: usize,
) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        if l >= code.len() {
            return Err(Error::InvalidInput(format!("codeword index {l} out of range")).into());
        }
        if !bits.is_null() {
            copy_out(&code.codeword(l), slice_mut(bits, dims, "bits")?)?;
        }
        if !eps.is_null() {
            copy_out(code.eps(l), slice_mut(eps, dims, "eps")?)?;
        }
        Ok(())
    })
}

/// SO LLRs of `user`'s label bits for the observation `r` (`r_len` bits).
///
/// # Safety
/// `r` must hold `r_len` bytes and `llrs` `llr_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn om_so_llrs(
    code: *const OmSpatialCode,
    r: *const u8,
    r_len: usize,
    user: usize,
    llrs: *mut f64,
    llr_len: usize,
) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        let out = so_llrs(&observation(slice(r, r_len, "r")?)?, code, user)?;
        copy_out(&out, slice_mut(llrs, llr_len, "llrs")?)
    })
}

/// SCSO LLRs of `user` over the code refined by `n_fixed` pairs
/// `(fixed_users[j], fixed_messages[j])`.
///
/// # Safety
/// Arrays must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn om_scso_llrs(
    code: *const OmSpatialCode,
    r: *const u8,
    r_len: usize,
    user: usize,
    fixed_users: *const usize,
    fixed_messages: *const usize,
    n_fixed: usize,
    llrs: *mut f64,
    llr_len: usize,
) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        let users = slice(fixed_users, n_fixed, "fixed_users")?;
        let messages = slice(fixed_messages, n_fixed, "fixed_messages")?;
        let fixed: Vec<(usize, usize)> = users.iter().copied().zip(messages.iter().copied()).collect();
        let out = scso_llrs(&observation(slice(r, r_len, "r")?)?, code, user, &fixed)?;
        copy_out(&out, slice_mut(llrs, llr_len, "llrs")?)
    })
}

/// Maximum-likelihood joint messages, one per user.
///
/// # Safety
/// `r` must hold `r_len` bytes and `messages` `n_users` elements.
#[no_mangle]
pub unsafe extern "C" fn om_ml_hard_detect(
    code: *const OmSpatialCode,
    r: *const u8,
    r_len: usize,
    messages: *mut usize,
    n_users: usize,
) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        let out = ml_hard_detect(&observation(slice(r, r_len, "r")?)?, code)?;
        copy_out(&out, slice_mut(messages, n_users, "messages")?)
    })
}

/// Polar code of length `n` and rate `rate`, frozen set designed at `design_db`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn om_polar_new(n: usize, rate: f64, design_db: f64, out: *mut *mut OmPolarCode) -> OmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        *out = Box::into_raw(Box::new(OmPolarCode(PolarCode::new(n, rate, design_db)?)));
        Ok(())
    })
}

/// # Safety
/// `code` must come from [`om_polar_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn om_polar_free(code: *mut OmPolarCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Block length `n` and number of information bits `k`.
///
/// # Safety
/// `code` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn om_polar_shape(code: *const OmPolarCode, n: *mut usize, k: *mut usize) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        *n.as_mut().ok_or(Failure::Null("n"))? = code.block_len();
        *k.as_mut().ok_or(Failure::Null("k"))? = code.info_len();
        Ok(())
    })
}

/// # Safety
/// `info` must hold `k` bytes and `coded` `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn om_polar_encode(
    code: *const OmPolarCode,
    info: *const u8,
    k: usize,
    coded: *mut u8,
    n: usize,
) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        let out = code.encode(slice(info, k, "info")?)?;
        copy_out(&out, slice_mut(coded, n, "coded")?)
    })
}

/// Successive-cancellation decoding of `n` LLRs into `k` information bits.
///
/// # Safety
/// `llrs` must hold `n` doubles and `info` `k` bytes.
#[no_mangle]
pub unsafe extern "C" fn om_polar_decode(
    code: *const OmPolarCode,
    llrs: *const f64,
    n: usize,
    info: *mut u8,
    k: usize,
) -> OmStatus {
    guard(|| {
        let code = &handle(code, "code")?.0;
        let out = code.decode(slice(llrs, n, "llrs")?)?;
        copy_out(&out, slice_mut(info, k, "info")?)
    })
}

/// Runs a FER sweep described by `config` (the `key = value` text format).
/// On success `*points` owns `*len` rows; release them with
/// [`om_fer_points_free`].
///
/// # Safety
/// `config` must be a NUL-terminated string; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn om_run_sweep(config: *const c_char, points: *mut *mut OmFerPoint, len: *mut usize) -> OmStatus {
    guard(|| {
        if points.is_null() || len.is_null() {
            return Err(Failure::Null("points/len"));
        }
        *points = ptr::null_mut();
        *len = 0;
        if config.is_null() {
            return Err(Failure::Null("config"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|_| Error::Config("config text is not UTF-8".into()))?;
        let cfg = SimConfig::parse(text)?;
        let rows: Box<[OmFerPoint]> = run_fer_sweep(&cfg)?.iter().map(to_c_point).collect();
        *len = rows.len();
        *points = Box::into_raw(rows).cast();
        Ok(())
    })
}

fn to_c_point(p: &FerPoint) -> OmFerPoint {
    OmFerPoint {
        snr_db: p.snr_db,
        detector: detector_code(p.detector),
        frames: p.frames,
        user_block_errors: p.user_block_errors,
        fer: p.fer,
        mean_scans: p.mean_scans,
        seed: p.seed,
        frame_errors_any: p.frame_errors_any,
    }
}

/// # Safety
/// `points` and `len` must come from one successful [`om_run_sweep`] call.
#[no_mangle]
pub unsafe extern "C" fn om_fer_points_free(points: *mut OmFerPoint, len: usize) {
    if !points.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(points, len)));
    }
}
