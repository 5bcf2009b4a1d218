//! C ABI for niirf.
//!
//! Every fallible function returns a [`NiirfStatus`]. On failure the message is kept in a
//! thread-local slot readable with [`niirf_last_error`]. Objects are opaque handles created
//! by `*_load` and released by the matching `*_free`. Output arrays are caller-allocated;
//! each writer takes the buffer capacity in elements and fails with
//! `NIIRF_STATUS_BUFFER_TOO_SMALL` when it is short.
//!
//! Directions are given in degrees: azimuth in [0, 360), elevation in [-90, 90].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use niirf::dataset::{load_container, Direction, HrtfSet};
use niirf::field::{Checkpoint, FieldModel, HeadSpec};
use niirf::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NiirfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Io = 4,
    Format = 5,
    Domain = 6,
    Unsupported = 7,
    Panic = 8,
}

/// A trained field loaded from a checkpoint.
pub struct NiirfModel {
    model: FieldModel,
}

/// HRTF measurements of every subject in a container file.
pub struct NiirfContainer {
    subjects: Vec<(CString, HrtfSet)>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> NiirfStatus {
    match e {
        Error::Io { .. } => NiirfStatus::Io,
        Error::Format(_) | Error::Measurement { .. } | Error::Checkpoint(_) => NiirfStatus::Format,
        Error::Domain(_) | Error::NonFinite(_) | Error::Direction(_) => NiirfStatus::Domain,
        Error::Config(_) => NiirfStatus::Unsupported,
        _ => NiirfStatus::InvalidArgument,
    }
}

struct Fail(NiirfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: NiirfStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NiirfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NiirfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NiirfStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return fail(NiirfStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(NiirfStatus::InvalidArgument, "path is not UTF-8"),
    }
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(Some(s)),
        Err(_) => fail(NiirfStatus::InvalidArgument, "string is not UTF-8"),
    }
}

unsafe fn handle<'a, T>(h: *const T) -> Result<&'a T, Fail> {
    h.as_ref()
        .ok_or_else(|| Fail(NiirfStatus::NullPointer, "handle is null".into()))
}

unsafe fn directions(az: *const f64, el: *const f64, n: usize) -> Result<Vec<Direction>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if az.is_null() || el.is_null() {
        return fail(NiirfStatus::NullPointer, "direction arrays are null");
    }
    let az = std::slice::from_raw_parts(az, n);
    let el = std::slice::from_raw_parts(el, n);
    az.iter()
        .zip(el)
        .map(|(&a, &e)| Direction::from_degrees(a, e).map_err(Fail::from))
        .collect()
}

unsafe fn out_slice<'a>(out: *mut f64, capacity: usize, needed: usize) -> Result<&'a mut [f64], Fail> {
    if needed == 0 {
        return Ok(&mut []);
    }
    if out.is_null() {
        return fail(NiirfStatus::NullPointer, "output buffer is null");
    }
    if capacity < needed {
        return fail(
            NiirfStatus::BufferTooSmall,
            format!("output needs {needed} elements, capacity is {capacity}"),
        );
    }
    Ok(std::slice::from_raw_parts_mut(out, needed))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn niirf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread (empty after a success). Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn niirf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn niirf_model_load(path: *const c_char, out: *mut *mut NiirfModel) -> NiirfStatus {
    guard(|| {
        if out.is_null() {
            return fail(NiirfStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let ck = Checkpoint::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(NiirfModel { model: ck.model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`niirf_model_load`] and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn niirf_model_free(model: *mut NiirfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Sample rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn niirf_model_sample_rate(model: *const NiirfModel) -> f64 {
    model.as_ref().map_or(0.0, |m| m.model.config().sample_rate)
}

/// One-sided frequency bins per ear (`M/2 + 1`), or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn niirf_model_bins(model: *const NiirfModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.grid().bins())
}

/// Filter sections per ear (`K + 2`); 0 when the model has no IIR head.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn niirf_model_sections(model: *const NiirfModel) -> usize {
    match model.as_ref().map(|m| m.model.config().head) {
        Some(HeadSpec::Iir { peaks }) => peaks + 2,
        _ => 0,
    }
}

fn adapter<'a>(
    m: &'a FieldModel,
    subject: Option<&str>,
) -> Result<Option<&'a niirf::field::SubjectAdapter>, Fail> {
    match subject {
        None => Ok(None),
        Some(s) => m.adapter(s).map(Some).ok_or_else(|| {
            Fail(
                NiirfStatus::InvalidArgument,
                format!("no adapter for subject {s}"),
            )
        }),
    }
}

/// Predicted dB magnitudes: `n` rows of `2 * bins` values (left bins then right bins).
///
/// # Safety
/// `model` must be live; `subject` null (no adapter) or NUL-terminated; `azimuth_deg` and
/// `elevation_deg` must hold `n` values; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn niirf_model_predict_db(
    model: *const NiirfModel,
    subject: *const c_char,
    azimuth_deg: *const f64,
    elevation_deg: *const f64,
    n: usize,
    out: *mut f64,
    capacity: usize,
) -> NiirfStatus {
    guard(|| {
        let m = &handle(model)?.model;
        let dirs = directions(azimuth_deg, elevation_deg, n)?;
        let width = 2 * m.grid().bins();
        let dst = out_slice(out, capacity, n * width)?;
        if n == 0 {
            return Ok(());
        }
        let db = m.predict_db(&dirs, adapter(m, opt_str(subject)?)?)?;
        for (d, s) in dst.iter_mut().zip(db.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Filter parameters and coefficients of an IIR-head model.
///
/// Per direction, per ear (left then right), per section (low shelf, peaks, high shelf):
/// `fc, fb, gain_db, b0, b1, b2, a1, a2`, so `n * 2 * sections * 8` values. `fb` is 0 for
/// shelves, and `b2 = a2 = 0`.
///
/// # Safety
/// Same contract as [`niirf_model_predict_db`].
#[no_mangle]
pub unsafe extern "C" fn niirf_model_filters(
    model: *const NiirfModel,
    subject: *const c_char,
    azimuth_deg: *const f64,
    elevation_deg: *const f64,
    n: usize,
    out: *mut f64,
    capacity: usize,
) -> NiirfStatus {
    guard(|| {
        let m = &handle(model)?.model;
        let HeadSpec::Iir { peaks } = m.config().head else {
            return fail(NiirfStatus::Unsupported, "model does not have an IIR head");
        };
        let dirs = directions(azimuth_deg, elevation_deg, n)?;
        let dst = out_slice(out, capacity, n * 2 * (peaks + 2) * 8)?;
        if n == 0 {
            return Ok(());
        }
        let fs = m.config().sample_rate;
        let mut i = 0;
        for pair in m.cascades(&dirs, adapter(m, opt_str(subject)?)?)? {
            for c in &pair {
                let params = std::iter::once((c.low_shelf.fc, 0.0, c.low_shelf.gain_db))
                    .chain(c.peaks.iter().map(|p| (p.fc, p.fb, p.gain_db)))
                    .chain(std::iter::once((c.high_shelf.fc, 0.0, c.high_shelf.gain_db)));
                for ((fc, fb, g), s) in params.zip(c.sections(fs)?) {
                    dst[i..i + 8].copy_from_slice(&[fc, fb, g, s.b0, s.b1, s.b2, s.a1, s.a2]);
                    i += 8;
                }
            }
        }
        Ok(())
    })
}

/// Loads an HRTF container.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn niirf_container_load(
    path: *const c_char,
    out: *mut *mut NiirfContainer,
) -> NiirfStatus {
    guard(|| {
        if out.is_null() {
            return fail(NiirfStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let sets: BTreeMap<String, HrtfSet> = load_container(path_arg(path)?)?;
        let subjects = sets
            .into_iter()
            .map(|(id, s)| (CString::new(id).unwrap_or_default(), s))
            .collect();
        *out = Box::into_raw(Box::new(NiirfContainer { subjects }));
        Ok(())
    })
}

/// # Safety
/// `container` must come from [`niirf_container_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn niirf_container_free(container: *mut NiirfContainer) {
    if !container.is_null() {
        drop(Box::from_raw(container));
    }
}

/// Number of subjects, or 0 for a null handle.
///
/// # Safety
/// `container` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn niirf_container_subjects(container: *const NiirfContainer) -> usize {
    container.as_ref().map_or(0, |c| c.subjects.len())
}

/// Subject id at `index` (ids are sorted); null when out of range. Owned by the container.
///
/// # Safety
/// `container` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn niirf_container_subject_id(
    container: *const NiirfContainer,
    index: usize,
) -> *const c_char {
    container
        .as_ref()
        .and_then(|c| c.subjects.get(index))
        .map_or(ptr::null(), |(id, _)| id.as_ptr())
}

/// Shape of one subject: measurement count, IR length and sample rate.
///
/// # Safety
/// `container` must be live; the out pointers must be valid or null (skipped).
#[no_mangle]
pub unsafe extern "C" fn niirf_container_subject_info(
    container: *const NiirfContainer,
    index: usize,
    measurements: *mut usize,
    ir_length: *mut usize,
    sample_rate: *mut f64,
) -> NiirfStatus {
    guard(|| {
        let set = subject(handle(container)?, index)?;
        if let Some(p) = measurements.as_mut() {
            *p = set.len();
        }
        if let Some(p) = ir_length.as_mut() {
            *p = set.ir_len();
        }
        if let Some(p) = sample_rate.as_mut() {
            *p = set.sample_rate();
        }
        Ok(())
    })
}

fn subject(c: &NiirfContainer, index: usize) -> Result<&HrtfSet, Fail> {
    c.subjects.get(index).map(|(_, s)| s).ok_or_else(|| {
        Fail(
            NiirfStatus::InvalidArgument,
            format!(
                "subject index {index} out of range ({} subjects)",
                c.subjects.len()
            ),
        )
    })
}

/// Measurement directions in degrees as `azimuth, elevation` pairs (`2 * measurements`).
///
/// # Safety
/// `container` must be live and `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn niirf_container_directions(
    container: *const NiirfContainer,
    index: usize,
    out: *mut f64,
    capacity: usize,
) -> NiirfStatus {
    guard(|| {
        let set = subject(handle(container)?, index)?;
        let dst = out_slice(out, capacity, 2 * set.len())?;
        for (pair, m) in dst.chunks_exact_mut(2).zip(set.measurements()) {
            pair[0] = m.direction.azimuth().to_degrees();
            pair[1] = m.direction.elevation().to_degrees();
        }
        Ok(())
    })
}

/// Impulse responses: per measurement the left IR then the right IR
/// (`2 * measurements * ir_length` values).
///
/// # Safety
/// `container` must be live and `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn niirf_container_impulse_responses(
    container: *const NiirfContainer,
    index: usize,
    out: *mut f64,
    capacity: usize,
) -> NiirfStatus {
    guard(|| {
        let set = subject(handle(container)?, index)?;
        let len = set.ir_len();
        let dst = out_slice(out, capacity, 2 * set.len() * len)?;
        for (chunk, m) in dst.chunks_exact_mut(2 * len).zip(set.measurements()) {
            for (d, s) in chunk.iter_mut().zip(m.left.iter().chain(&m.right)) {
                *d = f64::from(*s);
            }
        }
        Ok(())
    })
}
