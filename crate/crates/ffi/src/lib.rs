// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over `diffconcepts`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every fallible call returns a [`DcStatus`]; on failure a message is
//! available from [`dc_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use diffconcepts::concepts::{self, ExtractionConfig};
use diffconcepts::differences::DEFAULT_SKEW_EPSILON;
use diffconcepts::steering;
use diffconcepts::tensor_io::{self, ActivationMatrix, ConceptDictionary};
use diffconcepts::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    /// Null pointer, non-UTF-8 string or zero-sized buffer.
    InvalidArgument = 1,
    /// Missing path, bad configuration or index out of range.
    InvalidInput = 2,
    /// Malformed file, shape mismatch or unusable data.
    DataError = 3,
    /// Degenerate or non-convergent numerics.
    NumericalError = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

impl From<&Error> for DcStatus {
    fn from(e: &Error) -> Self {
        match e.exit_code() {
            2 => DcStatus::InvalidInput,
            3 => DcStatus::DataError,
            _ => DcStatus::NumericalError,
        }
    }
}

/// Row-major `n × d` float32 matrix.
pub struct DcMatrix {
    inner: ActivationMatrix,
}

/// Unit concept directions with provenance.
pub struct DcDictionary {
    inner: ConceptDictionary,
}

/// Extraction parameters; start from [`dc_extract_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcExtractOptions {
    pub k: usize,
    pub seed: u64,
    pub skew_epsilon: f64,
    /// Enables skewness orientation and weighting.
    pub weighting: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, converting errors and panics into a status and last-error text.
fn guard(f: impl FnOnce() -> Result<(), (DcStatus, String)>) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside diffconcepts".into());
            DcStatus::Panic
        }
    }
}

fn lib(e: Error) -> (DcStatus, String) {
    (DcStatus::from(&e), e.to_string())
}

fn invalid(msg: &str) -> (DcStatus, String) {
    (DcStatus::InvalidArgument, msg.into())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (DcStatus, String)> {
    if p.is_null() {
        return Err(invalid("path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DcStatus, String)> {
    p.as_ref()
        .ok_or_else(|| invalid(&format!("{what} handle is null")))
}

unsafe fn out_slot<T>(p: *mut *mut T) -> Result<(), (DcStatus, String)> {
    if p.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *p = ptr::null_mut();
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy `n × d` floats from `data` into a new matrix.
///
/// # Safety
/// `data` must point to `n * d` readable floats and `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_new(
    data: *const f32,
    n: usize,
    d: usize,
    out: *mut *mut DcMatrix,
) -> DcStatus {
    guard(|| {
        out_slot(out)?;
        if data.is_null() {
            return Err(invalid("data is null"));
        }
        let len = n.checked_mul(d).ok_or_else(|| invalid("n * d overflows"))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let inner = ActivationMatrix::new(n, d, values).map_err(lib)?;
        *out = Box::into_raw(Box::new(DcMatrix { inner }));
        Ok(())
    })
}

/// Load a 2-D float32 `.npy` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_read_npy(
    path: *const c_char,
    out: *mut *mut DcMatrix,
) -> DcStatus {
    guard(|| {
        out_slot(out)?;
        let inner = tensor_io::read_matrix(path_arg(path)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(DcMatrix { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must be a live matrix handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_write_npy(m: *const DcMatrix, path: *const c_char) -> DcStatus {
    guard(|| {
        let m = handle(m, "matrix")?;
        tensor_io::write_matrix(&m.inner, path_arg(path)?).map_err(lib)
    })
}

/// # Safety
/// `m` must be a live matrix handle; `n` and `d` may be null.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_shape(
    m: *const DcMatrix,
    n: *mut usize,
    d: *mut usize,
) -> DcStatus {
    guard(|| {
        let m = handle(m, "matrix")?;
        if let Some(n) = n.as_mut() {
            *n = m.inner.n_samples();
        }
        if let Some(d) = d.as_mut() {
            *d = m.inner.dim();
        }
        Ok(())
    })
}

/// Borrowed pointer to the row-major values, valid while `m` lives.
/// Null when `m` is null.
///
/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_data(m: *const DcMatrix) -> *const f32 {
    m.as_ref()
        .map_or(ptr::null(), |m| m.inner.as_slice().as_ptr())
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_free(m: *mut DcMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub extern "C" fn dc_extract_options_default() -> DcExtractOptions {
    DcExtractOptions {
        k: concepts::DEFAULT_K,
        seed: 0,
        skew_epsilon: DEFAULT_SKEW_EPSILON,
        weighting: true,
    }
}

/// Cluster skewness-weighted pairwise differences of `acts` into a
/// dictionary.
///
/// # Safety
/// `acts` must be a live matrix handle, `opts` null (defaults) or valid, and
/// `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dc_extract(
    acts: *const DcMatrix,
    opts: *const DcExtractOptions,
    out: *mut *mut DcDictionary,
) -> DcStatus {
    guard(|| {
        out_slot(out)?;
        let acts = handle(acts, "matrix")?;
        let o = opts
            .as_ref()
            .copied()
            .unwrap_or_else(|| dc_extract_options_default());
        let cfg = ExtractionConfig {
            k: o.k,
            seed: o.seed,
            skew_epsilon: o.skew_epsilon,
            weighting: o.weighting,
            ..ExtractionConfig::default()
        };
        let inner = concepts::extract(&acts.inner, &cfg).map_err(lib)?;
        *out = Box::into_raw(Box::new(DcDictionary { inner }));
        Ok(())
    })
}

/// Load a dictionary directory (`concepts.npy` plus metadata).
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dc_dictionary_read(
    dir: *const c_char,
    out: *mut *mut DcDictionary,
) -> DcStatus {
    guard(|| {
        out_slot(out)?;
        let inner = tensor_io::read_concepts(path_arg(dir)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(DcDictionary { inner }));
        Ok(())
    })
}

/// # Safety
/// `dict` must be a live dictionary handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_dictionary_write(
    dict: *const DcDictionary,
    dir: *const c_char,
) -> DcStatus {
    guard(|| {
        let dict = handle(dict, "dictionary")?;
        tensor_io::write_concepts(&dict.inner, path_arg(dir)?).map_err(lib)
    })
}

/// # Safety
/// `dict` must be a live dictionary handle; `k` and `d` may be null.
#[no_mangle]
pub unsafe extern "C" fn dc_dictionary_shape(
    dict: *const DcDictionary,
    k: *mut usize,
    d: *mut usize,
) -> DcStatus {
    guard(|| {
        let dict = handle(dict, "dictionary")?;
        if let Some(k) = k.as_mut() {
            *k = dict.inner.k();
        }
        if let Some(d) = d.as_mut() {
            *d = dict.inner.dim();
        }
        Ok(())
    })
}

/// Borrowed pointer to the `k × d` row-major directions, valid while `dict`
/// lives. Null when `dict` is null.
///
/// # Safety
/// `dict` must be null or a live dictionary handle.
#[no_mangle]
pub unsafe extern "C" fn dc_dictionary_directions(dict: *const DcDictionary) -> *const f32 {
    dict.as_ref()
        .map_or(ptr::null(), |d| d.inner.directions().as_slice().as_ptr())
}

/// # Safety
/// `dict` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_dictionary_free(dict: *mut DcDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Concept scores `acts · dictᵀ` as a new `n × k` matrix.
///
/// # Safety
/// `acts` and `dict` must be live handles and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dc_score(
    acts: *const DcMatrix,
    dict: *const DcDictionary,
    out: *mut *mut DcMatrix,
) -> DcStatus {
    guard(|| {
        out_slot(out)?;
        let acts = handle(acts, "matrix")?;
        let dict = handle(dict, "dictionary")?;
        let scores = concepts::score(&acts.inner, &dict.inner).map_err(lib)?;
        *out = Box::into_raw(Box::new(DcMatrix {
            inner: scores.into_matrix(),
        }));
        Ok(())
    })
}

unsafe fn steer_into(
    x: *const f32,
    dim: usize,
    dict: *const DcDictionary,
    concept: usize,
    out: *mut f32,
    alpha: impl FnOnce(&[f32], &[f32]) -> diffconcepts::Result<f64>,
) -> Result<(), (DcStatus, String)> {
    let dict = handle(dict, "dictionary")?;
    if x.is_null() || out.is_null() {
        return Err(invalid("vector pointer is null"));
    }
    if concept >= dict.inner.k() {
        return Err(lib(Error::Index {
            what: "concepts",
            index: concept,
            len: dict.inner.k(),
        }));
    }
    let x = std::slice::from_raw_parts(x, dim);
    let c = dict.inner.direction(concept);
    let a = alpha(x, c).map_err(lib)?;
    let y = steering::steer(x, c, a).map_err(lib)?;
    ptr::copy_nonoverlapping(y.as_ptr(), out, dim);
    Ok(())
}

/// `out = x + alpha · c` for concept `concept`. `out` may alias `x`.
///
/// # Safety
/// `x` must hold `dim` readable floats, `out` `dim` writable floats, and
/// `dict` must be a live dictionary handle.
#[no_mangle]
pub unsafe extern "C" fn dc_steer(
    x: *const f32,
    dim: usize,
    dict: *const DcDictionary,
    concept: usize,
    alpha: f64,
    out: *mut f32,
) -> DcStatus {
    guard(|| steer_into(x, dim, dict, concept, out, |_, _| Ok(alpha)))
}

/// Remove the component of `x` along concept `concept`. `out` may alias `x`.
///
/// # Safety
/// Same contract as [`dc_steer`].
#[no_mangle]
pub unsafe extern "C" fn dc_zero_out(
    x: *const f32,
    dim: usize,
    dict: *const DcDictionary,
    concept: usize,
    out: *mut f32,
) -> DcStatus {
    guard(|| steer_into(x, dim, dict, concept, out, steering::zero_out_alpha))
}
