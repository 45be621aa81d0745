//! C ABI over the fbmlab core.
//!
//! Every fallible call returns an [`FbmStatus`] and writes results through out
//! pointers. On failure the message is kept per thread and read back with
//! [`fbm_last_error`]. Handles are opaque and must be released with their `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fbmlab::approx::exact_l2_difference;
use fbmlab::gauss::{build_covariance, CovarianceSpec};
use fbmlab::kernel::{cell_integral, cross_covariance_quadrature, eval_kernel, KernelSpec};
use fbmlab::rate::{rate_ball_inf, rate_exceedance_inf, rate_fd};
use fbmlab::rng::SeededStream;
use fbmlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbmStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    DimensionMismatch = 3,
    Quadrature = 4,
    NotPositiveDefinite = 5,
    Infeasible = 6,
    Internal = 7,
    Panic = 8,
}

/// Kernel K(t, s) for a fixed Hurst parameter.
pub struct FbmKernel {
    spec: KernelSpec,
}

/// fBM covariance on a time grid with its Cholesky factor.
pub struct FbmCovariance {
    cov: CovarianceSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FbmStatus {
    match e {
        Error::Domain(_) | Error::Usage(_) => FbmStatus::Domain,
        Error::DimensionMismatch { .. } => FbmStatus::DimensionMismatch,
        Error::Quadrature { .. } => FbmStatus::Quadrature,
        Error::NotPositiveDefinite { .. } => FbmStatus::NotPositiveDefinite,
        Error::Infeasible(_) => FbmStatus::Infeasible,
        _ => FbmStatus::Internal,
    }
}

struct Null(&'static str);

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<Null> for Failure {
    fn from(n: Null) -> Self {
        Failure::Null(n.0)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FbmStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FbmStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FbmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Null> {
    p.as_ref().ok_or(Null(what))
}

unsafe fn write<T>(p: *mut T, what: &'static str, v: T) -> Result<(), Null> {
    if p.is_null() {
        return Err(Null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Null> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fbm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fbm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fbm_kernel_new(hurst: f64, out: *mut *mut FbmKernel) -> FbmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Null("out").into());
        }
        let spec = KernelSpec::new(hurst)?;
        out.write(Box::into_raw(Box::new(FbmKernel { spec })));
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from [`fbm_kernel_new`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fbm_kernel_free(kernel: *mut FbmKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// K(t, s).
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_kernel_eval(kernel: *const FbmKernel, t: f64, s: f64, out: *mut f64) -> FbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        write(out, "out", eval_kernel(&k.spec, t, s)?)?;
        Ok(())
    })
}

/// ∫_a^b K(t, r) dr.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_kernel_cell_integral(
    kernel: *const FbmKernel,
    t: f64,
    a: f64,
    b: f64,
    out: *mut f64,
) -> FbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        write(out, "out", cell_integral(&k.spec, t, a, b)?)?;
        Ok(())
    })
}

/// ∫_0^s K(t, u) K(s, u) du for 0 < s <= t.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_kernel_cross_covariance(
    kernel: *const FbmKernel,
    s: f64,
    t: f64,
    out: *mut f64,
) -> FbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        write(out, "out", cross_covariance_quadrature(&k.spec, s, t)?)?;
        Ok(())
    })
}

/// E|B_t^(m+1) - B_t^(m)|².
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_exact_l2_difference(kernel: *const FbmKernel, t: f64, m: u32, out: *mut f64) -> FbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        write(out, "out", exact_l2_difference(&k.spec, t, m)?)?;
        Ok(())
    })
}

/// Covariance of fBM at `n` strictly increasing times in (0, 1].
///
/// # Safety
/// `times` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_covariance_new(
    hurst: f64,
    times: *const f64,
    n: usize,
    out: *mut *mut FbmCovariance,
) -> FbmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Null("out").into());
        }
        let cov = build_covariance(hurst, slice(times, n, "times")?)?;
        out.write(Box::into_raw(Box::new(FbmCovariance { cov })));
        Ok(())
    })
}

/// # Safety
/// `cov` must come from [`fbm_covariance_new`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fbm_covariance_free(cov: *mut FbmCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// # Safety
/// `cov` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_covariance_dim(cov: *const FbmCovariance, out: *mut usize) -> FbmStatus {
    guard(|| {
        let c = deref(cov, "cov")?;
        write(out, "out", c.cov.dim())?;
        Ok(())
    })
}

/// Writes `n_draws` draws, one after another, into `out` (length `out_len`, at least
/// `n_draws * dim`). The same (seed, stream) pair always gives the same draws.
///
/// # Safety
/// `cov` must be a live handle and `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fbm_covariance_sample(
    cov: *const FbmCovariance,
    seed: u64,
    stream: u64,
    n_draws: usize,
    out: *mut f64,
    out_len: usize,
) -> FbmStatus {
    guard(|| {
        let c = deref(cov, "cov")?;
        let d = c.cov.dim();
        let need = n_draws.checked_mul(d).ok_or_else(|| Error::Usage("n_draws * dim overflows".into()))?;
        if out_len < need {
            return Err(Error::DimensionMismatch { expected: need, got: out_len }.into());
        }
        if need == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(Null("out").into());
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        let mut rng = SeededStream::new(seed, stream).rng();
        for chunk in dst.chunks_exact_mut(d) {
            chunk.copy_from_slice(&c.cov.sample(&mut rng));
        }
        Ok(())
    })
}

/// ½ xᵀ Σ⁻¹ x.
///
/// # Safety
/// `x` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_rate_fd(cov: *const FbmCovariance, x: *const f64, n: usize, out: *mut f64) -> FbmStatus {
    guard(|| {
        let c = deref(cov, "cov")?;
        write(out, "out", rate_fd(&c.cov, slice(x, n, "x")?)?)?;
        Ok(())
    })
}

/// ½((|center|_Σ - radius)⁺)².
///
/// # Safety
/// `center` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_rate_ball_inf(
    cov: *const FbmCovariance,
    center: *const f64,
    n: usize,
    radius: f64,
    out: *mut f64,
) -> FbmStatus {
    guard(|| {
        let c = deref(cov, "cov")?;
        write(out, "out", rate_ball_inf(&c.cov, slice(center, n, "center")?, radius)?)?;
        Ok(())
    })
}

/// Infimum of the rate over {max_k x_k >= a}, or {max_k |x_k| >= a} when
/// `one_sided` is false.
///
/// # Safety
/// `cov` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbm_rate_exceedance_inf(
    cov: *const FbmCovariance,
    a: f64,
    one_sided: bool,
    out: *mut f64,
) -> FbmStatus {
    guard(|| {
        let c = deref(cov, "cov")?;
        write(out, "out", rate_exceedance_inf(&c.cov, a, one_sided)?.value)?;
        Ok(())
    })
}
