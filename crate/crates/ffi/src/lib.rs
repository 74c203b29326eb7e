//! C ABI over `conelab`.
//!
//! Every fallible call returns a [`ConelabStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`conelab_last_error_message`]. Objects are opaque handles
//! created by `*_new` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use conelab::experiments::singular_mesh;
use conelab::exponents::{weight_windows, CriticalExponents};
use conelab::geometry::{ConeDomain, ConePoint};
use conelab::greens_wedge::WedgeHeatKernel;
use conelab::lemma_oracles::{lemma31_scaled, lemma32r_ratio, lemma32s_ratio, LemmaParams};
use conelab::solver::{estimate_ratio, SingularSolution, TimeProfile};
use conelab::weighted_norms::WeightParams;
use conelab::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConelabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DomainMembership = 3,
    Precondition = 4,
    Divergent = 5,
    NumericalFailure = 6,
    Unsupported = 7,
    Other = 8,
    Panic = 9,
}

impl From<&Error> for ConelabStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Shape(_) | Error::Degenerate(_) => {
                ConelabStatus::InvalidParameter
            }
            Error::DomainMembership(_) | Error::ChartDomain(_) => ConelabStatus::DomainMembership,
            Error::Precondition(_) => ConelabStatus::Precondition,
            Error::Divergent(_) => ConelabStatus::Divergent,
            Error::NumericalFailure(_) | Error::Coverage(_) | Error::UnderflowGuard(_) | Error::SingularInput(_) => {
                ConelabStatus::NumericalFailure
            }
            Error::Capability(_) => ConelabStatus::Unsupported,
            _ => ConelabStatus::Other,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, storing its value in `out` and translating errors and panics.
fn guard<T>(out: *mut T, f: impl FnOnce() -> conelab::Result<T>) -> ConelabStatus {
    if out.is_null() {
        set_error("output pointer is null".into());
        return ConelabStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            unsafe { out.write(v) };
            ConelabStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            ConelabStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            ConelabStatus::Panic
        }
    }
}

fn handle<'a, T>(h: *const T) -> conelab::Result<&'a T> {
    unsafe { h.as_ref() }.ok_or_else(|| Error::InvalidParameter("null handle".into()))
}

/// Length in bytes of the last error message on this thread, without the
/// terminating nul. Zero when there is none.
#[no_mangle]
pub extern "C" fn conelab_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (nul-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written before the nul.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn conelab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn conelab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Critical exponents of the Laplacian on a cone.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConelabExponents {
    pub dimension: usize,
    pub eigenvalue: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

/// Open intervals of admissible weight exponents.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConelabWindow {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub big_theta_lo: f64,
    pub big_theta_hi: f64,
}

fn exponents_of(domain: conelab::Result<ConeDomain>) -> conelab::Result<CriticalExponents> {
    CriticalExponents::laplacian(&domain?)
}

fn pack(e: &CriticalExponents) -> ConelabExponents {
    ConelabExponents { dimension: e.d, eigenvalue: e.eigenvalue, lambda_plus: e.lambda_plus, lambda_minus: e.lambda_minus }
}

/// Exponents of the planar wedge with opening `kappa` in `(0, 2 pi)`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn conelab_wedge_exponents(kappa: f64, out: *mut ConelabExponents) -> ConelabStatus {
    guard(out, || Ok(pack(&exponents_of(ConeDomain::wedge(kappa))?)))
}

/// Exponents of the circular cone in three dimensions with polar half-angle
/// `alpha` in `(0, pi)`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn conelab_cap_exponents(alpha: f64, out: *mut ConelabExponents) -> ConelabStatus {
    guard(out, || Ok(pack(&exponents_of(ConeDomain::cap(alpha))?)))
}

/// Weight windows for the wedge with opening `kappa` and integrability `p`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn conelab_wedge_window(kappa: f64, p: f64, out: *mut ConelabWindow) -> ConelabStatus {
    guard(out, || {
        let w = weight_windows(p, &exponents_of(ConeDomain::wedge(kappa))?)?;
        Ok(ConelabWindow {
            theta_lo: w.theta_lo,
            theta_hi: w.theta_hi,
            big_theta_lo: w.big_theta_lo,
            big_theta_hi: w.big_theta_hi,
        })
    })
}

/// Opaque Dirichlet heat kernel of a wedge.
pub struct ConelabKernel(WedgeHeatKernel);

/// Creates a heat kernel for the wedge with opening `kappa`.
///
/// # Safety
/// `out` must be null or valid for writes. Release with
/// [`conelab_kernel_free`].
#[no_mangle]
pub unsafe extern "C" fn conelab_kernel_new(kappa: f64, out: *mut *mut ConelabKernel) -> ConelabStatus {
    guard(out, || Ok(Box::into_raw(Box::new(ConelabKernel(WedgeHeatKernel::new(kappa)?)))))
}

/// Kernel value at time `t` between the polar points `(x_r, x_eta)` and
/// `(y_r, y_eta)`, angles measured from the bisector.
///
/// # Safety
/// `kernel` must come from [`conelab_kernel_new`]; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn conelab_kernel_eval(
    kernel: *const ConelabKernel,
    t: f64,
    x_r: f64,
    x_eta: f64,
    y_r: f64,
    y_eta: f64,
    out: *mut f64,
) -> ConelabStatus {
    guard(out, || handle(kernel)?.0.eval(t, &ConePoint::polar(x_r, x_eta), &ConePoint::polar(y_r, y_eta)))
}

/// # Safety
/// `kernel` must be null or come from [`conelab_kernel_new`], and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn conelab_kernel_free(kernel: *mut ConelabKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Opaque exponent set for the weighted integral oracles.
pub struct ConelabIntegralParams(LemmaParams);

/// # Safety
/// `out` must be null or valid for writes. Release with
/// [`conelab_integral_params_free`].
#[no_mangle]
pub unsafe extern "C" fn conelab_integral_params_new(
    alpha: f64,
    beta: f64,
    gamma: f64,
    omega: f64,
    sigma: f64,
    out: *mut *mut ConelabIntegralParams,
) -> ConelabStatus {
    guard(out, || {
        let p = LemmaParams::new(alpha, beta, gamma, omega, sigma)?;
        Ok(Box::into_raw(Box::new(ConelabIntegralParams(p))))
    })
}

/// Scaled one-dimensional time integral for `a >= b > 0`.
///
/// # Safety
/// `params` must come from [`conelab_integral_params_new`]; `out` must be
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn conelab_time_integral(
    params: *const ConelabIntegralParams,
    a: f64,
    b: f64,
    out: *mut f64,
) -> ConelabStatus {
    guard(out, || lemma31_scaled(&handle(params)?.0, a, b))
}

/// Gaussian-weighted plane integral divided by its weight at `(x1, x2)`.
///
/// # Safety
/// As for [`conelab_time_integral`].
#[no_mangle]
pub unsafe extern "C" fn conelab_plane_ratio(
    params: *const ConelabIntegralParams,
    x1: f64,
    x2: f64,
    out: *mut f64,
) -> ConelabStatus {
    guard(out, || lemma32r_ratio(&handle(params)?.0, [x1, x2]))
}

/// Boundary-weighted wedge integral divided by its weight at `(x1, x2)`.
///
/// # Safety
/// As for [`conelab_time_integral`].
#[no_mangle]
pub unsafe extern "C" fn conelab_wedge_ratio(
    params: *const ConelabIntegralParams,
    kappa: f64,
    x1: f64,
    x2: f64,
    out: *mut f64,
) -> ConelabStatus {
    guard(out, || lemma32s_ratio(&handle(params)?.0, kappa, [x1, x2]))
}

/// # Safety
/// `params` must be null or come from [`conelab_integral_params_new`], and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn conelab_integral_params_free(params: *mut ConelabIntegralParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Estimate ratio of the vertex-singular solution on the wedge, sampled on
/// the log-polar mesh at refinement `level` over `[0, 1]`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn conelab_singular_estimate_ratio(
    kappa: f64,
    p: f64,
    theta: f64,
    big_theta: f64,
    level: u32,
    out: *mut f64,
) -> ConelabStatus {
    guard(out, || {
        let w = WeightParams::new(p, theta, big_theta, 0)?;
        let mesh = singular_mesh(kappa, 1e-3, 2.5, level)?;
        let times: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let m = SingularSolution::new(kappa, TimeProfile::Linear)?.sample(&mesh, &times)?;
        estimate_ratio(&m.u, &m.u_t, &m.f, &w)
    })
}
