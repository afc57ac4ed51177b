//! C ABI over `varexp`.
//!
//! Every entry point returns a [`VarexpStatus`] and writes its result through
//! an out-pointer. On a non-`Ok` status the thread-local message returned by
//! [`varexp_last_error`] describes the failure. Panics are caught at the
//! boundary and reported as [`VarexpStatus::Panic`].
//!
//! Models and estimators are opaque handles owned by the caller and released
//! with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use varexp::cutoffs::CutoffKind;
use varexp::estimators::CustomEstimator;
use varexp::montecarlo::EmpiricalCutoffOptions;
use varexp::{AlphaLoss, Error, Estimator, Model, ParameterSpace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarexpStatus {
    Ok = 0,
    Domain = 1,
    Solver = 2,
    Quadrature = 3,
    Inapplicable = 4,
    EpsilonZero = 5,
    Degenerate = 6,
    NullPointer = 7,
    Panic = 8,
}

impl From<&Error> for VarexpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => VarexpStatus::Domain,
            Error::Solver(_) => VarexpStatus::Solver,
            Error::Quadrature { .. } => VarexpStatus::Quadrature,
            Error::Inapplicable(_) => VarexpStatus::Inapplicable,
            Error::EpsilonIndistinguishableFromZero { .. } => VarexpStatus::EpsilonZero,
            Error::Degenerate(_) => VarexpStatus::Degenerate,
        }
    }
}

/// Method tag of a [`VarexpCutoff`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarexpCutoffKind {
    Affine = 0,
    Truncated = 1,
    General = 2,
    GeneralLowerBound = 3,
    KlExact = 4,
}

impl From<CutoffKind> for VarexpCutoffKind {
    fn from(k: CutoffKind) -> Self {
        match k {
            CutoffKind::Affine => VarexpCutoffKind::Affine,
            CutoffKind::Truncated => VarexpCutoffKind::Truncated,
            CutoffKind::General => VarexpCutoffKind::General,
            CutoffKind::GeneralLowerBound => VarexpCutoffKind::GeneralLowerBound,
            CutoffKind::KlExact => VarexpCutoffKind::KlExact,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VarexpCutoff {
    pub c_star: f64,
    pub c2_star: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub residual: f64,
    pub method: VarexpCutoffKind,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VarexpRiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VarexpEpsilon {
    pub value: f64,
    pub stderr_at_min: f64,
    /// `‖θ‖` of the minimizing grid point.
    pub arg_theta_norm: f64,
    pub tail_value: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VarexpEmpiricalCutoff {
    pub k_star: f64,
    pub capped: bool,
    pub argmax_theta_norm: f64,
    pub evaluations: u64,
}

/// Opaque observation model.
pub struct VarexpModel(Model);

/// Opaque point estimator.
pub struct VarexpEstimator(Estimator);

/// Estimator callback: writes `θ̂(x)` (length `d`) into `out`.
///
/// Monte Carlo routines call it concurrently from several threads.
pub type VarexpEstimatorFn = extern "C" fn(x: *const f64, out: *mut f64, d: usize, user_data: *mut c_void);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|b| *b != 0);
    let msg = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> VarexpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            VarexpStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            VarexpStatus::from(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            VarexpStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            VarexpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Outcome {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Row-major `npoints × d` buffer as a list of points.
unsafe fn points(p: *const f64, npoints: usize, d: usize) -> Result<Vec<Vec<f64>>, Failure> {
    Ok(slice(p, npoints * d, "grid")?.chunks(d).map(<[f64]>::to_vec).collect())
}

fn cutoff_out(r: varexp::CutoffResult) -> VarexpCutoff {
    VarexpCutoff {
        c_star: r.c_star,
        c2_star: r.c2_star,
        bracket_lo: r.bracket.0,
        bracket_hi: r.bracket.1,
        residual: r.residual,
        method: r.method.into(),
    }
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn varexp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn varexp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn varexp_model_new(
    d: usize,
    sigma_x2: f64,
    sigma_y2: f64,
    out: *mut *mut VarexpModel,
) -> VarexpStatus {
    guard(|| {
        let model = Model::new(d, sigma_x2, sigma_y2)?;
        write(out, Box::into_raw(Box::new(VarexpModel(model))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from [`varexp_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn varexp_model_free(model: *mut VarexpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parses an estimator name such as `identity`, `affine:0.75`, `truncated`,
/// `js` or `jsplus`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_estimator_parse(spec: *const c_char, out: *mut *mut VarexpEstimator) -> VarexpStatus {
    guard(|| {
        if spec.is_null() {
            return Err(Failure::Null("spec"));
        }
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Error::Domain("estimator name is not valid UTF-8".into()))?;
        let est: Estimator = text.parse()?;
        write(out, Box::into_raw(Box::new(VarexpEstimator(est))), "out")
    })
}

struct UserData(*mut c_void);

// The caller promises the callback and its data are safe to use from any
// thread; see `varexp_estimator_custom`.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

/// Wraps a host callback as an estimator. `equivariant` declares
/// `θ̂(Qx) = Qθ̂(x)` for orthogonal `Q`, which permits radial search grids;
/// otherwise pass explicit grids.
///
/// # Safety
/// `callback` must be callable concurrently from multiple threads with
/// `user_data`, and `user_data` must outlive the returned handle. `name` may
/// be null.
#[no_mangle]
pub unsafe extern "C" fn varexp_estimator_custom(
    name: *const c_char,
    equivariant: bool,
    callback: Option<extern "C" fn(x: *const f64, out: *mut f64, d: usize, user_data: *mut c_void)>,
    user_data: *mut c_void,
    out: *mut *mut VarexpEstimator,
) -> VarexpStatus {
    guard(|| {
        let callback = callback.ok_or(Failure::Null("callback"))?;
        let name = if name.is_null() {
            "custom".to_string()
        } else {
            CStr::from_ptr(name).to_string_lossy().into_owned()
        };
        let data = UserData(user_data);
        let est = CustomEstimator::new(name, equivariant, move |x: &[f64], theta_hat: &mut [f64]| {
            let data = &data;
            callback(x.as_ptr(), theta_hat.as_mut_ptr(), x.len(), data.0)
        });
        write(out, Box::into_raw(Box::new(VarexpEstimator(Estimator::Custom(est)))), "out")
    })
}

/// # Safety
/// `est` must be null or a live estimator handle.
#[no_mangle]
pub unsafe extern "C" fn varexp_estimator_free(est: *mut VarexpEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// `h_α(z)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_h_alpha(z: f64, alpha: f64, out: *mut f64) -> VarexpStatus {
    guard(|| write(out, varexp::h_alpha(z, AlphaLoss::new(alpha)?)?, "out"))
}

/// Loss of `N_d(θ̂, c²σ_Y² I)` for the density of `N_d(θ, σ_Y² I)`;
/// `alpha = -1` gives Kullback-Leibler.
///
/// # Safety
/// `theta_hat` and `theta` must point to `d` doubles, `d` being the model
/// dimension.
#[no_mangle]
pub unsafe extern "C" fn varexp_loss(
    model: *const VarexpModel,
    theta_hat: *const f64,
    theta: *const f64,
    c: f64,
    alpha: f64,
    out: *mut f64,
) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let th = slice(theta_hat, m.d(), "theta_hat")?;
        let t = slice(theta, m.d(), "theta")?;
        let loss = AlphaLoss::new(alpha)?;
        let v = if loss.is_kl() { varexp::loss_kl(m, th, t, c)? } else { varexp::loss_closed(m, th, t, c, loss)? };
        write(out, v, "out")
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_risk_identity(model: *const VarexpModel, c: f64, alpha: f64, out: *mut f64) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        write(out, varexp::risk_identity(m, c, AlphaLoss::new(alpha)?)?, "out")
    })
}

/// Risk of `N_d(X, σ_Y² I)` relative to the best expansion of `X`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_risk_ratio_identity(model: *const VarexpModel, alpha: f64, out: *mut f64) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        write(out, varexp::risk_ratio_identity(m, AlphaLoss::new(alpha)?)?, "out")
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_risk_affine(
    model: *const VarexpModel,
    a: f64,
    norm_theta: f64,
    c: f64,
    alpha: f64,
    out: *mut f64,
) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        write(out, varexp::risk_affine(m, a, norm_theta, c, AlphaLoss::new(alpha)?)?, "out")
    })
}

/// Risk of `max(X, 0)` in one dimension.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_risk_truncated(
    model: *const VarexpModel,
    theta: f64,
    c: f64,
    alpha: f64,
    out: *mut f64,
) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        write(out, varexp::risk_truncated(m, theta, c, AlphaLoss::new(alpha)?)?, "out")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_cutoff_affine(a: f64, r: f64, alpha: f64, out: *mut VarexpCutoff) -> VarexpStatus {
    guard(|| write(out, cutoff_out(varexp::cutoff_affine(a, r, AlphaLoss::new(alpha)?)?), "out"))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_cutoff_truncated(r: f64, alpha: f64, out: *mut VarexpCutoff) -> VarexpStatus {
    guard(|| write(out, cutoff_out(varexp::cutoff_truncated(r, AlphaLoss::new(alpha)?)?), "out"))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_cutoff_general(d: usize, alpha: f64, epsilon: f64, out: *mut VarexpCutoff) -> VarexpStatus {
    guard(|| write(out, cutoff_out(varexp::cutoff_general(d, AlphaLoss::new(alpha)?, epsilon)?), "out"))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_cutoff_general_lower_bound(
    d: usize,
    alpha: f64,
    b0: f64,
    b1: f64,
    b2: f64,
    out: *mut VarexpCutoff,
) -> VarexpStatus {
    guard(|| {
        let r = varexp::cutoff_general_lower_bound(d, AlphaLoss::new(alpha)?, b0, b1, b2)?;
        write(out, cutoff_out(r), "out")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_cutoff_kl_exact(r_bar: f64, out: *mut VarexpCutoff) -> VarexpStatus {
    guard(|| write(out, cutoff_out(varexp::cutoff_kl_exact(r_bar)?), "out"))
}

/// Monte Carlo risk at `theta` (length `d`).
///
/// # Safety
/// Handles must be live, `theta` must point to `d` doubles and `out` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_mc_risk(
    model: *const VarexpModel,
    est: *const VarexpEstimator,
    c: f64,
    alpha: f64,
    theta: *const f64,
    n: usize,
    seed: u64,
    out: *mut VarexpRiskEstimate,
) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let e = &deref(est, "estimator")?.0;
        let t = slice(theta, m.d(), "theta")?;
        let r = varexp::mc_risk(m, e, c, AlphaLoss::new(alpha)?, t, n, seed)?;
        write(out, VarexpRiskEstimate { mean: r.mean, stderr: r.stderr, n: r.n as u64, seed: r.seed }, "out")
    })
}

unsafe fn epsilon_with_space(
    model: *const VarexpModel,
    est: *const VarexpEstimator,
    space: impl FnOnce(&Model) -> Result<ParameterSpace, Failure>,
    alpha: f64,
    n: usize,
    seed: u64,
    out: *mut VarexpEpsilon,
) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let e = &deref(est, "estimator")?.0;
        let space = space(m)?;
        let eps = varexp::mc_epsilon(m, e, &space, AlphaLoss::new(alpha)?, n, seed)?;
        let arg = eps.arg_theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        write(
            out,
            VarexpEpsilon { value: eps.value, stderr_at_min: eps.stderr_at_min, arg_theta_norm: arg, tail_value: eps.tail_value },
            "out",
        )
    })
}

/// `ε` over `ℝ^d`, searched radially on `‖θ‖ ∈ [0, max_radius]` with
/// `points` initial grid points. Needs an orthogonally equivariant estimator
/// when `d > 1`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_mc_epsilon(
    model: *const VarexpModel,
    est: *const VarexpEstimator,
    alpha: f64,
    max_radius: f64,
    points: usize,
    n: usize,
    seed: u64,
    out: *mut VarexpEpsilon,
) -> VarexpStatus {
    epsilon_with_space(model, est, |_| Ok(ParameterSpace::Full { max_radius, points }), alpha, n, seed, out)
}

/// `ε` over an explicit grid of `npoints` points stored row-major.
///
/// # Safety
/// Handles must be live, `grid` must hold `npoints * d` doubles and `out`
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_mc_epsilon_grid(
    model: *const VarexpModel,
    est: *const VarexpEstimator,
    alpha: f64,
    grid: *const f64,
    npoints: usize,
    n: usize,
    seed: u64,
    out: *mut VarexpEpsilon,
) -> VarexpStatus {
    epsilon_with_space(
        model,
        est,
        |m| Ok(ParameterSpace::Explicit { points: points(grid, npoints, m.d())? }),
        alpha,
        n,
        seed,
        out,
    )
}

/// Empirical threshold in `c²` over an explicit grid of `npoints` points
/// stored row-major. `cap <= 0` selects the default cap.
///
/// # Safety
/// Handles must be live, `grid` must hold `npoints * d` doubles and `out`
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn varexp_empirical_cutoff(
    model: *const VarexpModel,
    est: *const VarexpEstimator,
    alpha: f64,
    grid: *const f64,
    npoints: usize,
    n: usize,
    cap: f64,
    seed: u64,
    out: *mut VarexpEmpiricalCutoff,
) -> VarexpStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let e = &deref(est, "estimator")?.0;
        let grid = points(grid, npoints, m.d())?;
        let mut opts = EmpiricalCutoffOptions { n, ..Default::default() };
        if cap > 0.0 {
            opts.cap = cap;
        }
        let r = varexp::empirical_cutoff(m, e, AlphaLoss::new(alpha)?, &grid, seed, opts)?;
        write(
            out,
            VarexpEmpiricalCutoff {
                k_star: r.k_star,
                capped: r.capped,
                argmax_theta_norm: r.argmax_theta_norm,
                evaluations: r.evaluations as u64,
            },
            "out",
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn errors_map_to_distinct_codes() {
        let codes = [
            VarexpStatus::from(&Error::Domain(String::new())),
            VarexpStatus::from(&Error::Solver(String::new())),
            VarexpStatus::from(&Error::Quadrature { achieved: 1.0, requested: 0.1 }),
            VarexpStatus::from(&Error::Inapplicable(String::new())),
            VarexpStatus::from(&Error::EpsilonIndistinguishableFromZero { value: 0.0, stderr: 1.0 }),
            VarexpStatus::from(&Error::Degenerate(String::new())),
        ];
        for (i, a) in codes.iter().enumerate() {
            assert_ne!(*a, VarexpStatus::Ok);
            assert!(codes[i + 1..].iter().all(|b| b != a));
        }
    }

    #[test]
    fn panics_are_contained() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, VarexpStatus::Panic);
        let msg = unsafe { CStr::from_ptr(varexp_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "panic: boom");
    }

    #[test]
    fn interior_nul_is_dropped_from_messages() {
        set_last_error("a\0b");
        let msg = unsafe { CStr::from_ptr(varexp_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "ab");
    }

    #[test]
    fn empty_grid_pointer_is_accepted_when_empty() {
        assert!(unsafe { slice(ptr::null(), 0, "x") }.unwrap().is_empty());
        assert!(matches!(unsafe { slice(ptr::null(), 1, "x") }, Err(Failure::Null("x"))));
    }
}
