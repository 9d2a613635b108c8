//! C ABI for `graphlearn`.
//!
//! Conventions:
//! * Every fallible function returns a [`GlStatus`]; results come back
//!   through out-pointers.
//! * Objects are opaque handles created by `gl_*_new` / solver calls and
//!   released with the matching `gl_*_free`. Freeing `NULL` is a no-op.
//! * Matrices are dense, row-major `double` arrays of `p * p` entries.
//! * On failure a description is kept per thread and can be read with
//!   [`gl_last_error_message`]. Panics never cross the boundary; they are
//!   reported as [`GlStatus::Panic`].
//! * A solver that stops before its tolerance still returns its estimate,
//!   together with [`GlStatus::NotConverged`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use graphlearn::graphcore::{log_gdet, spectral_summary};
use graphlearn::nalgebra::DMatrix;
use graphlearn::solvers::{learn_connected_mle, learn_k_component, learn_time_varying, SolveReport, SolverConfig};
use graphlearn::{GraphError, LaplacianMatrix, SimilarityKind, SimilarityMatrix};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    /// A required pointer was NULL.
    NullPointer = 1,
    /// Parameters or data failed validation.
    InvalidArgument = 2,
    /// The solver hit its iteration limit; the estimate is still returned.
    NotConverged = 3,
    /// A caller-provided buffer is too small.
    BufferTooSmall = 4,
    /// Internal failure (a Rust panic was caught).
    Panic = 5,
}

/// How the similarity matrix passed to a solver was formed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlSimilarity {
    Covariance = 0,
    Correlation = 1,
}

/// Solver settings. Create with [`gl_config_new`].
pub struct GlConfig {
    inner: SolverConfig,
}

/// An estimated graph Laplacian plus its solve report.
pub struct GlLaplacian {
    laplacian: LaplacianMatrix,
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(GlStatus, String);

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure(GlStatus::InvalidArgument, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(GlStatus::NullPointer, format!("{name} is NULL"))
}

/// Runs `f`, records any error for [`gl_last_error_message`] and converts
/// panics into [`GlStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<GlStatus, Failure>) -> GlStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {msg}"));
            GlStatus::Panic
        }
    }
}

/// # Safety
/// `data` must point to `p * p` readable doubles.
unsafe fn read_square(data: *const f64, p: usize) -> Result<DMatrix<f64>, Failure> {
    if data.is_null() {
        return Err(null("matrix"));
    }
    let len = p
        .checked_mul(p)
        .ok_or_else(|| Failure(GlStatus::InvalidArgument, "p is too large".into()))?;
    // SAFETY: the caller guarantees `p * p` readable doubles.
    let slice = unsafe { std::slice::from_raw_parts(data, len) };
    Ok(DMatrix::from_row_slice(p, p, slice))
}

fn similarity(m: DMatrix<f64>, kind: GlSimilarity) -> Result<SimilarityMatrix, Failure> {
    let kind = match kind {
        GlSimilarity::Covariance => SimilarityKind::Covariance,
        GlSimilarity::Correlation => SimilarityKind::Correlation,
    };
    Ok(SimilarityMatrix::new(m, kind)?)
}

fn solved(out: *mut *mut GlLaplacian, laplacian: LaplacianMatrix, report: SolveReport) -> GlStatus {
    let status = if report.converged {
        GlStatus::Ok
    } else {
        set_last_error(&format!(
            "solver stopped after {} iterations without converging",
            report.iterations
        ));
        GlStatus::NotConverged
    };
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(GlLaplacian { laplacian, report })) };
    status
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next `gl_*` call on the same thread.
#[no_mangle]
pub extern "C" fn gl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default solver settings.
#[no_mangle]
pub extern "C" fn gl_config_new() -> *mut GlConfig {
    Box::into_raw(Box::new(GlConfig {
        inner: SolverConfig::default(),
    }))
}

/// # Safety
/// `cfg` must be NULL or a handle from [`gl_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gl_config_free(cfg: *mut GlConfig) {
    if !cfg.is_null() {
        // SAFETY: created by `Box::into_raw` in `gl_config_new`.
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
unsafe fn update_config(cfg: *mut GlConfig, f: impl FnOnce(&mut SolverConfig)) -> GlStatus {
    guard(|| {
        // SAFETY: the caller passes a live handle or NULL.
        let cfg = unsafe { cfg.as_mut() }.ok_or_else(|| null("cfg"))?;
        f(&mut cfg.inner);
        Ok(GlStatus::Ok)
    })
}

/// Number of graph components.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_k(cfg: *mut GlConfig, value: usize) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.k = value) }
}

/// Rank-penalty weight of the k-component solver.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_eta(cfg: *mut GlConfig, value: f64) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.eta = value) }
}

/// l1 weight of the MLE.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_alpha(cfg: *mut GlConfig, value: f64) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.alpha = value) }
}

/// Temporal-consistency weight.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_delta(cfg: *mut GlConfig, value: f64) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.delta = value) }
}

/// Windows re-estimated jointly by the time-varying solver.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_memory(cfg: *mut GlConfig, value: usize) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.memory = value) }
}

/// Seed for any randomized step.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_seed(cfg: *mut GlConfig, value: u64) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.seed = value) }
}

/// Outer iteration limit.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_max_outer_iters(cfg: *mut GlConfig, value: usize) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.max_outer_iters = value) }
}

/// Inner (projected-gradient) iteration limit.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_max_inner_iters(cfg: *mut GlConfig, value: usize) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.max_inner_iters = value) }
}

/// Projected-gradient tolerance.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_inner_tol(cfg: *mut GlConfig, value: f64) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.inner_tol = value) }
}

/// Relative change tolerance between outer iterations.
///
/// # Safety
/// `cfg` must be NULL or a live handle from [`gl_config_new`].
#[no_mangle]
pub unsafe extern "C" fn gl_config_set_outer_tol(cfg: *mut GlConfig, value: f64) -> GlStatus {
    // SAFETY: forwarded caller guarantee.
    unsafe { update_config(cfg, |c| c.outer_tol = value) }
}

/// Connected graph by penalized maximum likelihood.
///
/// # Safety
/// `s` must point to `p * p` doubles, `cfg` must be a live config handle
/// and `out` a writable pointer. On success or `NotConverged` `*out` holds a
/// new handle to release with [`gl_laplacian_free`].
#[no_mangle]
pub unsafe extern "C" fn gl_learn_mle(
    s: *const f64,
    p: usize,
    kind: GlSimilarity,
    cfg: *const GlConfig,
    out: *mut *mut GlLaplacian,
) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: the caller passes a live handle or NULL.
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?;
        // SAFETY: forwarded caller guarantee.
        let s = similarity(unsafe { read_square(s, p) }?, kind)?;
        let (l, report) = learn_connected_mle(&s, &cfg.inner)?;
        Ok(solved(out, l, report))
    })
}

/// k-component graph with unit degrees; `k` is taken from the config.
///
/// # Safety
/// Same contract as [`gl_learn_mle`].
#[no_mangle]
pub unsafe extern "C" fn gl_learn_k_component(
    s: *const f64,
    p: usize,
    kind: GlSimilarity,
    cfg: *const GlConfig,
    out: *mut *mut GlLaplacian,
) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: the caller passes a live handle or NULL.
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?;
        // SAFETY: forwarded caller guarantee.
        let s = similarity(unsafe { read_square(s, p) }?, kind)?;
        let (l, report) = learn_k_component(&s, &cfg.inner)?;
        Ok(solved(out, l, report))
    })
}

/// Causal time-varying estimates for `t` windows.
///
/// `s_seq` holds `t` consecutive `p * p` matrices and `counts` the number of
/// observations behind each. `out` must have room for `t` handles; every
/// slot is filled (or all are left NULL on error).
///
/// # Safety
/// `s_seq` must point to `t * p * p` doubles, `counts` to `t` values and
/// `out` to `t` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn gl_learn_time_varying(
    s_seq: *const f64,
    counts: *const usize,
    t: usize,
    p: usize,
    kind: GlSimilarity,
    cfg: *const GlConfig,
    out: *mut *mut GlLaplacian,
) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if s_seq.is_null() {
            return Err(null("s_seq"));
        }
        if counts.is_null() {
            return Err(null("counts"));
        }
        // SAFETY: the caller passes a live handle or NULL.
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(|| null("cfg"))?;
        let stride = p
            .checked_mul(p)
            .ok_or_else(|| Failure(GlStatus::InvalidArgument, "p is too large".into()))?;
        let mut sims = Vec::with_capacity(t);
        for b in 0..t {
            // SAFETY: window `b` lies inside the `t * p * p` caller buffer.
            let m = unsafe { read_square(s_seq.add(b * stride), p) }?;
            sims.push(similarity(m, kind)?);
        }
        // SAFETY: the caller guarantees `t` readable counts.
        let counts = unsafe { std::slice::from_raw_parts(counts, t) };
        let fit = learn_time_varying(&sims, counts, &cfg.inner)?;
        let converged = fit.all_converged();
        for (b, (laplacian, report)) in fit.laplacians.into_iter().zip(fit.reports).enumerate() {
            // SAFETY: the caller provides `t` writable slots.
            unsafe { *out.add(b) = Box::into_raw(Box::new(GlLaplacian { laplacian, report })) };
        }
        if converged {
            Ok(GlStatus::Ok)
        } else {
            set_last_error("at least one window did not converge");
            Ok(GlStatus::NotConverged)
        }
    })
}

/// Wraps a caller-supplied Laplacian (validated) so the spectral queries can
/// be used on it.
///
/// # Safety
/// `data` must point to `p * p` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_laplacian_from_dense(data: *const f64, p: usize, out: *mut *mut GlLaplacian) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller guarantee.
        let m = unsafe { read_square(data, p) }?;
        let laplacian = LaplacianMatrix::try_from_matrix(&m)?;
        // SAFETY: checked non-null above.
        unsafe {
            *out = Box::into_raw(Box::new(GlLaplacian {
                laplacian,
                report: SolveReport::default(),
            }))
        };
        Ok(GlStatus::Ok)
    })
}

/// # Safety
/// `l` must be NULL or a live Laplacian handle.
#[no_mangle]
pub unsafe extern "C" fn gl_laplacian_free(l: *mut GlLaplacian) {
    if !l.is_null() {
        // SAFETY: created by `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(l) });
    }
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `l` must be NULL or a live Laplacian handle.
#[no_mangle]
pub unsafe extern "C" fn gl_laplacian_dim(l: *const GlLaplacian) -> usize {
    // SAFETY: the caller passes a live handle or NULL.
    unsafe { l.as_ref() }.map_or(0, |l| l.laplacian.p())
}

/// Copies the matrix row-major into `buf` (`len >= p * p`).
///
/// # Safety
/// `l` must be a live handle and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gl_laplacian_copy(l: *const GlLaplacian, buf: *mut f64, len: usize) -> GlStatus {
    guard(|| {
        // SAFETY: the caller passes a live handle or NULL.
        let l = unsafe { l.as_ref() }.ok_or_else(|| null("l"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let p = l.laplacian.p();
        if len < p * p {
            return Err(Failure(
                GlStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", p * p),
            ));
        }
        // SAFETY: `buf` has at least `p * p` writable doubles.
        let dst = unsafe { std::slice::from_raw_parts_mut(buf, p * p) };
        let m = l.laplacian.matrix();
        for i in 0..p {
            for j in 0..p {
                dst[i * p + j] = m[(i, j)];
            }
        }
        Ok(GlStatus::Ok)
    })
}

/// Spectral summary under the default zero tolerance. Any out-pointer may
/// be NULL.
///
/// # Safety
/// `l` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_laplacian_spectrum(
    l: *const GlLaplacian,
    algebraic_connectivity: *mut f64,
    spectral_radius: *mut f64,
    nullity: *mut usize,
) -> GlStatus {
    guard(|| {
        // SAFETY: the caller passes a live handle or NULL.
        let l = unsafe { l.as_ref() }.ok_or_else(|| null("l"))?;
        let s = spectral_summary(&l.laplacian, None);
        // SAFETY: each pointer is NULL or writable.
        unsafe {
            if let Some(v) = algebraic_connectivity.as_mut() {
                *v = s.algebraic_connectivity;
            }
            if let Some(v) = spectral_radius.as_mut() {
                *v = s.spectral_radius;
            }
            if let Some(v) = nullity.as_mut() {
                *v = s.nullity;
            }
        }
        Ok(GlStatus::Ok)
    })
}

/// Log pseudo-determinant; `InvalidArgument` for a disconnected graph.
///
/// # Safety
/// `l` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gl_laplacian_log_gdet(l: *const GlLaplacian, out: *mut f64) -> GlStatus {
    guard(|| {
        // SAFETY: the caller passes a live handle or NULL.
        let l = unsafe { l.as_ref() }.ok_or_else(|| null("l"))?;
        // SAFETY: the caller passes a writable pointer or NULL.
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = log_gdet(&l.laplacian)?;
        Ok(GlStatus::Ok)
    })
}

/// Solve statistics. Any out-pointer may be NULL. `objective` is NaN for
/// matrices not produced by a solver.
///
/// # Safety
/// `l` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gl_laplacian_report(
    l: *const GlLaplacian,
    converged: *mut bool,
    iterations: *mut usize,
    objective: *mut f64,
) -> GlStatus {
    guard(|| {
        // SAFETY: the caller passes a live handle or NULL.
        let l = unsafe { l.as_ref() }.ok_or_else(|| null("l"))?;
        // SAFETY: each pointer is NULL or writable.
        unsafe {
            if let Some(v) = converged.as_mut() {
                *v = l.report.converged;
            }
            if let Some(v) = iterations.as_mut() {
                *v = l.report.iterations;
            }
            if let Some(v) = objective.as_mut() {
                *v = l.report.final_objective().unwrap_or(f64::NAN);
            }
        }
        Ok(GlStatus::Ok)
    })
}
