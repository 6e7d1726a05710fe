//! C ABI for `riempoly`.
//!
//! Every object crosses the boundary as an opaque pointer created by an
//! `rp_*_new` style constructor and released by the matching `rp_*_free`.
//! Functions return an [`RpStatus`]; on failure the message is available from
//! [`rp_last_error_message`] on the same thread. Panics are caught and
//! reported as [`RpStatus::Panic`].
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! documents: handles must come from this library and not be freed yet, and
//! array arguments must hold at least the stated number of values. Handles
//! may be shared across threads for reading but not freed concurrently.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector, Matrix3};
use riempoly::kendall::{self, Kendall};
use riempoly::polyflow::sample_curve;
use riempoly::regress::{fit_polynomial, Descent, FitConfig, FitResult, Observation, TimedDataset};
use riempoly::so3::{MetricSpec, So3};
use riempoly::sphere::Sphere;
use riempoly::{Error, Euclidean, Manifold, ManifoldKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    /// An iterative geometric routine failed (log map, mean, drift, cut locus).
    Numerical = 4,
    /// The requested quantity does not exist, e.g. R² of zero-variance data.
    Undefined = 5,
    Io = 6,
    Panic = 7,
}

/// Geometry handle.
pub struct RpManifold {
    inner: Box<dyn Manifold>,
    /// Landmark layout for Kendall shape space.
    layout: Option<(usize, usize)>,
}

/// Timed observations on a manifold.
pub struct RpDataset {
    data: TimedDataset,
    point_dim: usize,
}

/// A fitted polynomial.
pub struct RpFit {
    result: FitResult,
    time_map: riempoly::regress::TimeMap,
}

/// Optimizer settings for `rp_fit`; start from `rp_fit_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RpFitOptions {
    /// Integration steps per unit time.
    pub steps: usize,
    pub max_iters: usize,
    /// Convergence threshold on the gradient norm.
    pub tol: f64,
    /// Initial line-search step.
    pub step_size: f64,
    /// Nonzero selects conjugate gradient, zero steepest descent.
    pub conjugate_gradient: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RpStatus {
    match err {
        Error::AtTimeIndex { source, .. } | Error::AtObservation { source, .. } => status_of(source),
        Error::DimensionMismatch { .. }
        | Error::NotTangent { .. }
        | Error::NotSkew(_)
        | Error::InvalidMetric(_)
        | Error::Degenerate(_)
        | Error::InvalidArgument(_)
        | Error::Parse { .. } => RpStatus::InvalidArgument,
        Error::ZeroVariance => RpStatus::Undefined,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => RpStatus::Io,
        Error::CutLocus { .. }
        | Error::LogNotConverged { .. }
        | Error::MeanNotConverged { .. }
        | Error::InvariantDrift { .. } => RpStatus::Numerical,
    }
}

struct Failure(RpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: RpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RpStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(RpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len < need {
        return Err(fail(RpStatus::BufferTooSmall, format!("{what} holds {len} values, {need} needed")));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(RpStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(RpStatus::NullPointer, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn new_manifold(out: *mut *mut RpManifold, make: impl FnOnce() -> Result<RpManifold, Failure>) -> RpStatus {
    guard(|| store(out, make()?))
}

/// Flat space ℝ^dim.
#[no_mangle]
pub unsafe extern "C" fn rp_manifold_euclidean(dim: usize, out: *mut *mut RpManifold) -> RpStatus {
    new_manifold(out, || {
        if dim == 0 {
            return Err(fail(RpStatus::InvalidArgument, "dimension must be positive"));
        }
        Ok(RpManifold { inner: Box::new(Euclidean::new(dim)), layout: None })
    })
}

/// Unit sphere S^n embedded in ℝ^(n+1).
#[no_mangle]
pub unsafe extern "C" fn rp_manifold_sphere(n: usize, out: *mut *mut RpManifold) -> RpStatus {
    new_manifold(out, || Ok(RpManifold { inner: Box::new(Sphere::new(n)?), layout: None }))
}

/// SO(3) with the left-invariant metric given by a symmetric positive definite
/// 3×3 inertia matrix (row-major), or the bi-invariant metric when null.
/// Points are row-major rotation matrices; tangents are body angular velocities.
#[no_mangle]
pub unsafe extern "C" fn rp_manifold_so3(inertia: *const f64, out: *mut *mut RpManifold) -> RpStatus {
    new_manifold(out, || {
        let metric = if inertia.is_null() {
            MetricSpec::identity()
        } else {
            MetricSpec::new(Matrix3::from_row_slice(slice(inertia, 9, "inertia")?))?
        };
        Ok(RpManifold { inner: Box::new(So3::new(metric)), layout: None })
    })
}

/// Kendall shape space of `landmarks` points in `dim` dimensions.
#[no_mangle]
pub unsafe extern "C" fn rp_manifold_kendall(landmarks: usize, dim: usize, out: *mut *mut RpManifold) -> RpStatus {
    new_manifold(out, || {
        Ok(RpManifold { inner: Box::new(Kendall::new(landmarks, dim)?), layout: Some((landmarks, dim)) })
    })
}

/// Number of coordinates of a point.
#[no_mangle]
pub unsafe extern "C" fn rp_manifold_point_dim(manifold: *const RpManifold) -> usize {
    manifold.as_ref().map_or(0, |m| m.inner.point_dim())
}

#[no_mangle]
pub unsafe extern "C" fn rp_manifold_free(manifold: *mut RpManifold) {
    if !manifold.is_null() {
        drop(Box::from_raw(manifold));
    }
}

/// Builds a dataset from `n` observations: `times[i]` and the row-major
/// `points[i·point_dim .. (i+1)·point_dim]`. Kendall points are raw landmark
/// configurations (row-major landmarks × dim) and are centered and scaled
/// here; sphere and SO(3) points must already lie on the manifold.
#[no_mangle]
pub unsafe extern "C" fn rp_dataset_new(
    manifold: *const RpManifold,
    times: *const f64,
    points: *const f64,
    n: usize,
    out: *mut *mut RpDataset,
) -> RpStatus {
    guard(|| {
        let m = borrow(manifold, "manifold")?;
        let dim = m.inner.point_dim();
        let times = slice(times, n, "times")?;
        let points = slice(points, n * dim, "points")?;
        let mut obs = Vec::with_capacity(n);
        for (i, (&time, row)) in times.iter().zip(points.chunks_exact(dim)).enumerate() {
            if !time.is_finite() || row.iter().any(|x| !x.is_finite()) {
                return Err(fail(RpStatus::InvalidArgument, format!("observation {i} is not finite")));
            }
            let raw = DVector::from_row_slice(row);
            let point = match (m.inner.kind(), m.layout) {
                (ManifoldKind::Kendall, Some((lm, d))) => {
                    kendall::to_preshape(&DMatrix::from_row_slice(lm, d, row))
                        .map_err(|e| Failure::from(Error::AtObservation { index: i, source: Box::new(e) }))?
                        .coords
                }
                (ManifoldKind::Euclidean, _) => raw,
                _ => {
                    let diag = m.inner.validate_point(&raw);
                    if let Some(w) = diag.worst().filter(|w| w.residual > 1e-6) {
                        return Err(fail(
                            RpStatus::InvalidArgument,
                            format!("observation {i} is off the manifold ({} residual {:.3e})", w.name, w.residual),
                        ));
                    }
                    m.inner.project_point(&raw)
                }
            };
            obs.push(Observation { time, point });
        }
        store(out, RpDataset { data: TimedDataset::from_original(obs)?, point_dim: dim })
    })
}

#[no_mangle]
pub unsafe extern "C" fn rp_dataset_len(dataset: *const RpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.data.len())
}

#[no_mangle]
pub unsafe extern "C" fn rp_dataset_free(dataset: *mut RpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Library defaults for `rp_fit`.
#[no_mangle]
pub extern "C" fn rp_fit_options_default() -> RpFitOptions {
    let cfg = FitConfig::default();
    RpFitOptions {
        steps: cfg.steps,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        step_size: cfg.step_size,
        conjugate_gradient: (cfg.descent == Descent::ConjugateGradient) as i32,
    }
}

/// Fits an order-`order` polynomial, starting from the Fréchet mean.
/// `options` may be null for the defaults. A fit that stops without meeting
/// the tolerance still succeeds; check `rp_fit_converged`.
#[no_mangle]
pub unsafe extern "C" fn rp_fit(
    manifold: *const RpManifold,
    dataset: *const RpDataset,
    order: usize,
    options: *const RpFitOptions,
    out: *mut *mut RpFit,
) -> RpStatus {
    guard(|| {
        let m = borrow(manifold, "manifold")?;
        let d = borrow(dataset, "dataset")?;
        if d.point_dim != m.inner.point_dim() {
            return Err(fail(RpStatus::InvalidArgument, "dataset was built for a different manifold"));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| rp_fit_options_default());
        let cfg = FitConfig {
            order,
            steps: opts.steps,
            max_iters: opts.max_iters,
            tol: opts.tol,
            step_size: opts.step_size,
            descent: if opts.conjugate_gradient != 0 { Descent::ConjugateGradient } else { Descent::Steepest },
            ..FitConfig::default()
        };
        let result = fit_polynomial(m.inner.as_ref(), &d.data, &cfg)?;
        store(out, RpFit { result, time_map: d.data.time_map })
    })
}

/// Coefficient of determination; `RpStatus::Undefined` when the data have
/// zero variance.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_r_squared(fit: *const RpFit, out: *mut f64) -> RpStatus {
    guard(|| {
        let f = borrow(fit, "fit")?;
        if out.is_null() {
            return Err(fail(RpStatus::NullPointer, "out is null"));
        }
        *out = f.result.r_squared.ok_or_else(|| Failure::from(Error::ZeroVariance))?;
        Ok(())
    })
}

/// Mean squared geodesic residual; NaN for a null fit.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_sse(fit: *const RpFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.result.sse)
}

#[no_mangle]
pub unsafe extern "C" fn rp_fit_iterations(fit: *const RpFit) -> usize {
    fit.as_ref().map_or(0, |f| f.result.iterations)
}

/// 1 when the gradient tolerance was met, 0 otherwise.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_converged(fit: *const RpFit) -> i32 {
    fit.as_ref().map_or(0, |f| f.result.converged as i32)
}

#[no_mangle]
pub unsafe extern "C" fn rp_fit_order(fit: *const RpFit) -> usize {
    fit.as_ref().map_or(0, |f| f.result.order)
}

/// Copies the initial point into `gamma` (point_dim values) and the initial
/// velocities, in original time units, into `vels` (order × point_dim values,
/// row-major). Either buffer may be null when its length is zero.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_params(
    fit: *const RpFit,
    gamma: *mut f64,
    gamma_len: usize,
    vels: *mut f64,
    vels_len: usize,
) -> RpStatus {
    guard(|| {
        let f = borrow(fit, "fit")?;
        let p = &f.result.params;
        let dim = p.gamma.len();
        slice_mut(gamma, gamma_len, dim, "gamma")?.copy_from_slice(p.gamma.as_slice());
        let original = f.time_map.velocities_to_original(&p.vels);
        let dst = slice_mut(vels, vels_len, original.len() * dim, "vels")?;
        for (chunk, v) in dst.chunks_exact_mut(dim).zip(&original) {
            chunk.copy_from_slice(v.as_slice());
        }
        Ok(())
    })
}

/// Evaluates the fitted curve at `n` times (original units, within the
/// observed range), writing n × point_dim values row-major into `out`.
#[no_mangle]
pub unsafe extern "C" fn rp_fit_sample(
    fit: *const RpFit,
    times: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> RpStatus {
    guard(|| {
        let f = borrow(fit, "fit")?;
        let internal: Vec<f64> = slice(times, n, "times")?.iter().map(|&t| f.time_map.to_internal(t)).collect();
        let pts = sample_curve(&f.result.trajectory, &internal)?;
        let dim = f.result.params.gamma.len();
        let dst = slice_mut(out, out_len, n * dim, "out")?;
        for (chunk, p) in dst.chunks_exact_mut(dim).zip(&pts) {
            chunk.copy_from_slice(p.as_slice());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rp_fit_free(fit: *mut RpFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
