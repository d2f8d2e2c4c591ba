//! C ABI over `lft_recover`.
//!
//! Plants and interpolation specs live behind opaque handles created by the
//! `*_from_json`, `*_load` and `*_example` constructors and released with the
//! matching `*_free`. Every entry point returns an [`LftrStatus`]; on failure a
//! message is kept per thread and read back with [`lftr_last_error_message`].
//! Matrices cross the boundary as column-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lft_recover::experiment::ExampleSetup;
use lft_recover::recoverability::{check_recoverability_sampled, SamplingPlan, Verdict};
use lft_recover::recovery::{build_problem, recover, RecoveryConfig};
use lft_recover::robustness::check_robustness;
use lft_recover::{compute_rtim, io, Error, InterpSpec, LftPlant, Mat, Rtim, Vector};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LftrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Shared eigenvalue, ill-posed loop, divergence or a failed factorization.
    Numerical = 4,
    Parse = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LftrVerdict {
    RecoverableWhp = 0,
    LocallyRecoverable = 1,
    NotRecoverable = 2,
    IdentifiabilityFailed = 3,
}

/// Which interpolation design of the built-in example to construct.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LftrExampleDesign {
    /// Two distinct complex pairs, values only.
    Values = 0,
    /// One repeated complex pair, value and derivative.
    Derivative = 1,
}

/// Opaque plant handle.
pub struct LftrPlant(LftPlant);

/// Opaque `(Ξ, Π)` handle.
pub struct LftrSpec(InterpSpec);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LftrPlantDims {
    pub m_x: usize,
    pub m_u: usize,
    pub m_y: usize,
    pub m_v: usize,
    pub m_z: usize,
    pub m_theta: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LftrRecoveryConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub step: f64,
    pub eps_it: f64,
    pub max_iter: usize,
    pub clamp_to_box: bool,
    pub backtracking: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LftrRecoverySummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
    pub prox_fallbacks: usize,
    pub t1_full_rank: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LftrRobustness {
    pub robust: bool,
    /// NaN when not robust.
    pub kappa: f64,
    pub condition_rank: usize,
    pub condition_rows: usize,
    pub condition_cols: usize,
    pub empty_null: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LftrRecoverability {
    pub verdict: LftrVerdict,
    pub min_ratio: f64,
    pub n_samples: usize,
    pub n_failed: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LftrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.is_numerical() => LftrStatus::Numerical,
            Error::DimensionMismatch { .. } => LftrStatus::DimensionMismatch,
            Error::Parse(_) => LftrStatus::Parse,
            Error::Io(_) => LftrStatus::Io,
            _ => LftrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: LftrStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LftrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LftrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            LftrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(LftrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(LftrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len < need {
        return Err(fail(
            LftrStatus::BufferTooSmall,
            format!("{name}: need {need} doubles, got {len}"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(LftrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(LftrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LftrStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(LftrStatus::NullPointer, "out is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn theta_of(plant: &LftPlant, v: &[f64]) -> Result<Vector, Failure> {
    if v.len() != plant.m_theta() {
        return Err(fail(
            LftrStatus::DimensionMismatch,
            format!("theta: expected {} values, got {}", plant.m_theta(), v.len()),
        ));
    }
    Ok(Vector::from_column_slice(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lftr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lftr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a plant document held in a NUL-terminated string.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_plant_from_json(json: *const c_char, out: *mut *mut LftrPlant) -> LftrStatus {
    guard(|| {
        let p = io::parse_plant(c_str(json, "json")?)?;
        put(out, LftrPlant(p))
    })
}

/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_plant_load(path: *const c_char, out: *mut *mut LftrPlant) -> LftrStatus {
    guard(|| {
        let p = io::load_plant(Path::new(c_str(path, "path")?))?;
        put(out, LftrPlant(p))
    })
}

/// The built-in fourth-order example with θ = (ζ_p, ω_p).
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_plant_example(out: *mut *mut LftrPlant) -> LftrStatus {
    guard(|| put(out, LftrPlant(ExampleSetup::reference().plant)))
}

/// # Safety
/// `plant` must be NULL or a handle from a plant constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lftr_plant_free(plant: *mut LftrPlant) {
    if !plant.is_null() {
        drop(Box::from_raw(plant));
    }
}

/// # Safety
/// `plant` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_plant_dims(plant: *const LftrPlant, out: *mut LftrPlantDims) -> LftrStatus {
    guard(|| {
        let p = &deref(plant, "plant")?.0;
        if out.is_null() {
            return Err(fail(LftrStatus::NullPointer, "out is null"));
        }
        *out = LftrPlantDims {
            m_x: p.m_x(),
            m_u: p.m_u(),
            m_y: p.m_y(),
            m_v: p.m_v(),
            m_z: p.m_z(),
            m_theta: p.m_theta(),
        };
        Ok(())
    })
}

/// Parses a document with `Xi` and `Pi` keys.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_spec_from_json(json: *const c_char, out: *mut *mut LftrSpec) -> LftrStatus {
    guard(|| {
        let s = io::parse_spec(c_str(json, "json")?)?;
        put(out, LftrSpec(s))
    })
}

/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_spec_load(path: *const c_char, out: *mut *mut LftrSpec) -> LftrStatus {
    guard(|| {
        let s = io::load_spec(Path::new(c_str(path, "path")?))?;
        put(out, LftrSpec(s))
    })
}

/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_spec_example(design: LftrExampleDesign, out: *mut *mut LftrSpec) -> LftrStatus {
    guard(|| {
        let d = ExampleSetup::reference().designs;
        let spec = match design {
            LftrExampleDesign::Values => d.spec0,
            LftrExampleDesign::Derivative => d.spec1,
        };
        put(out, LftrSpec(spec))
    })
}

/// # Safety
/// `spec` must be NULL or a handle from a spec constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lftr_spec_free(spec: *mut LftrSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Order of Ξ, or 0 for a NULL handle.
///
/// # Safety
/// `spec` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lftr_spec_order(spec: *const LftrSpec) -> usize {
    spec.as_ref().map_or(0, |s| s.0.m_xi())
}

/// Writes Γ (`m_y × m_xi`, column-major) for θ into `gamma_out`.
///
/// # Safety
/// Handles must be live; `theta` must hold `theta_len` doubles and
/// `gamma_out` must have room for `gamma_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lftr_compute_rtim(
    plant: *const LftrPlant,
    spec: *const LftrSpec,
    theta: *const f64,
    theta_len: usize,
    gamma_out: *mut f64,
    gamma_len: usize,
) -> LftrStatus {
    guard(|| {
        let p = &deref(plant, "plant")?.0;
        let s = &deref(spec, "spec")?.0;
        let th = theta_of(p, in_slice(theta, theta_len, "theta")?)?;
        let g = compute_rtim(p, &th, s)?.gamma;
        out_slice(gamma_out, gamma_len, g.len(), "gamma_out")?[..g.len()].copy_from_slice(g.as_slice());
        Ok(())
    })
}

/// Fills `out` with the example defaults.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lftr_recovery_config_default(out: *mut LftrRecoveryConfig) -> LftrStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(LftrStatus::NullPointer, "out is null"));
        }
        let c = RecoveryConfig::example_defaults();
        *out = LftrRecoveryConfig {
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            step: c.step,
            eps_it: c.eps_it,
            max_iter: c.max_iter,
            clamp_to_box: c.clamp_to_box,
            backtracking: c.backtracking,
        };
        Ok(())
    })
}

/// Recovers θ from a column-major Γ estimate.
///
/// `config` may be NULL for the defaults and `init_theta` NULL for the upper
/// corner of the parameter box. `summary` may be NULL.
///
/// # Safety
/// Handles must be live and every non-NULL pointer must reference a buffer of
/// the stated length.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lftr_recover(
    plant: *const LftrPlant,
    spec: *const LftrSpec,
    gamma: *const f64,
    gamma_len: usize,
    config: *const LftrRecoveryConfig,
    init_theta: *const f64,
    theta_out: *mut f64,
    theta_len: usize,
    summary: *mut LftrRecoverySummary,
) -> LftrStatus {
    guard(|| {
        let p = &deref(plant, "plant")?.0;
        let s = &deref(spec, "spec")?.0;
        let (rows, cols) = (p.m_y(), s.m_xi());
        if gamma_len != rows * cols {
            return Err(fail(
                LftrStatus::DimensionMismatch,
                format!("gamma: expected {rows}x{cols} = {} values, got {gamma_len}", rows * cols),
            ));
        }
        let g = Mat::from_column_slice(rows, cols, in_slice(gamma, gamma_len, "gamma")?);
        let mut cfg = RecoveryConfig::example_defaults();
        if let Some(c) = config.as_ref() {
            cfg.lambda1 = c.lambda1;
            cfg.lambda2 = c.lambda2;
            cfg.step = c.step;
            cfg.eps_it = c.eps_it;
            cfg.max_iter = c.max_iter;
            cfg.clamp_to_box = c.clamp_to_box;
            cfg.backtracking = c.backtracking;
        }
        cfg.init_theta = if init_theta.is_null() {
            p.theta_box.upper.clone()
        } else {
            theta_of(p, in_slice(init_theta, p.m_theta(), "init_theta")?)?
        };
        let out = out_slice(theta_out, theta_len, p.m_theta(), "theta_out")?;
        let prob = build_problem(p, s, &Rtim::estimate(g, "caller supplied"))?;
        let res = recover(&prob, &cfg)?;
        out[..p.m_theta()].copy_from_slice(res.theta_hat.as_slice());
        if let Some(sm) = summary.as_mut() {
            *sm = LftrRecoverySummary {
                iterations: res.iterations,
                converged: res.converged,
                final_cost: res.cost_trace.last().copied().unwrap_or(f64::NAN),
                prox_fallbacks: res.prox_fallbacks,
                t1_full_rank: res.t1_full_rank,
            };
        }
        Ok(())
    })
}

/// # Safety
/// Handles must be live, `theta` must hold `theta_len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lftr_robustness(
    plant: *const LftrPlant,
    spec: *const LftrSpec,
    theta: *const f64,
    theta_len: usize,
    out: *mut LftrRobustness,
) -> LftrStatus {
    guard(|| {
        let p = &deref(plant, "plant")?.0;
        let s = &deref(spec, "spec")?.0;
        let th = theta_of(p, in_slice(theta, theta_len, "theta")?)?;
        if out.is_null() {
            return Err(fail(LftrStatus::NullPointer, "out is null"));
        }
        let r = check_robustness(p, &th, s)?;
        *out = LftrRobustness {
            robust: r.robust,
            kappa: r.amplification.unwrap_or(f64::NAN),
            condition_rank: r.condition_matrix_rank,
            condition_rows: r.condition_shape.0,
            condition_cols: r.condition_shape.1,
            empty_null: r.empty_null,
        };
        Ok(())
    })
}

/// Sampled recoverability test over the parameter box.
///
/// # Safety
/// Handles must be live and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lftr_check_recoverability(
    plant: *const LftrPlant,
    spec: *const LftrSpec,
    n_theta: usize,
    n_phi: usize,
    mu_t: f64,
    seed: u64,
    out: *mut LftrRecoverability,
) -> LftrStatus {
    guard(|| {
        let p = &deref(plant, "plant")?.0;
        let s = &deref(spec, "spec")?.0;
        if out.is_null() {
            return Err(fail(LftrStatus::NullPointer, "out is null"));
        }
        let plan = SamplingPlan {
            n_theta,
            n_phi,
            mu_t,
            seed,
        };
        let v = check_recoverability_sampled(p, s, &plan)?;
        *out = LftrRecoverability {
            verdict: match v.verdict {
                Verdict::RecoverableWhp => LftrVerdict::RecoverableWhp,
                Verdict::LocallyRecoverable => LftrVerdict::LocallyRecoverable,
                Verdict::NotRecoverable => LftrVerdict::NotRecoverable,
                Verdict::IdentifiabilityFailed => LftrVerdict::IdentifiabilityFailed,
            },
            min_ratio: v.min_ratio,
            n_samples: v.samples.len(),
            n_failed: v.failed_thetas.len(),
        };
        Ok(())
    })
}
