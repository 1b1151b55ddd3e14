//! C ABI over `oscstab`.
//!
//! Objects are opaque handles created by `osc_*_new`/`osc_*_brockett`
//! functions and released by the matching `*_free`. Every fallible call
//! returns an [`OscStatus`]; the message of the most recent failure on the
//! calling thread is available through [`osc_last_error_message`].
//! Output arrays are caller-allocated and their lengths are checked.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use oscstab::brockett;
use oscstab::controller::{FeedbackLaw, OscillatorAssignment};
use oscstab::integrator::{self, SolutionMode, Trajectory};
use oscstab::lyapunov::compute_w;
use oscstab::vecfield::{self, VectorFieldSystem};
use oscstab::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    IllConditioned = 4,
    NonFinite = 5,
    Resonance = 6,
    Internal = 7,
    Panic = 8,
}

/// Integration mode.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscMode {
    Classical = 0,
    Sampled = 1,
}

/// Opaque vector-field system.
pub struct OscSystem {
    inner: VectorFieldSystem,
}

/// Opaque feedback law.
pub struct OscLaw {
    inner: FeedbackLaw,
}

/// Opaque trajectory.
pub struct OscTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> OscStatus {
    match err {
        Error::IllConditioned { .. } | Error::SynthesisResidual { .. } => OscStatus::IllConditioned,
        Error::NonFinite { .. } => OscStatus::NonFinite,
        Error::Resonance(_) => OscStatus::Resonance,
        Error::InvalidSystem(_)
        | Error::InvalidLyapunov(_)
        | Error::IndexOutOfRange { .. }
        | Error::InvalidArgument(_)
        | Error::NoAdmissibleSamples(_) => OscStatus::InvalidArgument,
        _ => OscStatus::Internal,
    }
}

struct Fail(OscStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> OscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OscStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside oscstab".into());
            OscStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(OscStatus::NullPointer, "null pointer argument".into())
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn input<'a>(
    p: *const f64,
    len: usize,
    expected: usize,
    what: &str,
) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null());
    }
    if len != expected {
        return Err(Fail(
            OscStatus::InvalidArgument,
            format!("{what}: length {len}, expected {expected}"),
        ));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(
    p: *mut f64,
    len: usize,
    needed: usize,
    what: &str,
) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null());
    }
    if len < needed {
        return Err(Fail(
            OscStatus::BufferTooSmall,
            format!("{what}: buffer holds {len}, need {needed}"),
        ));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn write_out<T>(p: *mut T, v: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null());
    }
    *p = v;
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn osc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Creates the ten-dimensional, four-input Brockett integrator.
///
/// # Safety
/// `out` must be a valid pointer; the handle is released with
/// [`osc_system_free`].
#[no_mangle]
pub unsafe extern "C" fn osc_system_brockett(out: *mut *mut OscSystem) -> OscStatus {
    guard(|| {
        let sys = Box::new(OscSystem {
            inner: brockett::brockett_system(),
        });
        write_out(out, Box::into_raw(sys))
    })
}

/// # Safety
/// `sys` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osc_system_free(sys: *mut OscSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State dimension, input count and number of bracket pairs.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn osc_system_dims(
    sys: *const OscSystem,
    n: *mut usize,
    m: *mut usize,
    pairs: *mut usize,
) -> OscStatus {
    guard(|| {
        let s = &handle(sys)?.inner;
        write_out(n, s.state_dim())?;
        write_out(m, s.input_dim())?;
        write_out(pairs, s.pairs().len())
    })
}

/// Lie bracket `[f_i, f_j](x)` with zero-based indices.
///
/// # Safety
/// `x` holds `n` values, `out` has room for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn osc_system_lie_bracket(
    sys: *const OscSystem,
    i: usize,
    j: usize,
    x: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> OscStatus {
    guard(|| {
        let s = &handle(sys)?.inner;
        let dim = s.state_dim();
        let x = input(x, n, dim, "x")?;
        let b = vecfield::lie_bracket(s, i, j, x)?;
        output(out, out_len, dim, "out")?.copy_from_slice(&b);
        Ok(())
    })
}

/// Row-major `F(x) = [f_1 … f_m, f^I …]` and its 1-norm condition number
/// (`+inf` when singular).
///
/// # Safety
/// `x` holds `n` values, `out` has room for `out_len ≥ n²` values.
#[no_mangle]
pub unsafe extern "C" fn osc_system_bracket_matrix(
    sys: *const OscSystem,
    x: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
    condition: *mut f64,
) -> OscStatus {
    guard(|| {
        let s = &handle(sys)?.inner;
        let dim = s.state_dim();
        let x = input(x, n, dim, "x")?;
        let f = vecfield::assemble_f(s, x);
        let dst = output(out, out_len, dim * dim, "out")?;
        for r in 0..dim {
            for c in 0..dim {
                dst[r * dim + c] = f.get(r, c);
            }
        }
        write_out(condition, f.condition)
    })
}

/// Brockett feedback law with exponent `p`, gain `gamma` and period `eps`.
/// `kappa` may be null (multipliers 1..6) or hold `kappa_len = 6` distinct
/// positive multipliers in pair order. `synthesized != 0` computes the
/// components by inverting `F(x)` instead of using the closed forms.
///
/// # Safety
/// `kappa` is null or holds `kappa_len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn osc_law_brockett(
    p: f64,
    gamma: f64,
    eps: f64,
    kappa: *const u32,
    kappa_len: usize,
    synthesized: i32,
    out: *mut *mut OscLaw,
) -> OscStatus {
    guard(|| {
        let pairs = brockett::pair_set();
        let osc = if kappa.is_null() {
            OscillatorAssignment::new(&pairs, eps)?
        } else {
            let k = slice::from_raw_parts(kappa, kappa_len).to_vec();
            OscillatorAssignment::with_multipliers(&pairs, k, eps)?
        };
        let law = brockett::brockett_law(p, gamma, osc, synthesized != 0)?;
        write_out(out, Box::into_raw(Box::new(OscLaw { inner: law })))
    })
}

/// # Safety
/// `law` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osc_law_free(law: *mut OscLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Input `u(x, t)` into `out` (length ≥ input count).
///
/// # Safety
/// `x` holds `n` values, `out` has room for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn osc_law_feedback(
    law: *const OscLaw,
    x: *const f64,
    n: usize,
    t: f64,
    out: *mut f64,
    out_len: usize,
) -> OscStatus {
    guard(|| {
        let l = &handle(law)?.inner;
        let x = input(x, n, l.system().state_dim(), "x")?;
        let u = l.feedback_eval(x, t)?;
        output(out, out_len, u.len(), "out")?.copy_from_slice(&u);
        Ok(())
    })
}

/// Certificate `W = α + γ²β` at `x` for gain `gamma`.
///
/// # Safety
/// `x` holds `n` values; `w`, `alpha`, `beta` are valid or null (skipped).
#[no_mangle]
pub unsafe extern "C" fn osc_law_certificate(
    law: *const OscLaw,
    x: *const f64,
    n: usize,
    gamma: f64,
    w: *mut f64,
    alpha: *mut f64,
    beta: *mut f64,
) -> OscStatus {
    guard(|| {
        let l = &handle(law)?.inner;
        let x = input(x, n, l.system().state_dim(), "x")?;
        let c = compute_w(l, x, gamma)?;
        for (p, v) in [(w, c.w), (alpha, c.alpha), (beta, c.beta)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Open gain interval of the Brockett certificate.
///
/// # Safety
/// `lower` and `upper` must be valid.
#[no_mangle]
pub unsafe extern "C" fn osc_stability_gain_range(
    p: f64,
    h: f64,
    lower: *mut f64,
    upper: *mut f64,
) -> OscStatus {
    guard(|| {
        let g = brockett::stability_gain_range(p, h)?;
        write_out(lower, g.lower)?;
        write_out(upper, g.upper)
    })
}

/// Integrates the closed loop over `round(horizon/eps)` periods with
/// `substeps` RK4 steps per period.
///
/// # Safety
/// `x0` holds `n` values; `out` must be valid. Release with
/// [`osc_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn osc_integrate(
    law: *const OscLaw,
    x0: *const f64,
    n: usize,
    horizon: f64,
    substeps: usize,
    mode: OscMode,
    out: *mut *mut OscTrajectory,
) -> OscStatus {
    guard(|| {
        let l = &handle(law)?.inner;
        let x0 = input(x0, n, l.system().state_dim(), "x0")?;
        let mode = match mode {
            OscMode::Classical => SolutionMode::Classical,
            OscMode::Sampled => SolutionMode::Sampled,
        };
        let t = integrator::integrate(l, x0, horizon, substeps, mode)?;
        write_out(out, Box::into_raw(Box::new(OscTrajectory { inner: t })))
    })
}

/// # Safety
/// `traj` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osc_trajectory_free(traj: *mut OscTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Sample count, completed windows and divergence flag (0 or 1).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn osc_trajectory_info(
    traj: *const OscTrajectory,
    samples: *mut usize,
    windows: *mut usize,
    diverged: *mut i32,
) -> OscStatus {
    guard(|| {
        let t = &handle(traj)?.inner;
        write_out(samples, t.times.len())?;
        write_out(windows, t.window_count())?;
        write_out(diverged, i32::from(t.diverged))
    })
}

/// Time and state of sample `index`.
///
/// # Safety
/// `t` valid; `out` has room for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn osc_trajectory_sample(
    traj: *const OscTrajectory,
    index: usize,
    t: *mut f64,
    out: *mut f64,
    out_len: usize,
) -> OscStatus {
    guard(|| {
        let tr = &handle(traj)?.inner;
        if index >= tr.times.len() {
            return Err(Fail(
                OscStatus::InvalidArgument,
                format!("sample {index} out of range ({} samples)", tr.times.len()),
            ));
        }
        write_out(t, tr.times[index])?;
        let x = &tr.states[index];
        output(out, out_len, x.len(), "out")?.copy_from_slice(x);
        Ok(())
    })
}

/// `‖x(jε)‖` for every reached boundary `j = 0, 1, …`; `out_len` must be at
/// least the window count plus one.
///
/// # Safety
/// `out` has room for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn osc_trajectory_boundary_norms(
    traj: *const OscTrajectory,
    out: *mut f64,
    out_len: usize,
) -> OscStatus {
    guard(|| {
        let norms = handle(traj)?.inner.boundary_norms();
        output(out, out_len, norms.len(), "out")?.copy_from_slice(&norms);
        Ok(())
    })
}
