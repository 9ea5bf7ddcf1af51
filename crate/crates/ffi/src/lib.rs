//! C ABI over `mflqr-core`.
//!
//! Specs and schedules are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`MflqrStatus`]; on failure the
//! message is kept per thread and read with [`mflqr_last_error`]. Matrices
//! cross the boundary as row-major `double` arrays. Panics are caught and
//! reported as [`MflqrStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mflqr_core::disturbance::DiscreteDisturbance;
use mflqr_core::mfsim::{ensemble, EnsembleConfig};
use mflqr_core::riccati::{solve_mean_field, MeanFieldGainSchedule, SystemMatrices, SystemSpec};
use mflqr_core::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MflqrStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    Singular = 3,
    Numerical = 4,
    Range = 5,
    Invalid = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque system description.
pub struct MflqrSpec(SystemSpec);

/// Opaque decoupled gain schedule.
pub struct MflqrSchedule(MeanFieldGainSchedule);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> MflqrStatus {
    match err {
        Error::Shape(_) => MflqrStatus::Shape,
        Error::Singular { .. } => MflqrStatus::Singular,
        Error::Numerical(_) => MflqrStatus::Numerical,
        Error::Range { .. } => MflqrStatus::Range,
        Error::Invalid(_) => MflqrStatus::Invalid,
        Error::Config { .. } => MflqrStatus::Config,
        Error::Io(_) => MflqrStatus::Io,
    }
}

struct Failure(MflqrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MflqrStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MflqrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MflqrStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            MflqrStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn matrix(
    ptr: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<DMatrix<f64>, Failure> {
    Ok(DMatrix::from_row_slice(
        rows,
        cols,
        slice(ptr, rows * cols, what)?,
    ))
}

fn write_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mflqr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mflqr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a time-invariant spec.
///
/// `a` and `c` are `n×n`, `b` is `n×m`, `p` and `q` are `n×n`, `r` is `m×m`.
/// `support` holds `n_atoms` atoms of length `n`, one per row.
///
/// # Safety
/// Every array must hold the number of doubles stated above; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mflqr_spec_new_time_invariant(
    k: usize,
    n: usize,
    m: usize,
    horizon: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    p: *const f64,
    q: *const f64,
    r: *const f64,
    lambda: f64,
    n_atoms: usize,
    support: *const f64,
    probs: *const f64,
    out: *mut *mut MflqrSpec,
) -> MflqrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let matrices = SystemMatrices::constant(
            horizon,
            matrix(a, n, n, "a")?,
            matrix(b, n, m, "b")?,
            matrix(c, n, n, "c")?,
            matrix(p, n, n, "p")?,
            matrix(q, n, n, "q")?,
            matrix(r, m, m, "r")?,
        );
        let atoms = slice(support, n_atoms * n, "support")?
            .chunks_exact(n.max(1))
            .map(DVector::from_column_slice)
            .collect();
        let probs = slice(probs, n_atoms, "probs")?.to_vec();
        let disturbance = DiscreteDisturbance::new(atoms, probs)?;
        put(
            out,
            MflqrSpec(SystemSpec::new(k, matrices, lambda, disturbance)?),
        );
        Ok(())
    })
}

/// Loads the system section of an experiment config, at `λ = 0`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mflqr_spec_from_config(
    path: *const c_char,
    out: *mut *mut MflqrSpec,
) -> MflqrStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Failure(MflqrStatus::Invalid, format!("path is not UTF-8: {e}")))?;
        let config = mflqr_core::cli::parse_config(Path::new(path))?;
        put(out, MflqrSpec(config.spec));
        Ok(())
    })
}

/// Copy of `spec` with risk weight `lambda`.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mflqr_spec_with_lambda(
    spec: *const MflqrSpec,
    lambda: f64,
    out: *mut *mut MflqrSpec,
) -> MflqrStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, MflqrSpec(spec.0.with_lambda(lambda)?));
        Ok(())
    })
}

/// # Safety
/// `spec` must be a live handle; each output pointer must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn mflqr_spec_dims(
    spec: *const MflqrSpec,
    k: *mut usize,
    n: *mut usize,
    m: *mut usize,
    horizon: *mut usize,
) -> MflqrStatus {
    guard(|| {
        let spec = &spec.as_ref().ok_or_else(|| null("spec"))?.0;
        for (ptr, value) in [
            (k, spec.k()),
            (n, spec.n()),
            (m, spec.m()),
            (horizon, spec.horizon()),
        ] {
            if !ptr.is_null() {
                *ptr = value;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mflqr_spec_free(spec: *mut MflqrSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mflqr_solve_mean_field(
    spec: *const MflqrSpec,
    out: *mut *mut MflqrSchedule,
) -> MflqrStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, MflqrSchedule(solve_mean_field(&spec.0)?));
        Ok(())
    })
}

/// # Safety
/// `schedule` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mflqr_schedule_free(schedule: *mut MflqrSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Writes `K_t`, `K̄_t` (`m×n` each) and `f_t` (`m`) for `t < T`.
///
/// # Safety
/// `schedule` must be a live handle; outputs must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn mflqr_schedule_gain(
    schedule: *const MflqrSchedule,
    t: usize,
    gain: *mut f64,
    gain_bar: *mut f64,
    offset: *mut f64,
) -> MflqrStatus {
    guard(|| {
        let s = &schedule.as_ref().ok_or_else(|| null("schedule"))?.0;
        if t >= s.horizon() {
            return Err(Error::Range {
                index: t,
                len: s.horizon(),
            }
            .into());
        }
        let (n, m) = (s.state_dim(), s.input_dim());
        write_matrix(&s.gain[t], slice_mut(gain, m * n, "gain")?);
        write_matrix(&s.gain_bar[t], slice_mut(gain_bar, m * n, "gain_bar")?);
        slice_mut(offset, m, "offset")?.copy_from_slice(s.offset[t].as_slice());
        Ok(())
    })
}

/// Writes `S_t`, `S̄_t` (`n×n` each) and `g_t` (`n`) for `t ≤ T`.
///
/// # Safety
/// `schedule` must be a live handle; outputs must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn mflqr_schedule_cost_to_go(
    schedule: *const MflqrSchedule,
    t: usize,
    cost_to_go: *mut f64,
    cost_to_go_bar: *mut f64,
    linear_term: *mut f64,
) -> MflqrStatus {
    guard(|| {
        let s = &schedule.as_ref().ok_or_else(|| null("schedule"))?.0;
        if t > s.horizon() {
            return Err(Error::Range {
                index: t,
                len: s.horizon() + 1,
            }
            .into());
        }
        let n = s.state_dim();
        write_matrix(
            &s.cost_to_go[t],
            slice_mut(cost_to_go, n * n, "cost_to_go")?,
        );
        write_matrix(
            &s.cost_to_go_bar[t],
            slice_mut(cost_to_go_bar, n * n, "cost_to_go_bar")?,
        );
        slice_mut(linear_term, n, "linear_term")?.copy_from_slice(s.linear_term[t].as_slice());
        Ok(())
    })
}

/// `u = K_t(x − x̄) + K̄_t x̄ + f_t` for one subsystem.
///
/// # Safety
/// `schedule` must be a live handle; `state` and `mean_field` hold `n` doubles, `control` holds `m`.
#[no_mangle]
pub unsafe extern "C" fn mflqr_schedule_control(
    schedule: *const MflqrSchedule,
    t: usize,
    state: *const f64,
    mean_field: *const f64,
    control: *mut f64,
) -> MflqrStatus {
    guard(|| {
        let s = &schedule.as_ref().ok_or_else(|| null("schedule"))?.0;
        let (n, m) = (s.state_dim(), s.input_dim());
        let x = DVector::from_column_slice(slice(state, n, "state")?);
        let xbar = DVector::from_column_slice(slice(mean_field, n, "mean_field")?);
        let u = s.control(t, &x, &xbar)?;
        slice_mut(control, m, "control")?.copy_from_slice(u.as_slice());
        Ok(())
    })
}

/// Monte Carlo time averages of `c^{x,avg}`, `c^{x,max}`, `c^{u,avg}`, `c^{u,max}`.
///
/// `x0` holds `k` initial states of length `n`, one per row. `out` receives
/// 12 doubles: mean, lower and upper band for each series in that order.
///
/// # Safety
/// Handles must be live; `x0` holds `k·n` doubles and `out` holds 12.
#[no_mangle]
pub unsafe extern "C" fn mflqr_ensemble_time_averages(
    spec: *const MflqrSpec,
    schedule: *const MflqrSchedule,
    x0: *const f64,
    n_runs: usize,
    seed: u64,
    tail: f64,
    out: *mut f64,
) -> MflqrStatus {
    guard(|| {
        let spec = &spec.as_ref().ok_or_else(|| null("spec"))?.0;
        let s = &schedule.as_ref().ok_or_else(|| null("schedule"))?.0;
        let (k, n) = (spec.k(), spec.n());
        let x0: Vec<DVector<f64>> = slice(x0, k * n, "x0")?
            .chunks_exact(n.max(1))
            .map(DVector::from_column_slice)
            .collect();
        let config = EnsembleConfig {
            n_runs,
            base_seed: seed,
            tail,
        };
        let stats = ensemble(spec, s, &x0, config)?;
        let avg = &stats.time_average;
        let out = slice_mut(out, 12, "out")?;
        for (i, band) in [&avg.x_avg, &avg.x_max, &avg.u_avg, &avg.u_max]
            .into_iter()
            .enumerate()
        {
            out[3 * i..3 * i + 3].copy_from_slice(&[band.mean, band.lower, band.upper]);
        }
        Ok(())
    })
}
