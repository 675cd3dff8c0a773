//! C interface to `upb-core`.
//!
//! Every fallible function returns a [`UpbStatus`]; on failure a message is
//! stored per thread and can be fetched with [`upb_last_error_message`].
//! Results that own memory are returned through opaque handles that must be
//! released with the matching `*_free` function. Panics never cross the
//! boundary: they are reported as [`UpbStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use upb_core::counting::{filtered_pair_statistics, FilterWindow};
use upb_core::dynamics::{g2_tau_cw, g2_zero, steady_state, CorrelationResult, PulseShape, SystemParams};
use upb_core::ode::Tolerances;
use upb_core::trajectories::{run_ensemble, write_jump_log, CampaignMetadata, Channel2, TrajectoryConfig, TrajectoryEnsemble};
use upb_core::{Cavity, HilbertSpace, QOperator, QuantumState, UpbError};

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UndefinedCorrelation = 3,
    SolverFailed = 4,
    Io = 5,
    Panic = 6,
}

impl From<&UpbError> for UpbStatus {
    fn from(e: &UpbError) -> Self {
        match e {
            UpbError::InvalidTruncation { .. }
            | UpbError::InvalidCavity(_)
            | UpbError::SpaceMismatch { .. }
            | UpbError::InvalidParameter(_)
            | UpbError::FilterWindow(_)
            | UpbError::Config(_) => UpbStatus::InvalidArgument,
            UpbError::UndefinedCorrelation { .. } => UpbStatus::UndefinedCorrelation,
            UpbError::SteadyState(_) | UpbError::Integration { .. } | UpbError::Trajectory { .. } => {
                UpbStatus::SolverFailed
            }
            UpbError::Parse { .. } | UpbError::Io(_) | UpbError::Csv(_) => UpbStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard<F: FnOnce() -> Result<(), UpbStatus>>(f: F) -> UpbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UpbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            UpbStatus::Panic
        }
    }
}

fn fail(e: UpbError) -> UpbStatus {
    let status = UpbStatus::from(&e);
    set_error(format!("{}: {e}", e.kind()));
    status
}

fn null(name: &str) -> UpbStatus {
    set_error(format!("null pointer: {name}"));
    UpbStatus::NullPointer
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding
/// the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn upb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_deref() else { return 0 };
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Model parameters in units of ħκ and 1/κ. A drive with `sigma_t <= 0` is
/// constant; otherwise it is a train of `n_pulses` Gaussian pulses centered
/// at `t0 + k·period`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UpbParams {
    pub delta1: f64,
    pub delta2: f64,
    pub u1: f64,
    pub u2: f64,
    pub j_coupling: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub amplitude: f64,
    pub sigma_t: f64,
    pub period: f64,
    pub t0: f64,
    pub n_pulses: usize,
}

impl UpbParams {
    fn to_core(self) -> Result<SystemParams, UpbStatus> {
        let drive = if self.sigma_t > 0.0 {
            PulseShape::GaussianTrain {
                amplitude: self.amplitude,
                sigma_t: self.sigma_t,
                period: self.period,
                t0: self.t0,
                n_pulses: self.n_pulses,
            }
        } else {
            PulseShape::Constant { amplitude: self.amplitude }
        };
        let p = SystemParams {
            delta1: self.delta1,
            delta2: self.delta2,
            u1: self.u1,
            u2: self.u2,
            j_coupling: self.j_coupling,
            kappa1: self.kappa1,
            kappa2: self.kappa2,
            drive,
        };
        p.validate().map_err(fail)?;
        Ok(p)
    }
}

unsafe fn read_params(p: *const UpbParams) -> Result<SystemParams, UpbStatus> {
    match p.as_ref() {
        Some(p) => p.to_core(),
        None => Err(null("params")),
    }
}

fn space(n1_levels: usize, n2_levels: usize) -> Result<HilbertSpace, UpbStatus> {
    HilbertSpace::new(n1_levels, n2_levels).map_err(fail)
}

/// Optimal coupling J and detuning Δ (units of ħκ) for a Kerr energy U.
///
/// # Safety
/// `j_out` and `delta_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn upb_optimal_conditions(u: f64, j_out: *mut f64, delta_out: *mut f64) -> UpbStatus {
    guard(|| {
        if j_out.is_null() || delta_out.is_null() {
            return Err(null("output"));
        }
        let (j, d) = upb_core::device::optimal_conditions(u).map_err(fail)?;
        *j_out = j;
        *delta_out = d;
        Ok(())
    })
}

/// Steady-state occupations and zero-delay correlation of cavity 1.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UpbSteadyState {
    pub n1: f64,
    pub n2: f64,
    pub g2_zero: f64,
}

/// Solves for the steady state under a constant drive.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn upb_steady_state(
    params: *const UpbParams,
    n1_levels: usize,
    n2_levels: usize,
    out: *mut UpbSteadyState,
) -> UpbStatus {
    guard(|| {
        let p = read_params(params)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = space(n1_levels, n2_levels)?;
        let rho = steady_state(&p, s).map_err(fail)?;
        *out = UpbSteadyState {
            n1: rho.expectation(&QOperator::number(s, Cavity::One)).map_err(fail)?.re,
            n2: rho.expectation(&QOperator::number(s, Cavity::Two)).map_err(fail)?.re,
            g2_zero: g2_zero(&rho, Cavity::One).map_err(fail)?,
        };
        Ok(())
    })
}

/// Opaque delay-correlation curve.
pub struct UpbCorrelation(CorrelationResult);

/// g⁽²⁾(τ) of cavity 1 on `points` delays evenly spaced over `[0, tau_max]`.
///
/// # Safety
/// `params` must be readable and `out` writable. The handle written to `out`
/// must be released with [`upb_correlation_free`].
#[no_mangle]
pub unsafe extern "C" fn upb_g2_tau(
    params: *const UpbParams,
    n1_levels: usize,
    n2_levels: usize,
    tau_max: f64,
    points: usize,
    out: *mut *mut UpbCorrelation,
) -> UpbStatus {
    guard(|| {
        let p = read_params(params)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if points < 2 || !(tau_max > 0.0) {
            set_error("need at least 2 points and tau_max > 0".into());
            return Err(UpbStatus::InvalidArgument);
        }
        let grid: Vec<f64> = (0..points).map(|i| tau_max * i as f64 / (points - 1) as f64).collect();
        let res = g2_tau_cw(&p, space(n1_levels, n2_levels)?, &grid, Tolerances::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(UpbCorrelation(res)));
        Ok(())
    })
}

/// Number of points of a correlation curve (0 for a null handle).
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn upb_correlation_len(c: *const UpbCorrelation) -> usize {
    c.as_ref().map_or(0, |c| c.0.grid.len())
}

/// # Safety
/// `c` must be a live handle; `tau` and `g2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn upb_correlation_get(
    c: *const UpbCorrelation,
    index: usize,
    tau: *mut f64,
    g2: *mut f64,
) -> UpbStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("handle"))?;
        if tau.is_null() || g2.is_null() {
            return Err(null("output"));
        }
        if index >= c.0.grid.len() {
            set_error(format!("index {index} out of range"));
            return Err(UpbStatus::InvalidArgument);
        }
        *tau = c.0.grid[index];
        *g2 = c.0.values[index];
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn upb_correlation_free(c: *mut UpbCorrelation) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Settings of a trajectory campaign. `fluctuation_channel2` selects the
/// displaced-field unraveling of cavity 2 (requires `mean_field_frame`).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UpbEnsembleConfig {
    pub n1_levels: usize,
    pub n2_levels: usize,
    pub horizon: f64,
    pub n_traj: usize,
    pub master_seed: u64,
    pub mean_field_frame: bool,
    pub fluctuation_channel2: bool,
    pub rtol: f64,
    pub atol: f64,
}

/// Opaque trajectory ensemble.
pub struct UpbEnsemble {
    ensemble: TrajectoryEnsemble,
    meta: CampaignMetadata,
}

/// Runs a Monte Carlo wave-function campaign from vacuum at t = 0.
///
/// # Safety
/// `params` and `config` must be readable and `out` writable. The handle
/// must be released with [`upb_ensemble_free`].
#[no_mangle]
pub unsafe extern "C" fn upb_ensemble_run(
    params: *const UpbParams,
    config: *const UpbEnsembleConfig,
    out: *mut *mut UpbEnsemble,
) -> UpbStatus {
    guard(|| {
        let p = read_params(params)?;
        let c = *config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut tc = TrajectoryConfig::new(space(c.n1_levels, c.n2_levels)?, c.horizon);
        if c.mean_field_frame {
            tc.frame = upb_core::frame::Frame::MeanField;
        }
        if c.fluctuation_channel2 {
            tc.channel2 = Channel2::Fluctuation;
        }
        tc.tolerances = Tolerances { rtol: c.rtol, atol: c.atol, ..Tolerances::default() };
        tc.sample_times = vec![];
        let ensemble = run_ensemble(&p, &tc, c.n_traj, c.master_seed).map_err(fail)?;
        let meta = CampaignMetadata {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: c.master_seed,
            n_requested: c.n_traj,
            n_trajectories: ensemble.n_trajectories,
            failures: ensemble.failures.clone(),
            params: p,
            config: tc,
        };
        *out = Box::into_raw(Box::new(UpbEnsemble { ensemble, meta }));
        Ok(())
    })
}

/// Completed trajectories (0 for a null handle).
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn upb_ensemble_trajectories(e: *const UpbEnsemble) -> usize {
    e.as_ref().map_or(0, |e| e.ensemble.n_trajectories)
}

/// Trajectories that failed and were excluded (0 for a null handle).
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn upb_ensemble_failures(e: *const UpbEnsemble) -> usize {
    e.as_ref().map_or(0, |e| e.ensemble.failures.len())
}

/// Number of jumps on `channel` (1 or 2) with time in `[t1, t2)`.
///
/// # Safety
/// `e` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn upb_ensemble_count_events(
    e: *const UpbEnsemble,
    channel: u8,
    t1: f64,
    t2: f64,
    count: *mut u64,
) -> UpbStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("handle"))?;
        let count = count.as_mut().ok_or_else(|| null("count"))?;
        if channel != 1 && channel != 2 {
            return Err(fail(UpbError::InvalidCavity(channel)));
        }
        *count = e.ensemble.count_events(channel, t1, t2);
        Ok(())
    })
}

/// Sliding-window pair statistics of the channel-1 records.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UpbPairCount {
    pub pair_count: u64,
    pub singles: u64,
    pub poisson_expected: f64,
    pub g2: f64,
    pub error: f64,
    pub one_sided: bool,
}

/// g⁽²⁾ of detections inside `[t1, t2)` tiled into sub-windows of `delta_t`.
///
/// # Safety
/// `e` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn upb_ensemble_pair_statistics(
    e: *const UpbEnsemble,
    t1: f64,
    t2: f64,
    delta_t: f64,
    out: *mut UpbPairCount,
) -> UpbStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let w = FilterWindow::new(t1, t2).map_err(fail)?;
        let r = filtered_pair_statistics(&e.ensemble, &w, delta_t).map_err(fail)?;
        *out = UpbPairCount {
            pair_count: r.pair_count,
            singles: r.singles,
            poisson_expected: r.poisson_expected,
            g2: r.g2,
            error: r.error,
            one_sided: r.one_sided,
        };
        Ok(())
    })
}

/// Writes the jump log (CSV plus `.meta.json` sidecar) to a UTF-8 path.
///
/// # Safety
/// `e` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn upb_ensemble_write_log(e: *const UpbEnsemble, path: *const c_char) -> UpbStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("handle"))?;
        if path.is_null() {
            return Err(null("path"));
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            set_error("path is not valid UTF-8".into());
            return Err(UpbStatus::InvalidArgument);
        };
        write_jump_log(Path::new(path), &e.ensemble, &e.meta).map_err(fail)
    })
}

/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn upb_ensemble_free(e: *mut UpbEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}
