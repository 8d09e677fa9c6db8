//! C interface to `cda-core`.
//!
//! Every function returns a [`CdaStatus`]; on failure the message is kept per
//! thread and read with [`cda_last_error`]. Objects are opaque handles owned by
//! the caller and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cda_core::harness::experiments::{heat_cda, HeatCase};
use cda_core::harness::{convergence_rates, decay_analysis, run_experiment, verify_all, ErrorSeries, ExperimentConfig, Manifest};
use cda_core::observation::NudgingMode;
use cda_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdaStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad arguments or configuration.
    InvalidInput = 2,
    /// Singular system, non-finite values, solver failure or no decay.
    Numerical = 3,
    Io = 4,
    /// Index past the end of a collection.
    OutOfRange = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CdaRecord {
    pub step: usize,
    pub time: f64,
    pub l2_error: f64,
    pub h1_error: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CdaDecayFit {
    pub log_slope: f64,
    pub plateau: f64,
    pub onset_step: usize,
}

/// Nudging form for finite `mu`; `mu = INFINITY` always means direct enforcement.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdaNudging {
    Galerkin = 0,
    Lumped = 1,
}

pub struct CdaHeatCase(HeatCase);
pub struct CdaSeries(ErrorSeries);
pub struct CdaConfig(ExperimentConfig);
pub struct CdaManifest(Manifest);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CdaStatus {
    match e {
        Error::Io { .. } => CdaStatus::Io,
        e if e.exit_code() == 3 => CdaStatus::Numerical,
        _ => CdaStatus::InvalidInput,
    }
}

struct Fail(CdaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null() -> Fail {
    Fail(CdaStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CdaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CdaStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CdaStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(null)
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null());
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CdaStatus::InvalidInput, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Heat assimilation case with the spatial-convergence defaults at `1/n`:
/// barycentric P2 mesh, κ = 1, Δt = 0.001, T = 0.3, direct enforcement, H = 1/9.
///
/// # Safety
/// `out_case` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_heat_case_new(n: usize, out_case: *mut *mut CdaHeatCase) -> CdaStatus {
    guard(|| {
        let out_case = out(out_case)?;
        if n == 0 {
            return Err(Fail(CdaStatus::InvalidInput, "n must be positive".into()));
        }
        *out_case = Box::into_raw(Box::new(CdaHeatCase(HeatCase::spatial(n))));
        Ok(())
    })
}

/// # Safety
/// `case` must come from [`cda_heat_case_new`].
#[no_mangle]
pub unsafe extern "C" fn cda_heat_case_set_time(case: *mut CdaHeatCase, dt: f64, t_final: f64) -> CdaStatus {
    guard(|| {
        let c = out(case)?;
        c.0.dt = dt;
        c.0.t_final = t_final;
        Ok(())
    })
}

/// `mu` may be `INFINITY` for direct enforcement or 0 for a free run.
///
/// # Safety
/// `case` must come from [`cda_heat_case_new`].
#[no_mangle]
pub unsafe extern "C" fn cda_heat_case_set_nudging(
    case: *mut CdaHeatCase,
    mu: f64,
    mode: CdaNudging,
    coarse_width: f64,
) -> CdaStatus {
    guard(|| {
        let c = out(case)?;
        if !(mu >= 0.0) {
            return Err(Fail(CdaStatus::InvalidInput, format!("mu must be non-negative, got {mu}")));
        }
        c.0.mu = mu;
        c.0.mode = match mode {
            CdaNudging::Galerkin => NudgingMode::Galerkin,
            CdaNudging::Lumped => NudgingMode::Lumped,
        };
        c.0.coarse_width = coarse_width;
        Ok(())
    })
}

/// # Safety
/// `case` must come from [`cda_heat_case_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cda_heat_case_free(case: *mut CdaHeatCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Runs the case; the error series is returned in `out_series`.
///
/// # Safety
/// `case` must come from [`cda_heat_case_new`]; `out_series` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_heat_run(case: *const CdaHeatCase, out_series: *mut *mut CdaSeries) -> CdaStatus {
    guard(|| {
        let c = get(case)?;
        let o = out(out_series)?;
        *o = Box::into_raw(Box::new(CdaSeries(heat_cda(&c.0)?)));
        Ok(())
    })
}

/// # Safety
/// `series` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn cda_series_len(series: *const CdaSeries, out_len: *mut usize) -> CdaStatus {
    guard(|| {
        *out(out_len)? = get(series)?.0.len();
        Ok(())
    })
}

/// # Safety
/// `series` must come from this library; `out_record` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_series_get(series: *const CdaSeries, index: usize, out_record: *mut CdaRecord) -> CdaStatus {
    guard(|| {
        let s = get(series)?;
        let o = out(out_record)?;
        let r = s.0.records.get(index).ok_or_else(|| {
            Fail(CdaStatus::OutOfRange, format!("record {index} of {}", s.0.len()))
        })?;
        *o = CdaRecord {
            step: r.step,
            time: r.time,
            l2_error: r.l2_error,
            h1_error: r.h1_error,
        };
        Ok(())
    })
}

/// Writes the series as `step,time,l2_error,h1_error` CSV.
///
/// # Safety
/// `series` must come from this library; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cda_series_write_csv(series: *const CdaSeries, path: *const c_char) -> CdaStatus {
    guard(|| {
        let s = get(series)?;
        s.0.write_csv(&path_arg(path)?)?;
        Ok(())
    })
}

/// Exponential rate, plateau and onset of an error series.
///
/// # Safety
/// `series` must come from this library; `out_fit` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_series_decay(series: *const CdaSeries, out_fit: *mut CdaDecayFit) -> CdaStatus {
    guard(|| {
        let s = get(series)?;
        let o = out(out_fit)?;
        let fit = decay_analysis(&s.0)?;
        *o = CdaDecayFit {
            log_slope: fit.log_slope,
            plateau: fit.plateau,
            onset_step: fit.onset_step,
        };
        Ok(())
    })
}

/// # Safety
/// `series` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cda_series_free(series: *mut CdaSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Observed orders between consecutive rows; `out_rates` receives `n - 1` values.
///
/// # Safety
/// `resolutions` and `errors` must hold `n` values, `out_rates` room for `n - 1`.
#[no_mangle]
pub unsafe extern "C" fn cda_convergence_rates(
    resolutions: *const f64,
    errors: *const f64,
    n: usize,
    out_rates: *mut f64,
) -> CdaStatus {
    guard(|| {
        if resolutions.is_null() || errors.is_null() || out_rates.is_null() {
            return Err(null());
        }
        let r = std::slice::from_raw_parts(resolutions, n);
        let e = std::slice::from_raw_parts(errors, n);
        let rows: Vec<(f64, f64)> = r.iter().copied().zip(e.iter().copied()).collect();
        let rates = convergence_rates(&rows)?.rates();
        std::slice::from_raw_parts_mut(out_rates, rates.len()).copy_from_slice(&rates);
        Ok(())
    })
}

/// Loads and validates a TOML experiment config.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_config` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_config_load(path: *const c_char, out_config: *mut *mut CdaConfig) -> CdaStatus {
    guard(|| {
        let o = out(out_config)?;
        let cfg = ExperimentConfig::load(&path_arg(path)?)?;
        *o = Box::into_raw(Box::new(CdaConfig(cfg)));
        Ok(())
    })
}

/// Overrides the output directory of a loaded config.
///
/// # Safety
/// `config` must come from [`cda_config_load`]; `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cda_config_set_output(config: *mut CdaConfig, dir: *const c_char) -> CdaStatus {
    guard(|| {
        let c = out(config)?;
        c.0.output.dir = path_arg(dir)?;
        Ok(())
    })
}

/// # Safety
/// `config` must come from [`cda_config_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cda_config_free(config: *mut CdaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs every point of the config's sweep and writes its artifacts.
///
/// # Safety
/// `config` must come from [`cda_config_load`]; `out_manifest` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_config_run(config: *const CdaConfig, out_manifest: *mut *mut CdaManifest) -> CdaStatus {
    guard(|| {
        let c = get(config)?;
        let o = out(out_manifest)?;
        *o = Box::into_raw(Box::new(CdaManifest(run_experiment(&c.0)?)));
        Ok(())
    })
}

/// # Safety
/// `manifest` must come from [`cda_config_run`].
#[no_mangle]
pub unsafe extern "C" fn cda_manifest_run_count(manifest: *const CdaManifest, out_count: *mut usize) -> CdaStatus {
    guard(|| {
        *out(out_count)? = get(manifest)?.0.runs.len();
        Ok(())
    })
}

/// Final-time errors of run `index`.
///
/// # Safety
/// `manifest` must come from [`cda_config_run`]; the outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_manifest_run_errors(
    manifest: *const CdaManifest,
    index: usize,
    out_l2: *mut f64,
    out_h1: *mut f64,
) -> CdaStatus {
    guard(|| {
        let m = get(manifest)?;
        let (l2, h1) = (out(out_l2)?, out(out_h1)?);
        let r = m.0.runs.get(index).ok_or_else(|| {
            Fail(CdaStatus::OutOfRange, format!("run {index} of {}", m.0.runs.len()))
        })?;
        *l2 = r.final_l2;
        *h1 = r.final_h1;
        Ok(())
    })
}

/// # Safety
/// `manifest` must come from [`cda_config_run`] or be null.
#[no_mangle]
pub unsafe extern "C" fn cda_manifest_free(manifest: *mut CdaManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

/// Runs the property suite; counts are written to the outputs.
///
/// # Safety
/// The outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cda_verify_properties(seed: u64, out_passed: *mut usize, out_total: *mut usize) -> CdaStatus {
    guard(|| {
        let (p, t) = (out(out_passed)?, out(out_total)?);
        let checks = verify_all(seed)?;
        *p = checks.iter().filter(|c| c.passed).count();
        *t = checks.len();
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last() -> String {
        unsafe { CStr::from_ptr(cda_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn null_arguments_are_reported() {
        let s = unsafe { cda_heat_case_new(8, std::ptr::null_mut()) };
        assert_eq!(s, CdaStatus::NullPointer);
        assert!(last().contains("null"));
        let mut len = 0;
        assert_eq!(unsafe { cda_series_len(std::ptr::null(), &mut len) }, CdaStatus::NullPointer);
    }

    #[test]
    fn error_classes_map_to_status() {
        assert_eq!(status_of(&Error::NotSpd), CdaStatus::Numerical);
        assert_eq!(status_of(&Error::Config("x".into())), CdaStatus::InvalidInput);
        let io = Error::Io {
            path: "p".into(),
            source: std::io::Error::other("x"),
        };
        assert_eq!(status_of(&io), CdaStatus::Io);
    }

    #[test]
    fn panics_stop_at_the_boundary() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, CdaStatus::Panic);
        assert!(last().contains("boom"));
        assert_eq!(guard(|| Ok(())), CdaStatus::Ok);
        assert!(last().is_empty());
    }

    #[test]
    fn rates_through_the_c_interface() {
        let r = [1.0 / 32.0, 1.0 / 64.0];
        let e = [4.690e-4, 4.947e-5];
        let mut rate = [0.0];
        let s = unsafe { cda_convergence_rates(r.as_ptr(), e.as_ptr(), 2, rate.as_mut_ptr()) };
        assert_eq!(s, CdaStatus::Ok);
        assert!((rate[0] - 3.245).abs() < 1e-3);
        let s = unsafe { cda_convergence_rates(r.as_ptr(), e.as_ptr(), 1, rate.as_mut_ptr()) };
        assert_eq!(s, CdaStatus::InvalidInput);
    }
}
