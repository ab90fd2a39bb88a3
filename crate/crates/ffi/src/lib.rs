//! C ABI over the core library.
//!
//! Objects cross the boundary as opaque heap handles created by a `*_new`
//! style function and released by the matching `*_free`. Every fallible call
//! returns a [`LoggasStatus`]; on failure the message is kept per thread and
//! can be read with [`loggas_last_error_message`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use loggas::clt::{linear_statistic, predict, Prediction};
use loggas::equilibrium::{build_equilibrium, Equilibrium, Potential, WORKING_INTERVAL};
use loggas::master::{invert_theta, InversionData};
use loggas::sampler::sample_gbe;
use loggas::{ChebSeries, Error, FunctionSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoggasStatus {
    Ok = 0,
    RejectedInput = 1,
    SupportNotNormalized = 2,
    CriticalOrMultiCut = 3,
    EulerLagrange = 4,
    NoOneCutNormalization = 5,
    NearCriticalEdge = 6,
    InversionResidual = 7,
    OutlierConfiguration = 8,
    FreenessViolated = 9,
    Collision = 10,
    EigenNoConvergence = 11,
    Config = 12,
    BatchFormat = 13,
    Io = 14,
    Json = 15,
    /// A null pointer or non-UTF-8 string was passed.
    InvalidArgument = 16,
    Panic = 99,
}

impl LoggasStatus {
    fn of(err: &Error) -> Self {
        match err.code() {
            "rejected_input" => Self::RejectedInput,
            "support_not_normalized" => Self::SupportNotNormalized,
            "critical_or_multi_cut" => Self::CriticalOrMultiCut,
            "euler_lagrange" => Self::EulerLagrange,
            "no_one_cut_normalization" => Self::NoOneCutNormalization,
            "near_critical_edge" => Self::NearCriticalEdge,
            "inversion_residual" => Self::InversionResidual,
            "outlier_configuration" => Self::OutlierConfiguration,
            "freeness_violated" => Self::FreenessViolated,
            "collision" => Self::Collision,
            "eigen_no_convergence" => Self::EigenNoConvergence,
            "config" => Self::Config,
            "batch_format" => Self::BatchFormat,
            "io" => Self::Io,
            "json" => Self::Json,
            _ => Self::RejectedInput,
        }
    }
}

/// Equilibrium measure of a one-cut potential.
pub struct LoggasEquilibrium(Equilibrium);

/// Inverse of the master operator applied to one test function.
pub struct LoggasInversion(InversionData);

/// Limiting mean and covariance of a vector of linear statistics.
pub struct LoggasPrediction(Prediction);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(LoggasStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(LoggasStatus::of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(LoggasStatus::InvalidArgument, msg.to_string())
}

/// Run `body`, record any failure and convert it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LoggasStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            LoggasStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            LoggasStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref()
        .ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| invalid(&format!("{what} is null")))
}

fn parse_function(spec: &str) -> Result<ChebSeries, Failure> {
    Ok(spec.parse::<FunctionSpec>()?.to_series(WORKING_INTERVAL)?)
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding
/// the terminator; pass `len = 0` to query it.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn loggas_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static, NUL-terminated name of a status value, e.g. `"support_not_normalized"`;
/// `"unknown"` for values outside [`LoggasStatus`].
#[no_mangle]
pub extern "C" fn loggas_status_name(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"rejected_input",
        2 => c"support_not_normalized",
        3 => c"critical_or_multi_cut",
        4 => c"euler_lagrange",
        5 => c"no_one_cut_normalization",
        6 => c"near_critical_edge",
        7 => c"inversion_residual",
        8 => c"outlier_configuration",
        9 => c"freeness_violated",
        10 => c"collision",
        11 => c"eigen_no_convergence",
        12 => c"config",
        13 => c"batch_format",
        14 => c"io",
        15 => c"json",
        16 => c"invalid_argument",
        99 => c"panic",
        _ => c"unknown",
    };
    s.as_ptr()
}

/// Build the equilibrium of a potential spec such as `"poly:0,0,1"`, with
/// neighbourhood width `delta` (0.1 is the usual choice).
///
/// # Safety
/// `potential` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_equilibrium_new(
    potential: *const c_char,
    delta: f64,
    out: *mut *mut LoggasEquilibrium,
) -> LoggasStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let p = Potential::parse(read_str(potential, "potential")?)?;
        let eq = build_equilibrium(&p, delta)?;
        *out = Box::into_raw(Box::new(LoggasEquilibrium(eq)));
        Ok(())
    })
}

/// # Safety
/// `eq` must be null or a handle from [`loggas_equilibrium_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn loggas_equilibrium_free(eq: *mut LoggasEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Density of the equilibrium measure at `x`; zero off the support.
///
/// # Safety
/// `eq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_equilibrium_density(
    eq: *const LoggasEquilibrium,
    x: f64,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(eq, "eq")?.0.density(x);
        Ok(())
    })
}

/// Writes the `j/n` quantiles, `j = 1..=n`, into `out[0..n]`.
///
/// # Safety
/// `eq` must be a live handle; `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn loggas_equilibrium_quantiles(
    eq: *const LoggasEquilibrium,
    n: usize,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        let eq = handle(eq, "eq")?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let q = eq.0.quantiles(n);
        ptr::copy_nonoverlapping(q.as_ptr(), out, n);
        Ok(())
    })
}

/// Invert the master operator for the test function spec `xi` (e.g. `"cheb:0,0,1"`).
///
/// # Safety
/// `eq` must be a live handle, `xi` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_inversion_new(
    eq: *const LoggasEquilibrium,
    xi: *const c_char,
    out: *mut *mut LoggasInversion,
) -> LoggasStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let eq = handle(eq, "eq")?;
        let xi = parse_function(read_str(xi, "xi")?)?;
        *out = Box::into_raw(Box::new(LoggasInversion(invert_theta(&eq.0, &xi)?)));
        Ok(())
    })
}

/// # Safety
/// `inv` must be null or a handle from [`loggas_inversion_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn loggas_inversion_free(inv: *mut LoggasInversion) {
    if !inv.is_null() {
        drop(Box::from_raw(inv));
    }
}

/// The constant `c` with `Theta_V psi = xi + c`.
///
/// # Safety
/// `inv` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_inversion_constant(
    inv: *const LoggasInversion,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(inv, "inv")?.0.c_xi;
        Ok(())
    })
}

/// Largest round-trip residual measured on the neighbourhood of the support.
///
/// # Safety
/// `inv` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_inversion_residual(
    inv: *const LoggasInversion,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(inv, "inv")?.0.residual;
        Ok(())
    })
}

/// The solution `psi` at `x`.
///
/// # Safety
/// `inv` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_inversion_eval(
    inv: *const LoggasInversion,
    x: f64,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(inv, "inv")?.0.psi.eval(x);
        Ok(())
    })
}

/// Predicted limit for `count` test function specs at inverse temperature `beta`.
///
/// # Safety
/// `eq` must be a live handle, `xis` must point to `count` NUL-terminated
/// strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_prediction_new(
    eq: *const LoggasEquilibrium,
    xis: *const *const c_char,
    count: usize,
    beta: f64,
    out: *mut *mut LoggasPrediction,
) -> LoggasStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let eq = handle(eq, "eq")?;
        if xis.is_null() {
            return Err(invalid("xis is null"));
        }
        let series = (0..count)
            .map(|i| parse_function(read_str(*xis.add(i), "xis entry")?))
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(LoggasPrediction(predict(
            &series, &eq.0, beta, 1.0,
        )?)));
        Ok(())
    })
}

/// # Safety
/// `pred` must be null or a handle from [`loggas_prediction_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn loggas_prediction_free(pred: *mut LoggasPrediction) {
    if !pred.is_null() {
        drop(Box::from_raw(pred));
    }
}

/// Number of test functions in the prediction; 0 for a null handle.
///
/// # Safety
/// `pred` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn loggas_prediction_dim(pred: *const LoggasPrediction) -> usize {
    pred.as_ref().map_or(0, |p| p.0.dim())
}

/// Limiting mean of statistic `i`.
///
/// # Safety
/// `pred` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_prediction_mean(
    pred: *const LoggasPrediction,
    i: usize,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        let p = handle(pred, "pred")?;
        let m = p.0.m.get(i).ok_or_else(|| invalid("index out of range"))?;
        *out_ptr(out, "out")? = *m;
        Ok(())
    })
}

/// Limiting covariance entry `(i, j)`.
///
/// # Safety
/// `pred` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_prediction_covariance(
    pred: *const LoggasPrediction,
    i: usize,
    j: usize,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        let p = handle(pred, "pred")?;
        let c =
            p.0.c
                .get(i)
                .and_then(|row| row.get(j))
                .ok_or_else(|| invalid("index out of range"))?;
        *out_ptr(out, "out")? = *c;
        Ok(())
    })
}

/// Draw one Gaussian beta-ensemble configuration of size `n` (sorted) into `out[0..n]`.
///
/// # Safety
/// `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn loggas_sample_gbe(
    n: usize,
    beta: f64,
    seed: u64,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        let sample = sample_gbe(n, beta, seed)?;
        ptr::copy_nonoverlapping(sample.lambdas.as_ptr(), out, n);
        Ok(())
    })
}

/// Centered linear statistic `sum xi(lambda_i) - n int xi d mu_V`.
///
/// # Safety
/// `eq` must be a live handle, `xi` a NUL-terminated string, `lambdas` must
/// hold `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn loggas_linear_statistic(
    eq: *const LoggasEquilibrium,
    xi: *const c_char,
    lambdas: *const f64,
    n: usize,
    out: *mut f64,
) -> LoggasStatus {
    guard(|| {
        let eq = handle(eq, "eq")?;
        let xi = parse_function(read_str(xi, "xi")?)?;
        if lambdas.is_null() && n > 0 {
            return Err(invalid("lambdas is null"));
        }
        let l = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(lambdas, n)
        };
        *out_ptr(out, "out")? = linear_statistic(&xi, &eq.0, l);
        Ok(())
    })
}
