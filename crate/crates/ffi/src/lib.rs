//! C ABI over the `tailex` estimators.
//!
//! Every fallible function returns a [`TailexStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`tailex_last_error`] on the same thread until the next call. Heap
//! objects are handed out as opaque handles and must be released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tailex::empirical::{estimate_pdf, Binning};
use tailex::qgaussian::{fit_qgaussian, qgaussian_pdf, QGaussianOptions};
use tailex::regression::{ols, RegressionFit};
use tailex::synth::{gen_pareto, gen_student_t};
use tailex::tail::{fit_tail, ks_statistic, mle_alpha, Sign, TailOptions};
use tailex::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailexStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    Degenerate = 4,
    Collinear = 5,
    Consistency = 6,
    Io = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailexSign {
    Positive = 0,
    Negative = 1,
}

impl From<TailexSign> for Sign {
    fn from(s: TailexSign) -> Self {
        match s {
            TailexSign::Positive => Sign::Positive,
            TailexSign::Negative => Sign::Negative,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TailexTailOptions {
    pub min_tail: usize,
    pub max_candidates: usize,
    pub discrete_shift: bool,
    /// Bootstrap draws for the goodness-of-fit p-value; 0 disables it.
    pub gof_bootstrap: usize,
    pub seed: u64,
}

impl From<TailexTailOptions> for TailOptions {
    fn from(o: TailexTailOptions) -> Self {
        TailOptions {
            min_tail: o.min_tail,
            max_candidates: o.max_candidates,
            discrete_shift: o.discrete_shift,
            gof_bootstrap: (o.gof_bootstrap > 0).then_some(o.gof_bootstrap),
            seed: o.seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TailexTailFit {
    pub r_min: f64,
    pub alpha: f64,
    pub n_tail: usize,
    pub ks: f64,
    pub std_error: f64,
    pub thin_tail_warning: bool,
    /// NaN when no bootstrap was requested.
    pub gof_p_value: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TailexQGaussianFit {
    pub alpha: f64,
    pub scale: f64,
    pub objective: f64,
    pub converged: bool,
    pub n_bins_used: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TailexCoefficient {
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// Half-width of the 95% confidence interval.
    pub half_width: f64,
}

/// Owned sample of `f64` values.
pub struct TailexSeries(Vec<f64>);

/// Fitted least-squares model.
pub struct TailexOls(RegressionFit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TailexStatus {
    match err {
        Error::Stage { source, .. } => status_of(source),
        Error::InvalidParameter(_) | Error::Config(_) | Error::InvalidCalendar(_) => {
            TailexStatus::InvalidArgument
        }
        Error::InsufficientData { .. } | Error::EmptySeries(_) => TailexStatus::InsufficientData,
        Error::Degenerate(_) => TailexStatus::Degenerate,
        Error::CollinearDesign => TailexStatus::Collinear,
        Error::Consistency(_) => TailexStatus::Consistency,
        Error::Io(_) | Error::File { .. } | Error::Csv(_) | Error::Json(_) => TailexStatus::Io,
        _ => TailexStatus::Other,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, recording any error or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TailexStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TailexStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            TailexStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_last_error(msg);
            TailexStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            TailexStatus::Panic
        }
    }
}

/// # Safety
/// `data` must be null or point to `len` readable values.
unsafe fn slice<'a>(
    data: *const f64,
    len: usize,
    what: &'static str,
) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// # Safety
/// `out` must be null or valid for writes.
unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn tailex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn tailex_status_str(status: TailexStatus) -> *const c_char {
    let s: &'static CStr = match status {
        TailexStatus::Ok => c"ok",
        TailexStatus::NullPointer => c"null pointer",
        TailexStatus::InvalidArgument => c"invalid argument",
        TailexStatus::InsufficientData => c"insufficient data",
        TailexStatus::Degenerate => c"degenerate data",
        TailexStatus::Collinear => c"collinear design",
        TailexStatus::Consistency => c"consistency check failed",
        TailexStatus::Io => c"i/o error",
        TailexStatus::Panic => c"internal panic",
        TailexStatus::Other => c"error",
    };
    s.as_ptr()
}

#[no_mangle]
pub extern "C" fn tailex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn tailex_tail_options_default() -> TailexTailOptions {
    let d = TailOptions::default();
    TailexTailOptions {
        min_tail: d.min_tail,
        max_candidates: d.max_candidates,
        discrete_shift: d.discrete_shift,
        gof_bootstrap: d.gof_bootstrap.unwrap_or(0),
        seed: d.seed,
    }
}

/// Tail exponent of the magnitudes in `tail` at a fixed `r_min`.
///
/// # Safety
/// `tail` must point to `len` values and `out_alpha` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailex_mle_alpha(
    tail: *const f64,
    len: usize,
    r_min: f64,
    discrete_shift: bool,
    out_alpha: *mut f64,
) -> TailexStatus {
    guard(|| {
        let x = slice(tail, len, "tail")?;
        write(out_alpha, mle_alpha(x, r_min, discrete_shift)?, "out_alpha")
    })
}

/// # Safety
/// `tail` must point to `len` values and `out_ks` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailex_ks_statistic(
    tail: *const f64,
    len: usize,
    r_min: f64,
    alpha: f64,
    out_ks: *mut f64,
) -> TailexStatus {
    guard(|| {
        let x = slice(tail, len, "tail")?;
        write(out_ks, ks_statistic(x, r_min, alpha)?, "out_ks")
    })
}

/// Cutoff scan and exponent for one side of `sample`. `options` may be null
/// for the defaults.
///
/// # Safety
/// `sample` must point to `len` values, `options` must be null or valid and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailex_fit_tail(
    sample: *const f64,
    len: usize,
    sign: TailexSign,
    options: *const TailexTailOptions,
    out: *mut TailexTailFit,
) -> TailexStatus {
    guard(|| {
        let x = slice(sample, len, "sample")?;
        let opts: TailOptions = options
            .as_ref()
            .map_or_else(TailOptions::default, |o| (*o).into());
        let fit = fit_tail(x, sign.into(), &opts)?;
        let value = TailexTailFit {
            r_min: fit.r_min,
            alpha: fit.alpha,
            n_tail: fit.n_tail,
            ks: fit.ks,
            std_error: fit.stderr,
            thin_tail_warning: fit.thin_tail_warning,
            gof_p_value: fit.gof_p_value.unwrap_or(f64::NAN),
        };
        write(out, value, "out")
    })
}

/// # Safety
/// `out_density` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailex_qgaussian_pdf(
    r: f64,
    alpha: f64,
    scale: f64,
    out_density: *mut f64,
) -> TailexStatus {
    guard(|| write(out_density, qgaussian_pdf(r, alpha, scale)?, "out_density"))
}

/// Bins `sample` on the default hybrid grid and fits the q-Gaussian to the
/// resulting density.
///
/// # Safety
/// `sample` must point to `len` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailex_fit_qgaussian(
    sample: *const f64,
    len: usize,
    unit_variance: bool,
    out: *mut TailexQGaussianFit,
) -> TailexStatus {
    guard(|| {
        let x = slice(sample, len, "sample")?;
        let pdf = estimate_pdf(x, &Binning::default())?;
        let fit = fit_qgaussian(&pdf, &QGaussianOptions { unit_variance })?;
        let value = TailexQGaussianFit {
            alpha: fit.alpha,
            scale: fit.scale,
            objective: fit.objective,
            converged: fit.converged,
            n_bins_used: fit.n_bins_used,
        };
        write(out, value, "out")
    })
}

/// Least squares of `y` on an intercept and the `k` columns of the
/// row-major `n × k` matrix `x`.
///
/// # Safety
/// `x` must point to `n·k` values, `y` to `n` values, and `out` must be
/// writable. The handle written to `out` must be released with
/// [`tailex_ols_free`].
#[no_mangle]
pub unsafe extern "C" fn tailex_ols_fit(
    x: *const f64,
    n: usize,
    k: usize,
    y: *const f64,
    out: *mut *mut TailexOls,
) -> TailexStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let cells = n
            .checked_mul(k)
            .ok_or_else(|| Failure::Invalid(format!("design size {n} x {k} overflows")))?;
        let x = slice(x, cells, "x")?;
        let y = slice(y, n, "y")?;
        let columns: Vec<Vec<f64>> = (0..k)
            .map(|j| (0..n).map(|i| x[i * k + j]).collect())
            .collect();
        let names: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();
        let predictors: Vec<(&str, &[f64])> = names
            .iter()
            .zip(&columns)
            .map(|(n, c)| (n.as_str(), c.as_slice()))
            .collect();
        let fit = ols(&predictors, y)?;
        out.write(Box::into_raw(Box::new(TailexOls(fit))));
        Ok(())
    })
}

/// Number of coefficients including the intercept; 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tailex_ols_coefficient_count(fit: *const TailexOls) -> usize {
    fit.as_ref().map_or(0, |f| f.0.coefficients.len())
}

/// Coefficient `index`, with 0 the intercept.
///
/// # Safety
/// `fit` must be null or a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tailex_ols_coefficient(
    fit: *const TailexOls,
    index: usize,
    out: *mut TailexCoefficient,
) -> TailexStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or(Failure::Null("fit"))?;
        let c = fit.0.coefficients.get(index).ok_or_else(|| {
            Failure::Invalid(format!(
                "coefficient {index} out of range (have {})",
                fit.0.coefficients.len()
            ))
        })?;
        let value = TailexCoefficient {
            estimate: c.estimate,
            std_error: c.std_error,
            t_stat: c.t_stat,
            p_value: c.p_value,
            half_width: c.half_width,
        };
        write(out, value, "out")
    })
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tailex_ols_r_squared(fit: *const TailexOls) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.r_squared)
}

/// Residual degrees of freedom.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tailex_ols_df(fit: *const TailexOls) -> usize {
    fit.as_ref().map_or(0, |f| f.0.df)
}

/// # Safety
/// `fit` must be null or a handle from [`tailex_ols_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tailex_ols_free(fit: *mut TailexOls) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

unsafe fn emit_series(values: Vec<f64>, out: *mut *mut TailexSeries) -> Result<(), Failure> {
    write(out, Box::into_raw(Box::new(TailexSeries(values))), "out")
}

/// `n` Pareto(`alpha`, `r_min`) variates from `seed`.
///
/// # Safety
/// `out` must be writable; release the handle with [`tailex_series_free`].
#[no_mangle]
pub unsafe extern "C" fn tailex_gen_pareto(
    alpha: f64,
    r_min: f64,
    n: usize,
    seed: u64,
    out: *mut *mut TailexSeries,
) -> TailexStatus {
    guard(|| emit_series(gen_pareto(alpha, r_min, n, seed)?, out))
}

/// `n` Student-t variates on `df` degrees of freedom from `seed`.
///
/// # Safety
/// `out` must be writable; release the handle with [`tailex_series_free`].
#[no_mangle]
pub unsafe extern "C" fn tailex_gen_student_t(
    df: f64,
    n: usize,
    seed: u64,
    out: *mut *mut TailexSeries,
) -> TailexStatus {
    guard(|| emit_series(gen_student_t(df, n, seed)?, out))
}

/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tailex_series_len(series: *const TailexSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// Borrowed pointer to the values, valid until the handle is freed.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tailex_series_data(series: *const TailexSeries) -> *const f64 {
    series.as_ref().map_or(ptr::null(), |s| s.0.as_ptr())
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tailex_series_free(series: *mut TailexSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}
