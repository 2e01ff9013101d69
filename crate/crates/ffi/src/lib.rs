//! C ABI over the `deepcent` library.
//!
//! Every fallible function returns a [`DcStatus`]; on failure the message is
//! available from [`dc_last_error_message`] on the same thread. Handles are
//! opaque and owned by the caller, who releases them with the matching
//! `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use deepcent::bench::default_deepcent_config;
use deepcent::data::{load_csv, Mode};
use deepcent::io::AnyModel;
use deepcent::metrics::harrell_c;
use deepcent::models::{train_competing, train_single, CrDeepCentConfig};
use deepcent::sim::{calibrate_theta, CrSimConfig, Design, SimConfig};
use deepcent::weibull::{fit_weibull, CrWeibullModel};
use deepcent::{Dataset, Error, SurvivalModel};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    IoError = 5,
    Panic = 6,
}

/// Opaque dataset handle.
pub struct DcDataset(Dataset);

/// Opaque fitted-model handle.
pub struct DcModel(AnyModel);

/// Training options; obtain defaults from [`dc_train_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcTrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DcStatus {
    match e {
        Error::Config(_) => DcStatus::InvalidArgument,
        Error::Io(_) => DcStatus::IoError,
        Error::Numerical { .. } | Error::Training(_) | Error::Fit(_) | Error::Calibration { .. } => {
            DcStatus::NumericalError
        }
        _ => DcStatus::DataError,
    }
}

fn fail(status: DcStatus, msg: impl Into<String>) -> DcStatus {
    set_error(msg.into());
    status
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), DcStatus>>(f: F) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(DcStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, DcStatus>;
}

impl<T> OrStatus<T> for deepcent::Result<T> {
    fn or_status(self) -> Result<T, DcStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, DcStatus> {
    if p.is_null() {
        return Err(fail(DcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), DcStatus> {
    if p.is_null() {
        Err(fail(DcStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Read a dataset CSV (`time`, `event`, covariate columns).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_dataset_load_csv(path: *const c_char, out: *mut *mut DcDataset) -> DcStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = cstr(path, "path")?;
        let ds = load_csv(path).or_status()?;
        *out = Box::into_raw(Box::new(DcDataset(ds)));
        Ok(())
    })
}

/// Simulate from the built-in design. `competing` selects the two-cause
/// generator; `censoring` is the target censoring proportion in `[0, 1)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dc_dataset_simulate(
    competing: bool,
    n: usize,
    censoring: f64,
    seed: u64,
    out: *mut *mut DcDataset,
) -> DcStatus {
    guard(|| {
        non_null(out, "out")?;
        if !(0.0..1.0).contains(&censoring) {
            return Err(fail(DcStatus::InvalidArgument, "censoring outside [0, 1)"));
        }
        let design = if competing {
            Design::Competing(CrSimConfig::standard(n, f64::INFINITY, seed))
        } else {
            Design::Noncompeting(SimConfig::standard(n, f64::INFINITY, seed))
        };
        let theta = if censoring == 0.0 {
            f64::INFINITY
        } else {
            calibrate_theta(&design, censoring, 0.005).or_status()?
        };
        let ds = design.with_theta(theta).simulate().or_status()?;
        *out = Box::into_raw(Box::new(DcDataset(ds)));
        Ok(())
    })
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_dataset_len(ds: *const DcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_dataset_n_covariates(ds: *const DcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_covariates())
}

/// Copy the covariate matrix (row-major, `len × n_covariates`) into `out`.
///
/// # Safety
/// `out` must hold `len * n_covariates` doubles.
#[no_mangle]
pub unsafe extern "C" fn dc_dataset_covariates(ds: *const DcDataset, out: *mut f64) -> DcStatus {
    guard(|| {
        non_null(ds, "dataset")?;
        non_null(out, "out")?;
        let x = (*ds).0.covariates();
        for (i, v) in x.iter().enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_dataset_free(ds: *mut DcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

#[no_mangle]
pub extern "C" fn dc_train_options_default() -> DcTrainOptions {
    let d = default_deepcent_config();
    DcTrainOptions {
        epochs: d.epochs,
        learning_rate: d.learning_rate,
        dropout: d.dropout,
        seed: 0,
    }
}

/// Fit `method` (`deepcent`, `rankdeepsurv-loss`, `weibull`, `cr-deepcent`,
/// `cr-weibull`) on `ds`. `options` may be null for defaults; Weibull methods
/// ignore it.
///
/// # Safety
/// Pointers must be valid; `method` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_train(
    ds: *const DcDataset,
    method: *const c_char,
    options: *const DcTrainOptions,
    out: *mut *mut DcModel,
) -> DcStatus {
    guard(|| {
        non_null(ds, "dataset")?;
        non_null(out, "out")?;
        let method: deepcent::bench::Method = cstr(method, "method")?.parse().or_status()?;
        let opts = options.as_ref().copied().unwrap_or_else(|| dc_train_options_default());
        let data = &(*ds).0;
        let data = if method.mode() == Mode::Competing && data.mode() == Mode::Noncompeting {
            data.clone().with_mode(Mode::Competing).or_status()?
        } else {
            data.clone()
        };
        let names = data.covariate_names().to_vec();
        use deepcent::bench::Method as M;
        let model = match method {
            M::Deepcent | M::RankdeepsurvLoss => {
                let base = if method == M::Deepcent {
                    default_deepcent_config()
                } else {
                    deepcent::bench::default_rankdeepsurv_config()
                };
                let cfg = deepcent::models::DeepCentConfig {
                    epochs: opts.epochs,
                    learning_rate: opts.learning_rate,
                    dropout: opts.dropout,
                    seed: opts.seed,
                    ..base
                };
                AnyModel::Deepcent(train_single(&data, &cfg).or_status()?)
            }
            M::CrDeepcent => {
                let cfg = CrDeepCentConfig {
                    epochs: opts.epochs,
                    learning_rate: opts.learning_rate,
                    dropout: opts.dropout,
                    seed: opts.seed,
                    ..CrDeepCentConfig::default()
                };
                AnyModel::CrDeepcent(train_competing(&data, &cfg).or_status()?)
            }
            M::Weibull => AnyModel::Weibull {
                model: fit_weibull(&data).or_status()?,
                covariate_names: names,
            },
            M::CrWeibull => AnyModel::CrWeibull {
                model: CrWeibullModel::fit(&data).or_status()?,
                covariate_names: names,
            },
        };
        *out = Box::into_raw(Box::new(DcModel(model)));
        Ok(())
    })
}

/// Number of prediction columns: 1 (single risk) or 2 (competing).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_model_n_causes(model: *const DcModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.mode().causes().len())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_model_n_covariates(model: *const DcModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.covariate_width())
}

/// Predict for `n_rows` covariate rows (row-major `x`). Writes
/// `n_rows * n_causes` values to `out`, cause-major: all cause-1 predictions
/// followed by all cause-2 predictions.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles and `out` `n_rows * n_causes`.
#[no_mangle]
pub unsafe extern "C" fn dc_model_predict(
    model: *const DcModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> DcStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        if n_rows > 0 {
            non_null(x, "x")?;
        }
        let values = if n_rows == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(x, n_rows * n_cols).to_vec()
        };
        let x = ndarray::Array2::from_shape_vec((n_rows, n_cols), values)
            .map_err(|e| fail(DcStatus::InvalidArgument, e.to_string()))?;
        let preds = (*model).0.predict_all(x.view()).or_status()?;
        for (k, cause) in preds.iter().enumerate() {
            for (i, v) in cause.iter().enumerate() {
                *out.add(k * n_rows + i) = *v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dc_model_save(model: *const DcModel, path: *const c_char) -> DcStatus {
    guard(|| {
        non_null(model, "model")?;
        let path = cstr(path, "path")?;
        (*model).0.save(path).or_status()
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_load(path: *const c_char, out: *mut *mut DcModel) -> DcStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = cstr(path, "path")?;
        let m = AnyModel::load(path).or_status()?;
        *out = Box::into_raw(Box::new(DcModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_model_free(model: *mut DcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Harrell's C-index for `cause` over `n` records.
///
/// # Safety
/// `y`, `delta` and `yhat` must each hold `n` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dc_harrell_c(
    y: *const f64,
    delta: *const u8,
    yhat: *const f64,
    n: usize,
    cause: u8,
    out: *mut f64,
) -> DcStatus {
    guard(|| {
        non_null(y, "y")?;
        non_null(delta, "delta")?;
        non_null(yhat, "yhat")?;
        non_null(out, "out")?;
        let y = std::slice::from_raw_parts(y, n);
        let d = std::slice::from_raw_parts(delta, n);
        let p = std::slice::from_raw_parts(yhat, n);
        *out = harrell_c(y, d, p, cause).or_status()?;
        Ok(())
    })
}
