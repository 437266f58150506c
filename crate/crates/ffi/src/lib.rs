//! C interface to gapcast.
//!
//! Every function returns a [`GcStatus`]. On failure the message is kept in
//! thread-local storage and can be read with [`gc_last_error`]. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gapcast::dataset::{read_canonical, synthesize, write_canonical, SynthConfig, TimeSeriesTable, DEFAULT_FILL};
use gapcast::features::{build_supervised, split_point, FeatureConfig, TargetKind};
use gapcast::forest::PredictionDistribution;
use gapcast::learner::{LearnerParams, TrainedModel};
use gapcast::pipeline::{self, lag_specs, Forecast, ModelBundle, Rows};
use gapcast::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UsageError = 3,
    DataError = 4,
    NumericError = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcRows {
    Train = 0,
    Test = 1,
    All = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GcMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub nrmse_percent: f64,
    pub max_error: f64,
    pub n_samples: usize,
}

pub struct GcTable(TimeSeriesTable);
pub struct GcModel(ModelBundle);
pub struct GcForecast(Forecast, TargetKind);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Status(GcStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn fail<T>(status: GcStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Status(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            GcStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(format!("{}: {e}", e.kind()));
            match e.class() {
                ErrorClass::Usage => GcStatus::UsageError,
                ErrorClass::Data => GcStatus::DataError,
                ErrorClass::Numeric => GcStatus::NumericError,
            }
        }
        Err(_) => {
            set_error("internal panic".into());
            GcStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(GcStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(GcStatus::NullPointer, format!("{what} is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(s),
        Err(_) => fail(GcStatus::InvalidArgument, format!("{what} is not UTF-8")),
    }
}

unsafe fn give<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(GcStatus::NullPointer, "output handle is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, capacity: usize, written: *mut usize) -> Result<(), Failure> {
    if !written.is_null() {
        *written = values.len();
    }
    if values.len() > capacity {
        return fail(GcStatus::BufferTooSmall, format!("need {} values, buffer holds {capacity}", values.len()));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return fail(GcStatus::NullPointer, "buffer is null");
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// tables

/// Synthetic market table with `hours` hourly rows.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_table_synthesize(hours: usize, seed: u64, out: *mut *mut GcTable) -> GcStatus {
    guard(|| give(out, GcTable(synthesize(&SynthConfig { hours, seed, ..SynthConfig::default() })?)))
}

/// Reads a canonical table written by `gapcast ingest` or `gapcast synth`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_table_read(path: *const c_char, out: *mut *mut GcTable) -> GcStatus {
    guard(|| {
        let (table, _) = read_canonical(Path::new(text(path, "path")?))?;
        give(out, GcTable(table))
    })
}

/// # Safety
/// `table` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gc_table_write(table: *const GcTable, path: *const c_char) -> GcStatus {
    guard(|| {
        let t = borrow(table, "table")?;
        Ok(write_canonical(&t.0, Path::new(text(path, "path")?), DEFAULT_FILL)?)
    })
}

/// # Safety
/// `table` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gc_table_free(table: *mut GcTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_table_shape(table: *const GcTable, rows: *mut usize, columns: *mut usize) -> GcStatus {
    guard(|| {
        let t = borrow(table, "table")?;
        if rows.is_null() || columns.is_null() {
            return fail(GcStatus::NullPointer, "shape output is null");
        }
        *rows = t.0.len();
        *columns = t.0.columns.len();
        Ok(())
    })
}

/// Copies one column into `buf`. `written` receives the column length even
/// when the buffer is too small.
///
/// # Safety
/// `buf` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_table_column(
    table: *const GcTable,
    name: *const c_char,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> GcStatus {
    guard(|| {
        let t = borrow(table, "table")?;
        let values = t.0.values(text(name, "name")?)?;
        copy_out(values, buf, capacity, written)
    })
}

// ---------------------------------------------------------------------------
// models

/// Trains on `table` with the default feature menu. `params_json` is a
/// learner parameter object such as `{"learner":"lasso","lambda":0.001}`.
///
/// # Safety
/// Pointers must be valid and strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gc_model_train(table: *const GcTable, params_json: *const c_char, out: *mut *mut GcModel) -> GcStatus {
    guard(|| {
        let t = borrow(table, "table")?;
        let params: LearnerParams = match serde_json::from_str(text(params_json, "params_json")?) {
            Ok(p) => p,
            Err(e) => return Err(Error::BadConfig(e.to_string()).into()),
        };
        let (bundle, _) = pipeline::train(&t.0, &FeatureConfig::default(), &params)?;
        give(out, GcModel(bundle))
    })
}

/// Loads a `model.json` written by `gapcast train`.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn gc_model_load(path: *const c_char, out: *mut *mut GcModel) -> GcStatus {
    guard(|| {
        let p = Path::new(text(path, "path")?);
        let body = std::fs::read_to_string(p).map_err(Error::from)?;
        match serde_json::from_str(&body) {
            Ok(bundle) => give(out, GcModel(bundle)),
            Err(e) => fail(GcStatus::DataError, format!("{}: {e}", p.display())),
        }
    })
}

/// # Safety
/// `model` must be valid and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gc_model_save(model: *const GcModel, path: *const c_char) -> GcStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let p = Path::new(text(path, "path")?);
        let body = serde_json::to_string_pretty(&m.0).map_err(|e| Error::BadConfig(e.to_string()))?;
        std::fs::write(p, body).map_err(Error::from)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gc_model_free(model: *mut GcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts the selected rows of `table` in $/MWh.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_model_forecast(
    model: *const GcModel,
    table: *const GcTable,
    rows: GcRows,
    out: *mut *mut GcForecast,
) -> GcStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let t = borrow(table, "table")?;
        let rows = match rows {
            GcRows::Train => Rows::Train,
            GcRows::Test => Rows::Test,
            GcRows::All => Rows::All,
        };
        give(out, GcForecast(m.0.forecast(&t.0, rows)?, m.0.features.target))
    })
}

/// Per-tree predictions in $/MWh for test row `offset` of `table`, and the
/// share of them within `delta` of `center`. Forest models only.
///
/// # Safety
/// `buf` must hold `capacity` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_forest_distribution(
    model: *const GcModel,
    table: *const GcTable,
    offset: usize,
    center: f64,
    delta: f64,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
    prob_within: *mut f64,
) -> GcStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        let t = borrow(table, "table")?;
        let TrainedModel::Forest(forest) = &m.model else {
            return fail(GcStatus::InvalidArgument, "not a forest model");
        };
        let ds = build_supervised(&t.0, &lag_specs(&m.features, m.learner, &t.0), m.features.target)?;
        let row = split_point(ds.len(), m.features.train_fraction)? + offset;
        if row >= ds.len() {
            return fail(GcStatus::InvalidArgument, format!("offset {offset} is past the last test row"));
        }
        let x = m.feature_scaler.transform(&ds.features.slice_rows(row, row + 1))?;
        let scaled = forest.predict_distribution(x.row(0), 1)?;
        let dist = PredictionDistribution::from_outputs(m.target_scaler.inverse_vector(&scaled.tree_outputs), 1)?;
        if !prob_within.is_null() {
            *prob_within = dist.prob_within(center, delta);
        }
        copy_out(&dist.tree_outputs, buf, capacity, written)
    })
}

// ---------------------------------------------------------------------------
// forecasts

/// # Safety
/// `forecast` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn gc_forecast_free(forecast: *mut GcForecast) {
    if !forecast.is_null() {
        drop(Box::from_raw(forecast));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_forecast_len(forecast: *const GcForecast, len: *mut usize) -> GcStatus {
    guard(|| {
        let f = borrow(forecast, "forecast")?;
        if len.is_null() {
            return fail(GcStatus::NullPointer, "len is null");
        }
        *len = f.0.actual.len();
        Ok(())
    })
}

/// Copies actual and predicted values; both buffers hold `capacity` doubles.
///
/// # Safety
/// Buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn gc_forecast_values(
    forecast: *const GcForecast,
    actual: *mut f64,
    predicted: *mut f64,
    capacity: usize,
) -> GcStatus {
    guard(|| {
        let f = &borrow(forecast, "forecast")?.0;
        copy_out(&f.actual, actual, capacity, ptr::null_mut())?;
        copy_out(&f.predicted, predicted, capacity, ptr::null_mut())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gc_forecast_metrics(forecast: *const GcForecast, out: *mut GcMetrics) -> GcStatus {
    guard(|| {
        let f = borrow(forecast, "forecast")?;
        if out.is_null() {
            return fail(GcStatus::NullPointer, "metrics output is null");
        }
        let r = f.0.metrics(f.1)?;
        *out = GcMetrics { mae: r.mae, rmse: r.rmse, nrmse_percent: r.nrmse_percent, max_error: r.max_error, n_samples: r.n_samples };
        Ok(())
    })
}
