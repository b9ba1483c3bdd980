//! C ABI over the structure-selection library: opaque handles, status
//! codes, and a thread-local last-error message. The generated header
//! lands in `include/narxsel.h`.
//!
//! Conventions:
//! - Every fallible function returns a `Status`; results come back through
//!   out-pointers.
//! - Handles (`ModelSetHandle`, `DatasetHandle`) own heap objects and must
//!   be released with the matching `*_free`.
//! - Strings returned through out-pointers are NUL-terminated, UTF-8, and
//!   released with `narxsel_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use narxsel::datagen;
use narxsel::evo::GoalPoint;
use narxsel::mcdm;
use narxsel::narx::{generate_model_set, Dataset, ModelSet};
use narxsel::pipeline::{cmd_search, derive_seed, ArchiveDocument};
use narxsel::stats;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    /// A precondition on the arguments failed (including NULL pointers).
    InvalidArgument = 1,
    /// A file or string could not be parsed.
    ParseError = 2,
    /// The computation itself failed.
    RuntimeError = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let cleaned: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).ok();
    });
}

fn fail(status: Status, msg: &str) -> Status {
    set_error(msg);
    status
}

fn from_error(e: &narxsel::Error) -> Status {
    let status = match e {
        narxsel::Error::InvalidArgument(_) | narxsel::Error::Config { .. } => {
            Status::InvalidArgument
        }
        narxsel::Error::Parse { .. } | narxsel::Error::Json(_) | narxsel::Error::Csv(_) => {
            Status::ParseError
        }
        _ => Status::RuntimeError,
    };
    set_error(&e.to_string());
    status
}

/// Most recent error message on this thread, or NULL when the last call
/// succeeded. The pointer stays valid until the next failing call on the
/// same thread; do not free it.
#[no_mangle]
pub extern "C" fn narxsel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(ptr::null())
    })
}

/// Frees a string returned through an out-pointer.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn narxsel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque candidate-term dictionary.
pub struct ModelSetHandle {
    inner: ModelSet,
}

/// Opaque input/output dataset with its estimation split.
pub struct DatasetHandle {
    inner: Dataset,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, Status> {
    if ptr.is_null() {
        set_error("NULL string argument");
        return Err(Status::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        Status::InvalidArgument
    })
}

/// Builds the candidate-term dictionary for the given input/output lag
/// bounds and polynomial degree.
///
/// # Safety
/// `out` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn narxsel_model_set_new(
    n_u: usize,
    n_y: usize,
    n_l: usize,
    out: *mut *mut ModelSetHandle,
) -> Status {
    if out.is_null() {
        return fail(Status::InvalidArgument, "NULL out pointer");
    }
    match generate_model_set(n_u, n_y, n_l) {
        Ok(ms) => {
            *out = Box::into_raw(Box::new(ModelSetHandle { inner: ms }));
            Status::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Number of candidate terms in the dictionary.
///
/// # Safety
/// `handle` must be a live pointer from `narxsel_model_set_new`.
#[no_mangle]
pub unsafe extern "C" fn narxsel_model_set_len(handle: *const ModelSetHandle) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).inner.len()
}

/// Textual form of one dictionary term (e.g. `"y(k-1)u(k-2)^2"`).
///
/// # Safety
/// `handle` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_model_set_term(
    handle: *const ModelSetHandle,
    index: usize,
    out: *mut *mut c_char,
) -> Status {
    if handle.is_null() || out.is_null() {
        return fail(Status::InvalidArgument, "NULL pointer argument");
    }
    let ms = &(*handle).inner;
    match ms.terms().get(index) {
        Some(t) => {
            let s = CString::new(t.to_string()).expect("term text has no NUL");
            *out = s.into_raw();
            Status::Ok
        }
        None => fail(
            Status::InvalidArgument,
            &format!("term index {index} out of range ({} terms)", ms.len()),
        ),
    }
}

/// # Safety
/// `handle` must come from `narxsel_model_set_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn narxsel_model_set_free(handle: *mut ModelSetHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Loads a two-column `u,y` CSV (header row required).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_dataset_from_csv(
    path: *const c_char,
    estimation_len: usize,
    out: *mut *mut DatasetHandle,
) -> Status {
    if out.is_null() {
        return fail(Status::InvalidArgument, "NULL out pointer");
    }
    let path = match cstr(path) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match datagen::load_csv(Path::new(path), estimation_len, path) {
        Ok(data) => {
            *out = Box::into_raw(Box::new(DatasetHandle { inner: data }));
            Status::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Generates identification data for a builtin system (`s1`..`s7`,
/// `duffing`) under the given master seed.
///
/// # Safety
/// `system` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_dataset_builtin(
    system: *const c_char,
    master_seed: u64,
    out: *mut *mut DatasetHandle,
) -> Status {
    if out.is_null() {
        return fail(Status::InvalidArgument, "NULL out pointer");
    }
    let system = match cstr(system) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let spec = match datagen::builtin_system(system) {
        Ok(s) => s,
        Err(e) => return from_error(&e),
    };
    let data_seed = derive_seed(master_seed, &format!("data:{system}"), 0, 0);
    match datagen::simulate(&spec.with_seed(data_seed)) {
        Ok(data) => {
            *out = Box::into_raw(Box::new(DatasetHandle { inner: data }));
            Status::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Sample count of a dataset.
///
/// # Safety
/// `handle` must be live or NULL.
#[no_mangle]
pub unsafe extern "C" fn narxsel_dataset_len(handle: *const DatasetHandle) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).inner.len()
}

/// # Safety
/// `handle` must come from a dataset constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn narxsel_dataset_free(handle: *mut DatasetHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Normalized mean squared error, in percent, between a measured and a
/// predicted sequence.
///
/// # Safety
/// `y` and `y_hat` must point to `len` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_nmse(
    y: *const f64,
    y_hat: *const f64,
    len: usize,
    out: *mut f64,
) -> Status {
    if y.is_null() || y_hat.is_null() || out.is_null() {
        return fail(Status::InvalidArgument, "NULL pointer argument");
    }
    let y = std::slice::from_raw_parts(y, len);
    let y_hat = std::slice::from_raw_parts(y_hat, len);
    match narxsel::narx::nmse(y, y_hat) {
        Ok(v) => {
            *out = v;
            Status::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Preference-ordering weights from objective ranks and an intensity on
/// the 1..9 scale; writes `m` normalized weights.
///
/// # Safety
/// `ranks` must point to `m` readable values; `weights_out` to `m`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn narxsel_preference_weights(
    ranks: *const usize,
    m: usize,
    intensity: f64,
    weights_out: *mut f64,
) -> Status {
    if ranks.is_null() || weights_out.is_null() {
        return fail(Status::InvalidArgument, "NULL pointer argument");
    }
    let ranks = std::slice::from_raw_parts(ranks, m).to_vec();
    let spec = match mcdm::PreferenceSpec::new(ranks, intensity) {
        Ok(s) => s,
        Err(e) => return from_error(&e),
    };
    match mcdm::preference_weights(&spec, m) {
        Ok(wv) => {
            let out = std::slice::from_raw_parts_mut(weights_out, m);
            out.copy_from_slice(&wv.w);
            Status::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Exact 2-D hypervolume (minimization) of `n` points `(x0,y0,x1,y1,...)`
/// bounded by the reference `(r1, r2)`.
///
/// # Safety
/// `points` must hold `2 * n` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_hypervolume(
    points: *const f64,
    n: usize,
    r1: f64,
    r2: f64,
    out: *mut f64,
) -> Status {
    if points.is_null() || out.is_null() {
        return fail(Status::InvalidArgument, "NULL pointer argument");
    }
    let flat = std::slice::from_raw_parts(points, 2 * n);
    let pts: Vec<(f64, f64)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let front = narxsel::metrics::FrontSnapshot::new(pts, "capi");
    *out = narxsel::metrics::hypervolume(&front, narxsel::metrics::ReferencePoint(r1, r2));
    Status::Ok
}

/// Friedman two-way analysis of variance by ranks over a row-major
/// `blocks x treatments` matrix; returns the chi-square statistic and
/// p-value.
///
/// # Safety
/// `matrix` must hold `blocks * treatments` readable doubles;
/// `statistic_out` and `p_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_friedman(
    matrix: *const f64,
    blocks: usize,
    treatments: usize,
    statistic_out: *mut f64,
    p_out: *mut f64,
) -> Status {
    if matrix.is_null() || statistic_out.is_null() || p_out.is_null() {
        return fail(Status::InvalidArgument, "NULL pointer argument");
    }
    let flat = std::slice::from_raw_parts(matrix, blocks * treatments);
    let rows: Vec<Vec<f64>> = flat.chunks_exact(treatments).map(|r| r.to_vec()).collect();
    let samples = match stats::BlockedSamples::new(rows) {
        Ok(s) => s,
        Err(e) => return from_error(&e),
    };
    match stats::friedman(&samples) {
        Ok(report) => {
            *statistic_out = report.statistic;
            *p_out = report.p_value;
            Status::Ok
        }
        Err(e) => from_error(&e),
    }
}

/// Runs the full multi-run structure search described by a TOML
/// configuration string (the same format the CLI reads); returns the
/// pooled archive as JSON. Artifacts are written under `out_dir`.
///
/// # Safety
/// `config_toml` and `out_dir` must be NUL-terminated strings; `json_out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_search_json(
    config_toml: *const c_char,
    master_seed: u64,
    out_dir: *const c_char,
    json_out: *mut *mut c_char,
) -> Status {
    if json_out.is_null() {
        return fail(Status::InvalidArgument, "NULL out pointer");
    }
    let config = match cstr(config_toml) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let out_dir = match cstr(out_dir) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let parsed = match narxsel::config::parse_config(config) {
        Ok(c) => c,
        Err(e) => return from_error(&e),
    };
    let Some(exp) = parsed.experiment else {
        return fail(Status::InvalidArgument, "missing [experiment] section");
    };
    let result = match cmd_search(&exp, master_seed, Path::new(out_dir)) {
        Ok(r) => r,
        Err(e) => return from_error(&e),
    };
    let algorithm = exp
        .run
        .resolve()
        .map(|c| c.algorithm.to_string())
        .unwrap_or_default();
    let system = exp.system.unwrap_or_else(|| "external".into());
    let doc = ArchiveDocument::from_archive(&result.pooled, &system, &algorithm, master_seed);
    match serde_json::to_string_pretty(&doc) {
        Ok(json) => {
            let s = CString::new(json).expect("JSON has no NUL");
            *json_out = s.into_raw();
            Status::Ok
        }
        Err(e) => fail(Status::RuntimeError, &e.to_string()),
    }
}

/// Scores one term subset on a dataset: cardinality, free-run validation
/// NMSE and the goal-penalized criteria.
///
/// # Safety
/// `ms` and `data` must be live handles; `bits` a NUL-terminated string of
/// `'0'`/`'1'`; the four out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn narxsel_evaluate_bits(
    ms: *const ModelSetHandle,
    data: *const DatasetHandle,
    bits: *const c_char,
    xi_lim: usize,
    nmse_lim: f64,
    xi_out: *mut usize,
    nmse_out: *mut f64,
    j1_out: *mut f64,
    j2_out: *mut f64,
) -> Status {
    if ms.is_null()
        || data.is_null()
        || xi_out.is_null()
        || nmse_out.is_null()
        || j1_out.is_null()
        || j2_out.is_null()
    {
        return fail(Status::InvalidArgument, "NULL pointer argument");
    }
    let bits = match cstr(bits) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let genome = match narxsel::evo::Genome::from_bit_string(bits) {
        Ok(g) => g,
        Err(e) => return from_error(&e),
    };
    let goal = match GoalPoint::new(xi_lim, nmse_lim) {
        Ok(g) => g,
        Err(e) => return from_error(&e),
    };
    let mut eval = narxsel::evo::NarxEvaluator::new(
        &(*ms).inner,
        &(*data).inner,
        goal,
        narxsel::evo::PredictionMode::FreeRun,
    );
    if genome.len() != (*ms).inner.len() {
        return fail(
            Status::InvalidArgument,
            &format!(
                "bit string length {} does not match model set size {}",
                genome.len(),
                (*ms).inner.len()
            ),
        );
    }
    use narxsel::evo::Evaluator;
    let o = eval.evaluate(&genome);
    *xi_out = o.xi;
    *nmse_out = o.nmse;
    *j1_out = o.j1;
    *j2_out = o.j2;
    Status::Ok
}
