//! C interface to the `tlnas` scoring library.
//!
//! Every function returns a [`TlnasStatus`]; results are written through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`tlnas_last_error_message`]. Handles are opaque and must be released with
//! their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tlnas::datasets::{load_benchmark_fixture, load_dataset_dir, sample_batch, BenchmarkFixture, DatasetSplits, Split};
use tlnas::harness::Normalization;
use tlnas::rng::seed_hash;
use tlnas::scoring::{untrained_stats, UntrainedStats};
use tlnas::stats::{population_mean_std, welch_t_test};
use tlnas::{ArchitectureSpec, CellSpec, Error, MlpSpec, SkeletonConfig};

/// Result of every call; the numeric values match the command-line exit codes
/// for argument, data and numeric failures.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlnasStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Data = 3,
    Numeric = 4,
    Panic = 5,
}

/// Split selector for dataset queries and batch sampling.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlnasSplit {
    Train = 0,
    Val = 1,
    Test = 2,
}

impl From<TlnasSplit> for Split {
    fn from(s: TlnasSplit) -> Split {
        match s {
            TlnasSplit::Train => Split::Train,
            TlnasSplit::Val => Split::Val,
            TlnasSplit::Test => Split::Test,
        }
    }
}

/// Untrained-accuracy moments of one architecture.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TlnasScore {
    pub mu_u: f64,
    pub sigma_u: f64,
    pub cv_u: f64,
    /// Non-zero when every initialisation gave the same accuracy.
    pub degenerate: u8,
    pub batch_seed: u64,
    pub init_base_seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TlnasWelch {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_two_sided: f64,
    /// One-sided p-value for `mean(a) > mean(b)`.
    pub p_greater: f64,
}

/// Loaded dataset splits.
pub struct TlnasDataset {
    splits: DatasetSplits,
}

/// Trained-accuracy lookup table.
pub struct TlnasFixture {
    fixture: BenchmarkFixture,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TlnasStatus {
    match e {
        Error::OutOfRange { .. } | Error::Parse { .. } | Error::InvalidLayer { .. } => TlnasStatus::InvalidArgument,
        Error::Io { .. }
        | Error::Format { .. }
        | Error::InsufficientData(_)
        | Error::FixtureMiss { .. }
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Dimension { .. } => TlnasStatus::Data,
        _ => TlnasStatus::Numeric,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TlnasStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlnasStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("`{name}` is null"));
            TlnasStatus::NullArgument
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            TlnasStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TlnasStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid(format!("`{name}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn tlnas_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tlnas_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Population coefficient of variation of `n` accuracies; `0` when the mean
/// is zero.
///
/// # Safety
/// `values` must point to `n` readable doubles (may be null when `n == 0`).
#[no_mangle]
pub unsafe extern "C" fn tlnas_cv_u(values: *const f64, n: usize, out: *mut f64) -> TlnasStatus {
    guard(|| {
        let xs = slice_arg(values, n, "values")?;
        let out = out_arg(out, "out")?;
        let stats = UntrainedStats::from_accuracies(xs.to_vec())?;
        *out = stats.cv_u;
        Ok(())
    })
}

/// Population mean and standard deviation.
///
/// # Safety
/// `values` must point to `n` readable doubles; `mean` and `std` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tlnas_mean_std(values: *const f64, n: usize, mean: *mut f64, std: *mut f64) -> TlnasStatus {
    guard(|| {
        let xs = slice_arg(values, n, "values")?;
        let (m, s) = population_mean_std(xs)?;
        *out_arg(mean, "mean")? = m;
        *out_arg(std, "std")? = s;
        Ok(())
    })
}

/// Welch's unequal-variance t-test of `a` against `b`.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn tlnas_welch_t_test(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut TlnasWelch,
) -> TlnasStatus {
    guard(|| {
        let (a, b) = (slice_arg(a, na, "a")?, slice_arg(b, nb, "b")?);
        let out = out_arg(out, "out")?;
        let r = welch_t_test(a, b)?;
        *out = TlnasWelch {
            t_statistic: r.t_statistic,
            degrees_of_freedom: r.degrees_of_freedom,
            p_two_sided: r.p_value,
            p_greater: r.p_greater(),
        };
        Ok(())
    })
}

/// Canonical index of a cell string, in `[0, 15625)`.
///
/// # Safety
/// `arch` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tlnas_cell_index(arch: *const c_char, out: *mut usize) -> TlnasStatus {
    guard(|| {
        let cell: CellSpec = str_arg(arch, "arch")?.parse()?;
        *out_arg(out, "out")? = cell.index();
        Ok(())
    })
}

/// Loads a dataset directory or `TLNAS1` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tlnas_dataset_open(path: *const c_char, out: *mut *mut TlnasDataset) -> TlnasStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let splits = load_dataset_dir(Path::new(path))?;
        *out = Box::into_raw(Box::new(TlnasDataset { splits }));
        Ok(())
    })
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `ds` must come from [`tlnas_dataset_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tlnas_dataset_free(ds: *mut TlnasDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of images in one split.
///
/// # Safety
/// `ds` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn tlnas_dataset_len(ds: *const TlnasDataset, split: TlnasSplit, out: *mut usize) -> TlnasStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or(Failure::Null("ds"))?;
        *out_arg(out, "out")? = ds.splits.split(split.into()).len();
        Ok(())
    })
}

/// Untrained-accuracy statistics of an architecture on one batch.
///
/// `arch` is a cell string (scored in the canonical skeleton) or an MLP
/// string `W1,W2`. The batch is drawn from `split` with
/// `seed_hash([seed, 0])` and initialisations use `seed_hash([seed, 1])` as
/// base, matching the `score` command. Pixels are standardised per channel.
///
/// # Safety
/// `ds` must be a live dataset handle and `arch` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tlnas_score(
    ds: *const TlnasDataset,
    arch: *const c_char,
    split: TlnasSplit,
    n_init: usize,
    batch_size: usize,
    seed: u64,
    out: *mut TlnasScore,
) -> TlnasStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or(Failure::Null("ds"))?;
        let arch = str_arg(arch, "arch")?;
        let out = out_arg(out, "out")?;
        let spec = if arch.starts_with('|') {
            ArchitectureSpec::cell(arch.parse()?, SkeletonConfig::CANONICAL)
        } else {
            ArchitectureSpec::Mlp(arch.parse::<MlpSpec>()?)
        };
        let batch_seed = seed_hash(&[seed, 0]);
        let init_base_seed = seed_hash(&[seed, 1]);
        let transform = Normalization::Standardize.transform(&ds.splits);
        let batch = sample_batch(ds.splits.split(split.into()), batch_size, batch_seed, &transform)?;
        let stats = untrained_stats(&spec, &batch, n_init, init_base_seed)?;
        *out = TlnasScore {
            mu_u: stats.mu_u,
            sigma_u: stats.sigma_u,
            cv_u: stats.cv_u,
            degenerate: stats.is_degenerate().into(),
            batch_seed,
            init_base_seed,
        };
        Ok(())
    })
}

/// Loads a benchmark fixture (JSON lines).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tlnas_fixture_open(path: *const c_char, out: *mut *mut TlnasFixture) -> TlnasStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let fixture = load_benchmark_fixture(path)?;
        *out = Box::into_raw(Box::new(TlnasFixture { fixture }));
        Ok(())
    })
}

/// Releases a fixture. Null is ignored.
///
/// # Safety
/// `fx` must come from [`tlnas_fixture_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tlnas_fixture_free(fx: *mut TlnasFixture) {
    if !fx.is_null() {
        drop(Box::from_raw(fx));
    }
}

/// Trained validation and test accuracy (percent) of a cell on a dataset.
///
/// # Safety
/// `fx` must be a live fixture handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tlnas_fixture_lookup(
    fx: *const TlnasFixture,
    arch: *const c_char,
    dataset: *const c_char,
    val_acc: *mut f64,
    test_acc: *mut f64,
) -> TlnasStatus {
    guard(|| {
        let fx = fx.as_ref().ok_or(Failure::Null("fx"))?;
        let cell: CellSpec = str_arg(arch, "arch")?.parse()?;
        let dataset = str_arg(dataset, "dataset")?;
        let entry = fx.fixture.lookup(&cell, dataset)?;
        *out_arg(val_acc, "val_acc")? = entry.val_acc;
        *out_arg(test_acc, "test_acc")? = entry.test_acc;
        Ok(())
    })
}

/// Number of architectures the fixture holds for `dataset`.
///
/// # Safety
/// `fx` must be a live fixture handle; `dataset` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tlnas_fixture_count(
    fx: *const TlnasFixture,
    dataset: *const c_char,
    out: *mut usize,
) -> TlnasStatus {
    guard(|| {
        let fx = fx.as_ref().ok_or(Failure::Null("fx"))?;
        let dataset = str_arg(dataset, "dataset")?;
        *out_arg(out, "out")? = fx.fixture.count(dataset);
        Ok(())
    })
}
