//! C ABI for genrank.
//!
//! Models and visit counts are exposed as opaque handles created by
//! `gr_model_from_edges`, `gr_model_estimate` and `gr_counts_from_sessions`
//! and released with the matching `gr_*_free`. Every fallible call returns a [`GrStatus`]; on failure a
//! description is available from [`gr_last_error_message`] on the same
//! thread. Output arrays are caller-allocated and their length is checked.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use genrank::{
    AveragingMode, DampingVector, DanglingPolicy, GeneralizedModel, RowStochasticMatrix,
    SolveError, SolveOptions, VisitCounts, VisitLog, ZeroVisitPolicy,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Input failed graph, damping or count validation.
    InvalidInput = 3,
    /// An iterative solve hit its iteration cap.
    NotConverged = 4,
    BufferTooSmall = 5,
    /// Dense factorization failed or the model is too large for it.
    SolverFailure = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrDangling {
    SelfSink = 0,
    Uniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrAveraging {
    FullN = 0,
    ExcludeDiagonal = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrZeroVisit {
    Sink = 0,
    Uniform = 1,
}

/// Opaque generalized model `(W, A)`.
pub struct GrModel {
    inner: GeneralizedModel,
}

/// Opaque visit counts.
pub struct GrCounts {
    inner: VisitCounts,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(GrStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(GrStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure(GrStatus::InvalidArgument, message.into())
    }
}

impl From<genrank::GraphError> for Failure {
    fn from(e: genrank::GraphError) -> Self {
        Failure(GrStatus::InvalidInput, e.to_string())
    }
}

impl From<genrank::IngestError> for Failure {
    fn from(e: genrank::IngestError) -> Self {
        Failure(GrStatus::InvalidInput, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let status = match e {
            SolveError::Graph(_) => GrStatus::InvalidInput,
            SolveError::NonConvergence { .. } => GrStatus::NotConverged,
            SolveError::InvalidOptions(_)
            | SolveError::InvalidAlpha(_)
            | SolveError::TooFewNodes
            | SolveError::ModeNeedsDense => GrStatus::InvalidArgument,
            SolveError::TooLarge { .. } | SolveError::Singular => GrStatus::SolverFailure,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_default();
            set_last_error(format!("internal panic: {detail}"));
            GrStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn out_slice<'a>(data: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if data.is_null() {
        return Err(Failure::null("output buffer"));
    }
    if len < needed {
        return Err(Failure(
            GrStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(data, needed))
}

unsafe fn model_ref<'a>(model: *const GrModel) -> Result<&'a GrModel, Failure> {
    model.as_ref().ok_or_else(|| Failure::null("model"))
}

/// Human-readable name of a status code. The string is static.
#[no_mangle]
pub extern "C" fn gr_status_string(status: GrStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        GrStatus::Ok => b"ok\0",
        GrStatus::NullPointer => b"null pointer\0",
        GrStatus::InvalidArgument => b"invalid argument\0",
        GrStatus::InvalidInput => b"invalid input\0",
        GrStatus::NotConverged => b"not converged\0",
        GrStatus::BufferTooSmall => b"buffer too small\0",
        GrStatus::SolverFailure => b"solver failure\0",
        GrStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a model from `len` weighted edges over `n` nodes, normalizing
/// rows and deriving damping by the coupling rule with clamp bound `eps`.
///
/// # Safety
/// `sources`, `targets` and `weights` must each point to `len` readable
/// values (or may be NULL when `len` is 0). `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_model_from_edges(
    sources: *const usize,
    targets: *const usize,
    weights: *const f64,
    len: usize,
    n: usize,
    dangling: GrDangling,
    eps: f64,
    out: *mut *mut GrModel,
) -> GrStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let sources = slice(sources, len, "sources")?;
        let targets = slice(targets, len, "targets")?;
        let weights = slice(weights, len, "weights")?;
        let edges: Vec<_> = sources
            .iter()
            .zip(targets)
            .zip(weights)
            .map(|((&s, &t), &w)| (s, t, w))
            .collect();
        let policy = match dangling {
            GrDangling::SelfSink => DanglingPolicy::SelfSink,
            GrDangling::Uniform => DanglingPolicy::Uniform,
        };
        let w = RowStochasticMatrix::from_edge_list(&edges, n, policy)?;
        let inner = GeneralizedModel::coupled(w, eps)?;
        *out = Box::into_raw(Box::new(GrModel { inner }));
        Ok(())
    })
}

/// Replaces the damping with `alpha` on every node.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gr_model_set_scalar_damping(model: *mut GrModel, alpha: f64) -> GrStatus {
    guard(|| {
        let model = model.as_mut().ok_or_else(|| Failure::null("model"))?;
        let a = DampingVector::scalar(model.inner.n(), alpha)?;
        let w = model.inner.w().clone();
        model.inner = GeneralizedModel::new(w, a)?;
        Ok(())
    })
}

/// Replaces the damping with the `len` values at `values`, each of which
/// must lie in `[eps, 1 - eps]`.
///
/// # Safety
/// `model` must be a live handle and `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gr_model_set_damping(
    model: *mut GrModel,
    values: *const f64,
    len: usize,
    eps: f64,
) -> GrStatus {
    guard(|| {
        let model = model.as_mut().ok_or_else(|| Failure::null("model"))?;
        let values = slice(values, len, "values")?;
        let a = DampingVector::new(values.to_vec(), eps)?;
        let w = model.inner.w().clone();
        model.inner = GeneralizedModel::new(w, a)?;
        Ok(())
    })
}

/// Node count of the model, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gr_model_n(model: *const GrModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n())
}

/// Copies the damping values into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gr_model_damping(model: *const GrModel, out: *mut f64, len: usize) -> GrStatus {
    guard(|| {
        let model = model_ref(model)?;
        let dst = out_slice(out, len, model.inner.n())?;
        dst.copy_from_slice(model.inner.a().values());
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gr_model_free(model: *mut GrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes `V` row-major into `out`, which must hold `n * n` doubles.
///
/// # Safety
/// `model` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gr_total_effects_dense(
    model: *const GrModel,
    out: *mut f64,
    len: usize,
) -> GrStatus {
    guard(|| {
        let model = model_ref(model)?;
        let n = model.inner.n();
        let needed = n
            .checked_mul(n)
            .ok_or_else(|| Failure::invalid("n * n overflows"))?;
        let v = genrank::total_effects_dense(&model.inner)?;
        out_slice(out, len, needed)?.copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// Centrality by the dense route, with either averaging mode.
///
/// # Safety
/// `model` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gr_centrality_dense(
    model: *const GrModel,
    mode: GrAveraging,
    renormalize: bool,
    out: *mut f64,
    len: usize,
) -> GrStatus {
    guard(|| {
        let model = model_ref(model)?;
        let dst = out_slice(out, len, model.inner.n())?;
        let mode = match mode {
            GrAveraging::FullN => AveragingMode::FullN,
            GrAveraging::ExcludeDiagonal => AveragingMode::ExcludeDiagonal,
        };
        let v = genrank::total_effects_dense(&model.inner)?;
        let r = genrank::centrality(&v, mode, renormalize)?;
        dst.copy_from_slice(&r.scores);
        Ok(())
    })
}

/// Centrality by the sparse fixed-point route. `iterations` may be NULL.
///
/// # Safety
/// `model` must be a live handle, `out` must have room for `len` doubles and
/// `iterations` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn gr_centrality_iterative(
    model: *const GrModel,
    tol: f64,
    max_iters: usize,
    out: *mut f64,
    len: usize,
    iterations: *mut usize,
) -> GrStatus {
    guard(|| {
        let model = model_ref(model)?;
        let dst = out_slice(out, len, model.inner.n())?;
        let r = genrank::generalized_centrality_iterative(&model.inner, &SolveOptions { tol, max_iters })?;
        dst.copy_from_slice(&r.scores);
        if let Some(it) = iterations.as_mut() {
            *it = r.iterations.unwrap_or(0);
        }
        Ok(())
    })
}

/// Classical PageRank on the model's `W` with scalar damping `alpha`; the
/// model's own damping is ignored. `iterations` may be NULL.
///
/// # Safety
/// As for [`gr_centrality_iterative`].
#[no_mangle]
pub unsafe extern "C" fn gr_classical_pagerank(
    model: *const GrModel,
    alpha: f64,
    tol: f64,
    max_iters: usize,
    out: *mut f64,
    len: usize,
    iterations: *mut usize,
) -> GrStatus {
    guard(|| {
        let model = model_ref(model)?;
        let dst = out_slice(out, len, model.inner.n())?;
        let r = genrank::classical_pagerank(model.inner.w(), alpha, &SolveOptions { tol, max_iters })?;
        dst.copy_from_slice(&r.scores);
        if let Some(it) = iterations.as_mut() {
            *it = r.iterations.unwrap_or(0);
        }
        Ok(())
    })
}

/// Counts sessions stored back to back in `pages`; session `k` has
/// `lengths[k]` pages.
///
/// # Safety
/// `pages` must point to `pages_len` values, `lengths` to `n_sessions`
/// values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_counts_from_sessions(
    pages: *const usize,
    pages_len: usize,
    lengths: *const usize,
    n_sessions: usize,
    n: usize,
    out: *mut *mut GrCounts,
) -> GrStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let pages = slice(pages, pages_len, "pages")?;
        let lengths = slice(lengths, n_sessions, "lengths")?;
        let total = lengths
            .iter()
            .try_fold(0usize, |acc, &l| acc.checked_add(l))
            .ok_or_else(|| Failure::invalid("session lengths overflow"))?;
        if total != pages_len {
            return Err(Failure::invalid(format!(
                "session lengths add up to {total}, but {pages_len} pages were given"
            )));
        }
        let mut sessions = Vec::with_capacity(n_sessions);
        let mut start = 0;
        for &l in lengths {
            sessions.push(pages[start..start + l].to_vec());
            start += l;
        }
        let log = VisitLog::new(sessions)?;
        let inner = genrank::accumulate(&log, n)?;
        *out = Box::into_raw(Box::new(GrCounts { inner }));
        Ok(())
    })
}

/// Adds `src` into `dst`.
///
/// # Safety
/// Both must be live handles.
#[no_mangle]
pub unsafe extern "C" fn gr_counts_merge(dst: *mut GrCounts, src: *const GrCounts) -> GrStatus {
    guard(|| {
        let src = src.as_ref().ok_or_else(|| Failure::null("src"))?;
        let dst = dst.as_mut().ok_or_else(|| Failure::null("dst"))?;
        dst.inner.merge(&src.inner)?;
        Ok(())
    })
}

/// # Safety
/// `counts` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gr_counts_free(counts: *mut GrCounts) {
    if !counts.is_null() {
        drop(Box::from_raw(counts));
    }
}

/// Estimates a coupled model from visit counts.
///
/// # Safety
/// `counts` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gr_model_estimate(
    counts: *const GrCounts,
    zero_visit: GrZeroVisit,
    eps: f64,
    out: *mut *mut GrModel,
) -> GrStatus {
    guard(|| {
        let counts = counts.as_ref().ok_or_else(|| Failure::null("counts"))?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let policy = match zero_visit {
            GrZeroVisit::Sink => ZeroVisitPolicy::Sink,
            GrZeroVisit::Uniform => ZeroVisitPolicy::Uniform,
        };
        let inner = genrank::estimate_model(&counts.inner, policy, eps)?;
        *out = Box::into_raw(Box::new(GrModel { inner }));
        Ok(())
    })
}
