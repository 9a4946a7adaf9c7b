//! C ABI for cexforge.
//!
//! Handles are opaque pointers created by `*_new`/`*_create` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! `CexStatus`; on failure `cex_last_error()` describes the problem until the
//! next call on the same thread. Strings returned by the library are owned by
//! the caller and must be released with `cex_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cexforge::ingest::{self, IndexBase, Report, Timing};
use cexforge::session::{RefinePolicy, SessionDocument, SessionError};
use cexforge::{
    check_property, Budget, Comparison, Dtmc, ReachabilityProperty, RefinementSession, SearchConfig, SearchMethod,
    SessionStatus,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidModel = 5,
    InvalidArgument = 6,
    InvalidState = 7,
    Solver = 8,
    Panic = 9,
}

/// Refinement state of a session.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CexSessionStatus {
    Satisfied = 0,
    Searching = 1,
    Critical = 2,
    BudgetExhausted = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CexComparison {
    LessEq = 0,
    Less = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CexMethod {
    Global = 0,
    Local = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CexRefinePolicy {
    MassGreedy = 0,
    ExpandAll = 1,
}

/// Opaque model handle.
pub struct CexModel {
    inner: Arc<Dtmc>,
}

/// Opaque session handle. Not thread-safe; use one thread at a time.
pub struct CexSession {
    inner: RefinementSession,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CexStatus, String);

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::Model(_) => CexStatus::InvalidModel,
            SessionError::Parse(_) | SessionError::Document(_) => CexStatus::Parse,
            SessionError::View(cexforge::scc::ViewError::UnknownNode(_)) => CexStatus::InvalidArgument,
            SessionError::View(cexforge::scc::ViewError::ParentCollapsed { .. })
            | SessionError::NotApplicable { .. }
            | SessionError::EmptyHistory
            | SessionError::SearchFailed => CexStatus::InvalidState,
            SessionError::View(_) | SessionError::Check(_) | SessionError::Search(_) | SessionError::Subsystem(_) => {
                CexStatus::Solver
            }
        };
        Failure(code, e.to_string())
    }
}

impl From<ingest::ParseError> for Failure {
    fn from(e: ingest::ParseError) -> Self {
        Failure(CexStatus::Parse, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> CexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CexStatus::Ok
        }
        Ok(Err(Failure(code, message))) => {
            set_error(message);
            code
        }
        Err(_) => {
            set_error("internal panic".to_string());
            CexStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CexStatus::NullArgument, format!("`{what}` is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CexStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or point to a live `T`.
unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or point to a live `T` not aliased elsewhere.
unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

fn index_base(one_based: bool) -> IndexBase {
    if one_based {
        IndexBase::One
    } else {
        IndexBase::Zero
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next library call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn cex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn cex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a model from `.tra` and `.lab` text.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_model_from_text(
    tra: *const c_char,
    lab: *const c_char,
    one_based: bool,
    out: *mut *mut CexModel,
) -> CexStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let base = index_base(one_based);
        let model = ingest::parse_tra_str(str_arg(tra, "tra")?, base)?;
        let model = ingest::parse_lab_str(str_arg(lab, "lab")?, model, base)?;
        *out = Box::into_raw(Box::new(CexModel { inner: Arc::new(model) }));
        Ok(())
    })
}

/// Reads a model from `.tra` and `.lab` files.
///
/// # Safety
/// Path arguments must be valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_model_from_files(
    tra_path: *const c_char,
    lab_path: *const c_char,
    one_based: bool,
    out: *mut *mut CexModel,
) -> CexStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let read = |p: &str| std::fs::read_to_string(p).map_err(|e| Failure(CexStatus::Io, format!("{p}: {e}")));
        let tra = read(str_arg(tra_path, "tra_path")?)?;
        let lab = read(str_arg(lab_path, "lab_path")?)?;
        let base = index_base(one_based);
        let model = ingest::parse_tra_str(&tra, base)?;
        let model = ingest::parse_lab_str(&lab, model, base)?;
        *out = Box::into_raw(Box::new(CexModel { inner: Arc::new(model) }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cex_model_num_states(model: *const CexModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_states())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cex_model_num_transitions(model: *const CexModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_transitions())
}

/// # Safety
/// `model` must be null or a handle not yet freed. Sessions created from it stay valid.
#[no_mangle]
pub unsafe extern "C" fn cex_model_free(model: *mut CexModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn property(target: &str, comparison: CexComparison, threshold: f64) -> ReachabilityProperty {
    let cmp = match comparison {
        CexComparison::LessEq => Comparison::LessEq,
        CexComparison::Less => Comparison::Less,
    };
    ReachabilityProperty::new(cmp, threshold, target)
}

/// Computes the probability of reaching `target` and whether the bound is broken.
///
/// # Safety
/// Pointers must be valid; `out_prob` and `out_violated` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_check(
    model: *const CexModel,
    target: *const c_char,
    comparison: CexComparison,
    threshold: f64,
    out_prob: *mut f64,
    out_violated: *mut bool,
) -> CexStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let prop = property(str_arg(target, "target")?, comparison, threshold);
        let out_prob = mut_arg(out_prob, "out_prob")?;
        let out_violated = mut_arg(out_violated, "out_violated")?;
        let verdict = check_property(&model.inner, &prop).map_err(|e| Failure(CexStatus::InvalidModel, e.to_string()))?;
        *out_prob = verdict.prob();
        *out_violated = verdict.is_violated();
        Ok(())
    })
}

/// Opens a refinement session. A property that holds yields a session in
/// the `Satisfied` state. `max_steps == 0` selects the default budget.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_session_create(
    model: *const CexModel,
    target: *const c_char,
    comparison: CexComparison,
    threshold: f64,
    method: CexMethod,
    max_steps: usize,
    out: *mut *mut CexSession,
) -> CexStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let out = mut_arg(out, "out")?;
        let prop = property(str_arg(target, "target")?, comparison, threshold);
        let mut budget = Budget::default();
        if max_steps > 0 {
            budget.max_steps = max_steps;
        }
        let config = SearchConfig {
            method: match method {
                CexMethod::Global => SearchMethod::Global,
                CexMethod::Local => SearchMethod::Local,
            },
            budget,
            ..SearchConfig::default()
        };
        let inner = RefinementSession::create(Arc::clone(&model.inner), prop, config)?;
        *out = Box::into_raw(Box::new(CexSession { inner }));
        Ok(())
    })
}

/// Rebuilds a session from exported JSON.
///
/// # Safety
/// `json` must be a valid string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_session_import_json(json: *const c_char, out: *mut *mut CexSession) -> CexStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        let doc = SessionDocument::from_json(str_arg(json, "json")?)?;
        let inner = RefinementSession::import(&doc)?;
        *out = Box::into_raw(Box::new(CexSession { inner }));
        Ok(())
    })
}

/// # Safety
/// `session` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cex_session_free(session: *mut CexSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_session_status(session: *const CexSession, out: *mut CexSessionStatus) -> CexStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        *mut_arg(out, "out")? = match s.inner.status() {
            SessionStatus::Satisfied => CexSessionStatus::Satisfied,
            SessionStatus::Searching => CexSessionStatus::Searching,
            SessionStatus::Critical => CexSessionStatus::Critical,
            SessionStatus::BudgetExhausted => CexSessionStatus::BudgetExhausted,
        };
        Ok(())
    })
}

/// Probability of the current subsystem (0 when empty).
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_session_prob(session: *const CexSession, out: *mut f64) -> CexStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        *mut_arg(out, "out")? = s.inner.subsystem_prob();
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cex_session_search(session: *mut CexSession) -> CexStatus {
    guard(|| {
        mut_arg(session, "session")?.inner.run_search()?;
        Ok(())
    })
}

/// Expands the given hierarchy nodes (parents first).
///
/// # Safety
/// `session` must be a live handle; `nodes` must point to `len` values (or be null with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn cex_session_concretize(session: *mut CexSession, nodes: *const usize, len: usize) -> CexStatus {
    guard(|| {
        let s = mut_arg(session, "session")?;
        let nodes = if len == 0 {
            &[][..]
        } else if nodes.is_null() {
            return Err(null("nodes"));
        } else {
            std::slice::from_raw_parts(nodes, len)
        };
        s.inner.concretize(nodes)?;
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cex_session_auto_refine(session: *mut CexSession, policy: CexRefinePolicy) -> CexStatus {
    guard(|| {
        let policy = match policy {
            CexRefinePolicy::MassGreedy => RefinePolicy::MassGreedy,
            CexRefinePolicy::ExpandAll => RefinePolicy::ExpandAll,
        };
        mut_arg(session, "session")?.inner.auto_refine(policy)?;
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cex_session_undo(session: *mut CexSession) -> CexStatus {
    guard(|| {
        mut_arg(session, "session")?.inner.undo()?;
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cex_session_reset(session: *mut CexSession) -> CexStatus {
    guard(|| {
        mut_arg(session, "session")?.inner.reset()?;
        Ok(())
    })
}

unsafe fn string_out(session: *const CexSession, out: *mut *mut c_char, f: impl FnOnce(&RefinementSession) -> String) -> CexStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        let out = mut_arg(out, "out")?;
        *out = to_c_string(f(&s.inner));
        Ok(())
    })
}

/// JSON report; wall time is 0 when `deterministic` is set. Free with `cex_string_free`.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_session_report_json(session: *const CexSession, deterministic: bool, out: *mut *mut c_char) -> CexStatus {
    let timing = if deterministic { Timing::Fixed } else { Timing::Measured };
    string_out(session, out, |s| Report::from_session(s, timing).to_json())
}

/// Session export document. Free with `cex_string_free`.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_session_export_json(session: *const CexSession, out: *mut *mut c_char) -> CexStatus {
    string_out(session, out, |s| s.export().to_json())
}

/// Current subsystem in `.tra` form over concrete state ids. Free with `cex_string_free`.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cex_session_subsystem_tra(session: *const CexSession, out: *mut *mut c_char) -> CexStatus {
    string_out(session, out, |s| s.subsystem_tra())
}
