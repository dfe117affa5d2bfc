//! C ABI over the arceval library.
//!
//! Objects are opaque handles created by `*_parse`/`*_load` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`ArcevalStatus`]; on failure the message is available from
//! [`arceval_last_error`] on the same thread. Strings returned through out
//! parameters are owned by the caller and released with
//! [`arceval_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use arceval::analysis::{coverage_sidecar, gap_analysis, render_report};
use arceval::format::{parse_document, serialize, Document};
use arceval::measures::{evaluate, evaluate_scenario, parse_measure, Scope};
use arceval::telemetry::ingest_str;
use arceval::workspace::Workspace;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcevalStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Measure = 4,
    Io = 5,
    Workspace = 6,
    Analysis = 7,
    Telemetry = 8,
    NotFound = 9,
    Panic = 10,
}

/// A parsed document.
pub struct ArcevalDocument(Document);

/// A loaded workspace.
pub struct ArcevalWorkspace(Workspace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(ArcevalStatus, String);

impl From<arceval::Error> for Failure {
    fn from(e: arceval::Error) -> Self {
        use arceval::Error as E;
        let status = match &e {
            E::Parse(_) => ArcevalStatus::Parse,
            E::Measure(_) => ArcevalStatus::Measure,
            E::Io { .. } | E::Manifest { .. } => ArcevalStatus::Io,
            E::Analysis(_) => ArcevalStatus::Analysis,
            E::Window(_) => ArcevalStatus::Telemetry,
            E::Workspace(_) | E::Catalogue(_) | E::Priority(_) => ArcevalStatus::Workspace,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: ArcevalStatus, msg: impl ToString) -> Failure {
    Failure(status, msg.to_string())
}

/// Runs `f`, recording its error and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ArcevalStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArcevalStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ArcevalStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ArcevalStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ArcevalStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn optional_text<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, name).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(ArcevalStatus::NullArgument, format!("{name} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(ArcevalStatus::NullArgument, "out is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let s = CString::new(s).map_err(|_| fail(ArcevalStatus::Panic, "output contains NUL"))?;
    put(out, s.into_raw())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| fail(ArcevalStatus::Panic, e))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn arceval_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn arceval_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn arceval_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a DSL document.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn arceval_document_parse(
    source: *const c_char,
    out: *mut *mut ArcevalDocument,
) -> ArcevalStatus {
    guard(|| {
        let doc = parse_document(text(source, "source")?).map_err(arceval::Error::from)?;
        put(out, Box::into_raw(Box::new(ArcevalDocument(doc))))
    })
}

/// Number of blocks in a document.
///
/// # Safety
/// `doc` must be a live handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn arceval_document_block_count(doc: *const ArcevalDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.0.blocks.len())
}

/// Canonical text of a document.
///
/// # Safety
/// `doc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn arceval_document_serialize(
    doc: *const ArcevalDocument,
    out: *mut *mut c_char,
) -> ArcevalStatus {
    guard(|| put_string(out, serialize(&handle(doc, "doc")?.0)))
}

/// # Safety
/// `doc` must come from [`arceval_document_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn arceval_document_free(doc: *mut ArcevalDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Loads the workspace whose manifest lives in `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn arceval_workspace_load(dir: *const c_char, out: *mut *mut ArcevalWorkspace) -> ArcevalStatus {
    guard(|| {
        let ws = Workspace::load(Path::new(text(dir, "dir")?))?;
        put(out, Box::into_raw(Box::new(ArcevalWorkspace(ws))))
    })
}

/// The bundled Luna case-study workspace.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn arceval_workspace_luna(out: *mut *mut ArcevalWorkspace) -> ArcevalStatus {
    guard(|| {
        let ws = arceval::corpus::luna_workspace()?;
        put(out, Box::into_raw(Box::new(ArcevalWorkspace(ws))))
    })
}

/// # Safety
/// `ws` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn arceval_workspace_free(ws: *mut ArcevalWorkspace) {
    if !ws.is_null() {
        drop(Box::from_raw(ws));
    }
}

/// Gap analysis as JSON. With a null `architecture` this is the coverage
/// sidecar of the current revision; otherwise the gap report for the named
/// revision label.
///
/// # Safety
/// `ws` must be a live handle; `architecture` null or a NUL-terminated
/// string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn arceval_workspace_gap_json(
    ws: *const ArcevalWorkspace,
    architecture: *const c_char,
    out: *mut *mut c_char,
) -> ArcevalStatus {
    guard(|| {
        let ws = &handle(ws, "ws")?.0;
        let body = match optional_text(architecture, "architecture")? {
            None => coverage_sidecar(ws).map_err(arceval::Error::from)?,
            Some(label) => {
                let arch = ws
                    .architecture(label)
                    .ok_or_else(|| fail(ArcevalStatus::NotFound, format!("unknown architecture `{label}`")))?;
                json(&gap_analysis(&ws.scenarios, arch).map_err(arceval::Error::from)?)?
            }
        };
        put_string(out, body)
    })
}

/// Text report. `telemetry` is optional JSONL evaluated offline against
/// every scenario.
///
/// # Safety
/// `ws` must be a live handle; `telemetry` null or a NUL-terminated
/// string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn arceval_workspace_report(
    ws: *const ArcevalWorkspace,
    telemetry: *const c_char,
    out: *mut *mut c_char,
) -> ArcevalStatus {
    guard(|| {
        let ws = &handle(ws, "ws")?.0;
        let verdicts = match optional_text(telemetry, "telemetry")? {
            None => Vec::new(),
            Some(t) => {
                let events = ingest_str(t).accepted;
                ws.scenarios
                    .iter()
                    .map(|s| evaluate_scenario(s, &events, &[]))
                    .collect()
            }
        };
        put_string(out, render_report(ws, &verdicts, &[]))
    })
}

/// Evaluates one measure over JSONL telemetry tagged with `scenario` and
/// returns the verdict as JSON. Malformed lines are skipped.
///
/// # Safety
/// All string arguments must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn arceval_measure_evaluate(
    measure: *const c_char,
    telemetry: *const c_char,
    scenario: *const c_char,
    out: *mut *mut c_char,
) -> ArcevalStatus {
    guard(|| {
        let spec = parse_measure(text(measure, "measure")?).map_err(arceval::Error::from)?;
        let events = ingest_str(text(telemetry, "telemetry")?).accepted;
        let scope = Scope {
            scenario: text(scenario, "scenario")?,
            artefacts: &[],
        };
        put_string(out, json(&evaluate(&spec, &events, &scope))?)
    })
}
