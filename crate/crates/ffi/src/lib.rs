//! C ABI over the numfix engine.
//!
//! A `NumfixSession` owns a schema, an instance and a constraint set. Every
//! operation writes a JSON report to `*out` (release it with
//! `numfix_string_free`) and returns a status; on failure `*out` is left
//! NULL and `numfix_last_error` describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use numfix::exact::FixSearchConfig;
use numfix::io::{load_instance, write_instance};
use numfix::lang::{parse_constraints, parse_query, parse_schema, Constraint};
use numfix::query::Semantics;
use numfix::report::{self, to_json, Method};
use numfix::{Error, Instance, Rational, Schema};

/// Status codes; 0..=5 coincide with the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NumfixStatus {
    Ok = 0,
    /// `numfix_check` found violations (the report is still written).
    Inconsistent = 1,
    /// Syntax, schema, type, data or I/O error.
    InvalidInput = 2,
    /// The method does not apply to the constraints or query.
    Unsupported = 3,
    CapExceeded = 4,
    NoFix = 5,
    NullPointer = 10,
    InvalidUtf8 = 11,
    /// A panic was caught at the boundary.
    Internal = 12,
}

/// Opaque handle.
pub struct NumfixSession {
    schema: Arc<Schema>,
    instance: Instance,
    ics: Vec<Constraint>,
    cfg: FixSearchConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(NumfixStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let status = match e.exit_code() {
            1 => NumfixStatus::Inconsistent,
            2 => NumfixStatus::InvalidInput,
            3 => NumfixStatus::Unsupported,
            4 => NumfixStatus::CapExceeded,
            5 => NumfixStatus::NoFix,
            _ => NumfixStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(NumfixStatus, String), Failure>;

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(NumfixStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(NumfixStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn live<'a>(s: *const NumfixSession) -> Result<&'a NumfixSession, Failure> {
    s.as_ref()
        .ok_or_else(|| Failure(NumfixStatus::NullPointer, "session is NULL".into()))
}

fn rational(k: Option<&str>) -> Result<Option<Rational>, Failure> {
    k.map(|k| {
        k.parse::<Rational>()
            .map_err(|e| Failure(NumfixStatus::InvalidInput, format!("bad threshold `{k}`: {e}")))
    })
    .transpose()
}

/// Runs `body`, catching panics, and stores its JSON in `*out`.
unsafe fn finish(out: *mut *mut c_char, body: impl FnOnce() -> Outcome) -> NumfixStatus {
    if out.is_null() {
        set_last_error("out is NULL");
        return NumfixStatus::NullPointer;
    }
    *out = ptr::null_mut();
    clear_last_error();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body))
        .unwrap_or_else(|_| Err(Failure(NumfixStatus::Internal, "internal panic".into())));
    match result {
        Ok((status, json)) => match CString::new(json) {
            Ok(c) => {
                *out = c.into_raw();
                status
            }
            Err(_) => {
                set_last_error("report contains a NUL byte");
                NumfixStatus::Internal
            }
        },
        Err(Failure(status, message)) => {
            set_last_error(&message);
            status
        }
    }
}

/// Loads a session from schema text, constraint text (NULL for none) and a
/// directory holding one `<relation>.csv` per relation.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn numfix_session_new(
    schema_text: *const c_char,
    ic_text: *const c_char,
    data_dir: *const c_char,
    out: *mut *mut NumfixSession,
) -> NumfixStatus {
    if out.is_null() {
        set_last_error("out is NULL");
        return NumfixStatus::NullPointer;
    }
    *out = ptr::null_mut();
    clear_last_error();
    let built = std::panic::catch_unwind(|| -> Result<NumfixSession, Failure> {
        let schema = Arc::new(parse_schema(text(schema_text, "schema_text")?)?);
        let ics = match opt_text(ic_text, "ic_text")? {
            Some(t) => parse_constraints(t, &schema)?,
            None => Vec::new(),
        };
        let instance = load_instance(schema.clone(), Path::new(text(data_dir, "data_dir")?))?;
        Ok(NumfixSession {
            schema,
            instance,
            ics,
            cfg: FixSearchConfig::default(),
        })
    })
    .unwrap_or_else(|_| Err(Failure(NumfixStatus::Internal, "internal panic".into())));
    match built {
        Ok(s) => {
            *out = Box::into_raw(Box::new(s));
            NumfixStatus::Ok
        }
        Err(Failure(status, message)) => {
            set_last_error(&message);
            status
        }
    }
}

/// # Safety
/// `session` must come from `numfix_session_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn numfix_session_free(session: *mut NumfixSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Caps exact-search nodes and grid points per tuple.
///
/// # Safety
/// `session` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn numfix_session_set_max_grid(session: *mut NumfixSession, points: u64) -> NumfixStatus {
    match session.as_mut() {
        Some(s) => {
            s.cfg.max_grid_points = points;
            NumfixStatus::Ok
        }
        None => {
            set_last_error("session is NULL");
            NumfixStatus::NullPointer
        }
    }
}

/// Constraint satisfaction report; `Inconsistent` when violated.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn numfix_check(session: *const NumfixSession, out: *mut *mut c_char) -> NumfixStatus {
    finish(out, || {
        let s = live(session)?;
        let r = report::check(&s.instance, &s.ics, &s.cfg)?;
        let status = if r.consistent { NumfixStatus::Ok } else { NumfixStatus::Inconsistent };
        Ok((status, to_json(&r)))
    })
}

/// Fixes by `method` (`exact`, `greedy`, `primal-dual`, `1ad`). `k` (NULL
/// for none) is a distance threshold such as `"10"` or `"1/10"`; with
/// `out_dir` non-NULL each fix is written to `out_dir/fix-<n>/`.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn numfix_fix(
    session: *const NumfixSession,
    method: *const c_char,
    k: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut c_char,
) -> NumfixStatus {
    finish(out, || {
        let s = live(session)?;
        let name = text(method, "method")?;
        let method = Method::parse(name)
            .ok_or_else(|| Failure(NumfixStatus::InvalidInput, format!("unknown method `{name}`")))?;
        let k = rational(opt_text(k, "k")?)?;
        let r = report::fix(&s.instance, &s.ics, method, k.as_ref(), &s.cfg)?;
        if let Some(dir) = opt_text(out_dir, "out_dir")? {
            for (i, f) in r.fixes.iter().enumerate() {
                write_instance(f, &Path::new(dir).join(format!("fix-{}", i + 1)))?;
            }
        }
        Ok((NumfixStatus::Ok, to_json(&r)))
    })
}

/// Consistent answers under `semantics` (`skeptical`, `brave`, `majority`,
/// `range`); `k` (NULL for none) is the range threshold.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn numfix_cqa(
    session: *const NumfixSession,
    query: *const c_char,
    semantics: *const c_char,
    k: *const c_char,
    out: *mut *mut c_char,
) -> NumfixStatus {
    finish(out, || {
        let s = live(session)?;
        let q = parse_query(text(query, "query")?, &s.schema)?;
        let name = text(semantics, "semantics")?;
        let semantics = Semantics::parse(name)
            .ok_or_else(|| Failure(NumfixStatus::InvalidInput, format!("unknown semantics `{name}`")))?;
        let k = rational(opt_text(k, "k")?)?;
        let r = report::cqa(&q, &s.instance, &s.ics, semantics, k.as_ref(), &s.cfg)?;
        Ok((NumfixStatus::Ok, to_json(&r)))
    })
}

/// Constraint classes and locality; with `query` non-NULL, its join graph.
///
/// # Safety
/// `query` must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn numfix_classify(
    session: *const NumfixSession,
    query: *const c_char,
    out: *mut *mut c_char,
) -> NumfixStatus {
    finish(out, || {
        let s = live(session)?;
        let q = opt_text(query, "query")?.map(|q| parse_query(q, &s.schema)).transpose()?;
        let r = report::classify(&s.schema, &s.ics, q.as_ref())?;
        Ok((NumfixStatus::Ok, to_json(&r)))
    })
}

/// Approximate largest value of a scalar `sum` query across fixes.
///
/// # Safety
/// `query` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn numfix_approx_sum(
    session: *const NumfixSession,
    query: *const c_char,
    out: *mut *mut c_char,
) -> NumfixStatus {
    finish(out, || {
        let s = live(session)?;
        let q = parse_query(text(query, "query")?, &s.schema)?;
        let r = report::approx_sum(&q, &s.instance, &s.ics, &s.cfg)?;
        Ok((NumfixStatus::Ok, to_json(&r)))
    })
}

/// Per-tuple candidates under one-atom denials.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn numfix_reduce_1ad(session: *const NumfixSession, out: *mut *mut c_char) -> NumfixStatus {
    finish(out, || {
        let s = live(session)?;
        let r = report::reduce(&s.instance, &s.ics, &s.cfg)?;
        Ok((NumfixStatus::Ok, to_json(&r)))
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn numfix_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn numfix_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn numfix_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
