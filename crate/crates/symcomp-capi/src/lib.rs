//! C ABI over the symcomp pipeline: load a scenario, extract the process
//! model, run knowledge queries, and execute the property suites. Handles
//! are opaque; strings returned by the library must be released with
//! `symcomp_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use symcomp::sapic::{pretty_print, translate_tree};
use symcomp::scenario::{parse_scenario, query, CombKind, Scenario};
use symcomp::suites;

/// Status codes shared with the CLI's exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymcompStatus {
    /// Success; for queries: the goal is derivable.
    Ok = 0,
    /// A query goal was not derivable, or a suite reported a failure.
    Negative = 1,
    /// Bad input: unreadable file, parse error, unknown name.
    InputError = 2,
    /// A search or enumeration budget was exhausted.
    BudgetExceeded = 3,
}

/// Opaque scenario handle.
pub struct SymcompScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(cleaned).unwrap());
}

fn to_cstring(s: String) -> *mut c_char {
    let cleaned: String = s.chars().filter(|c| *c != '\0').collect();
    CString::new(cleaned).unwrap().into_raw()
}

unsafe fn cstr<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        return None;
    }
    CStr::from_ptr(p).to_str().ok()
}

/// Library version string; static storage, do not free.
#[no_mangle]
pub extern "C" fn symcomp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread; static storage
/// managed by the library, do not free.
#[no_mangle]
pub extern "C" fn symcomp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a scenario file. Returns null on failure; see
/// `symcomp_last_error`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn symcomp_scenario_load(path: *const c_char) -> *mut SymcompScenario {
    let Some(path) = cstr(path) else {
        set_error("path is null or not utf-8");
        return ptr::null_mut();
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            set_error(&format!("cannot read `{path}`: {e}"));
            return ptr::null_mut();
        }
    };
    let base = std::path::Path::new(path)
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    match parse_scenario(&text, &move |rel: &str| {
        std::fs::read_to_string(base.join(rel)).map_err(|e| e.to_string())
    }) {
        Ok(sc) => Box::into_raw(Box::new(SymcompScenario { inner: sc })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Parses a scenario from memory. `resolve_dir` is the directory for the
/// `program` key, or null for the current directory.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `resolve_dir` may be null.
#[no_mangle]
pub unsafe extern "C" fn symcomp_scenario_parse(
    text: *const c_char,
    resolve_dir: *const c_char,
) -> *mut SymcompScenario {
    let Some(text) = cstr(text) else {
        set_error("scenario text is null or not utf-8");
        return ptr::null_mut();
    };
    let dir = cstr(resolve_dir).unwrap_or(".").to_string();
    match parse_scenario(text, &move |rel: &str| {
        std::fs::read_to_string(std::path::Path::new(&dir).join(rel)).map_err(|e| e.to_string())
    }) {
        Ok(sc) => Box::into_raw(Box::new(SymcompScenario { inner: sc })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Releases a scenario handle.
///
/// # Safety
/// `scn` must come from a `symcomp_scenario_*` constructor, at most once.
#[no_mangle]
pub unsafe extern "C" fn symcomp_scenario_free(scn: *mut SymcompScenario) {
    if !scn.is_null() {
        drop(Box::from_raw(scn));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from a symcomp function that transfers ownership.
#[no_mangle]
pub unsafe extern "C" fn symcomp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Extracts the process model. On success writes a malloc'd string to
/// `out` and returns `Ok`.
///
/// # Safety
/// `scn` must be a live scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn symcomp_extract(
    scn: *const SymcompScenario,
    out: *mut *mut c_char,
) -> SymcompStatus {
    let Some(scn) = scn.as_ref() else {
        set_error("scenario handle is null");
        return SymcompStatus::InputError;
    };
    if out.is_null() {
        set_error("output pointer is null");
        return SymcompStatus::InputError;
    }
    let tree = match scn.inner.tree() {
        Ok(t) => t,
        Err(e) => {
            set_error(&e.to_string());
            return SymcompStatus::InputError;
        }
    };
    match translate_tree(&tree) {
        Ok(p) => {
            *out = to_cstring(pretty_print(&p));
            SymcompStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SymcompStatus::InputError
        }
    }
}

/// Runs a knowledge query such as `K(R0)`. `combiner` may be null to use
/// the scenario's choice. Writes the verdict text (and proof, when
/// derivable) to `out` when `out` is non-null.
///
/// # Safety
/// `scn` must be a live scenario handle; `goal` a valid string; `out` may
/// be null.
#[no_mangle]
pub unsafe extern "C" fn symcomp_query(
    scn: *const SymcompScenario,
    goal: *const c_char,
    combiner: *const c_char,
    out: *mut *mut c_char,
) -> SymcompStatus {
    let Some(scn) = scn.as_ref() else {
        set_error("scenario handle is null");
        return SymcompStatus::InputError;
    };
    let Some(goal) = cstr(goal) else {
        set_error("goal is null or not utf-8");
        return SymcompStatus::InputError;
    };
    let kind = match cstr(combiner) {
        None => scn.inner.combiner,
        Some(c) => match CombKind::parse(c) {
            Ok(k) => k,
            Err(e) => {
                set_error(&e.to_string());
                return SymcompStatus::InputError;
            }
        },
    };
    let parsed = match scn.inner.parse_query(goal) {
        Ok(p) => p,
        Err(e) => {
            set_error(&e.to_string());
            return SymcompStatus::InputError;
        }
    };
    match query(&scn.inner, kind, &parsed) {
        Ok(v) => {
            if !out.is_null() {
                *out = to_cstring(v.to_string());
            }
            if v.is_derived() {
                SymcompStatus::Ok
            } else {
                SymcompStatus::Negative
            }
        }
        Err(e) => {
            set_error(&e.to_string());
            SymcompStatus::InputError
        }
    }
}

/// Runs a named property suite (`thm1`, `sym-assoc`, `thm3`,
/// `refinement`, `freshness`, `concrete`). Writes the textual report to
/// `out` when non-null; returns `Ok` when every case passed.
///
/// # Safety
/// `suite` must be a valid string; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn symcomp_check(
    suite: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
) -> SymcompStatus {
    let Some(suite) = cstr(suite) else {
        set_error("suite name is null or not utf-8");
        return SymcompStatus::InputError;
    };
    let reports = match suite {
        "thm1" => suites::suite_thm1(seed, 100, 4),
        "sym-assoc" => suites::suite_sym_assoc(seed, 50, 3),
        "thm3" => suites::suite_thm3(seed, 100),
        "refinement" => suites::suite_refinement(seed, 20),
        "freshness" => suites::suite_freshness(6),
        "concrete" => suites::suite_concrete(4),
        other => {
            set_error(&format!("unknown suite `{other}`"));
            return SymcompStatus::InputError;
        }
    };
    let text: String = reports.iter().map(|r| r.to_string()).collect();
    if !out.is_null() {
        *out = to_cstring(text);
    }
    if reports.iter().all(|r| r.pass) {
        SymcompStatus::Ok
    } else {
        SymcompStatus::Negative
    }
}
