//! C ABI over the actsql core.
//!
//! Every fallible call returns an `ActsqlStatus`. On failure a message is kept
//! per thread and can be read with `actsql_last_error`. Strings returned
//! through `out` parameters are owned by the caller and must be released with
//! `actsql_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::time::Duration;

use actsql::cot;
use actsql::eval::execution_verdict;
use actsql::pipeline::{extract_sql, Mode};
use actsql::schema::{load_schema_catalog, parse_schema_catalog, sample_all, Example, SchemaCatalog};
use actsql::similarity::LexicalSimilarity;
use actsql::sql;
use actsql::style::{render_schema, DbStyle};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActsqlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnknownDatabase = 4,
    SchemaError = 5,
    SqlError = 6,
    ExecutionError = 7,
    Panic = 8,
}

/// Opaque handle to a loaded schema catalog.
pub struct ActsqlCatalog {
    inner: SchemaCatalog,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ActsqlStatus, String);

impl Failure {
    fn new(status: ActsqlStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ActsqlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ActsqlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ActsqlStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(ActsqlStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(ActsqlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(ActsqlStatus::NullPointer, "output pointer is null"));
    }
    *out = value;
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure::new(ActsqlStatus::InvalidArgument, "result contains a NUL byte"))?;
    write_out(out, c.into_raw())
}

unsafe fn catalog_ref<'a>(p: *const ActsqlCatalog) -> Result<&'a SchemaCatalog, Failure> {
    p.as_ref().map(|c| &c.inner).ok_or_else(|| Failure::new(ActsqlStatus::NullPointer, "catalog is null"))
}

fn database<'a>(cat: &'a SchemaCatalog, db_id: &str) -> Result<&'a actsql::schema::DatabaseSchema, Failure> {
    cat.get(db_id).ok_or_else(|| Failure::new(ActsqlStatus::UnknownDatabase, format!("unknown database {db_id:?}")))
}

fn sql_err(e: impl ToString) -> Failure {
    Failure::new(ActsqlStatus::SqlError, e.to_string())
}

/// Loads a Spider-style tables file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn actsql_catalog_load(path: *const c_char, out: *mut *mut ActsqlCatalog) -> ActsqlStatus {
    guard(|| {
        let path = text(path, "path")?;
        let inner = load_schema_catalog(Path::new(path)).map_err(|e| Failure::new(ActsqlStatus::SchemaError, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(ActsqlCatalog { inner })))
    })
}

/// Parses a Spider-style tables document held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn actsql_catalog_from_json(json: *const c_char, out: *mut *mut ActsqlCatalog) -> ActsqlStatus {
    guard(|| {
        let json = text(json, "json")?;
        let inner = parse_schema_catalog(json).map_err(|e| Failure::new(ActsqlStatus::SchemaError, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(ActsqlCatalog { inner })))
    })
}

/// Number of databases in the catalog, or 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a handle from `actsql_catalog_load`.
#[no_mangle]
pub unsafe extern "C" fn actsql_catalog_len(catalog: *const ActsqlCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.inner.len())
}

/// Releases a catalog handle. Null is ignored.
///
/// # Safety
/// `catalog` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn actsql_catalog_free(catalog: *mut ActsqlCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Renders the schema prompt of `db_id` in `style`. When `db_path` is not null
/// and `rows` is positive, that many content rows per table are sampled from
/// the database file.
///
/// # Safety
/// String arguments must be NUL-terminated; `db_path` may be null.
#[no_mangle]
pub unsafe extern "C" fn actsql_render_schema(
    catalog: *const ActsqlCatalog,
    db_id: *const c_char,
    style: *const c_char,
    db_path: *const c_char,
    rows: u32,
    out: *mut *mut c_char,
) -> ActsqlStatus {
    guard(|| {
        let schema = database(catalog_ref(catalog)?, text(db_id, "db_id")?)?;
        let style: DbStyle = text(style, "style")?.parse().map_err(|e: String| Failure::new(ActsqlStatus::InvalidArgument, e))?;
        let sampled = if db_path.is_null() || rows == 0 {
            None
        } else {
            let path = text(db_path, "db_path")?;
            Some(sample_all(Path::new(path), schema, rows as usize).map_err(|e| Failure::new(ActsqlStatus::SchemaError, e.to_string()))?)
        };
        let prompt = render_schema(schema, style, sampled.as_ref()).map_err(|e| Failure::new(ActsqlStatus::SchemaError, e.to_string()))?;
        write_string(out, prompt.text)
    })
}

/// Builds the chain-of-thought annotation of a question and its gold SQL
/// using lexical similarity.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn actsql_annotate(
    catalog: *const ActsqlCatalog,
    db_id: *const c_char,
    question: *const c_char,
    gold_sql: *const c_char,
    out: *mut *mut c_char,
) -> ActsqlStatus {
    guard(|| {
        let db_id = text(db_id, "db_id")?;
        let schema = database(catalog_ref(catalog)?, db_id)?;
        let example = Example::new(db_id, text(question, "question")?, text(gold_sql, "gold_sql")?, "ffi");
        let a = cot::annotate(&example, schema, &LexicalSimilarity).map_err(sql_err)?;
        write_string(out, a.text)
    })
}

/// Writes 1 to `out` when `pred` and `gold` are exact-set matches, else 0.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn actsql_exact_match(
    catalog: *const ActsqlCatalog,
    db_id: *const c_char,
    pred: *const c_char,
    gold: *const c_char,
    out: *mut i32,
) -> ActsqlStatus {
    guard(|| {
        let schema = database(catalog_ref(catalog)?, text(db_id, "db_id")?)?;
        let matched = sql::exact_match(text(pred, "pred")?, text(gold, "gold")?, schema);
        write_out(out, matched as i32)
    })
}

/// Writes the hardness label (Easy, Medium, Hard or Extra) of `sql`.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn actsql_difficulty(
    catalog: *const ActsqlCatalog,
    db_id: *const c_char,
    sql_text: *const c_char,
    out: *mut *mut c_char,
) -> ActsqlStatus {
    guard(|| {
        let schema = database(catalog_ref(catalog)?, text(db_id, "db_id")?)?;
        let d = sql::difficulty(text(sql_text, "sql")?, schema).map_err(sql_err)?;
        write_string(out, d.label().to_string())
    })
}

/// Extracts the SQL from a model reply. `mode` is zero-shot, few-shot or
/// act-sql. The extraction status (0 marker, 1 fallback, 2 failed) is written
/// to `status` when it is not null.
///
/// # Safety
/// String arguments must be NUL-terminated; `status` may be null.
#[no_mangle]
pub unsafe extern "C" fn actsql_extract_sql(
    reply: *const c_char,
    mode: *const c_char,
    out: *mut *mut c_char,
    status: *mut i32,
) -> ActsqlStatus {
    guard(|| {
        let mode: Mode = text(mode, "mode")?.parse().map_err(|e: String| Failure::new(ActsqlStatus::InvalidArgument, e))?;
        let (sql, s) = extract_sql(text(reply, "reply")?, mode);
        if !status.is_null() {
            *status = s as i32;
        }
        write_string(out, sql)
    })
}

/// Executes both queries read-only against `db_path` and writes 1 to `out`
/// when their results match. A failing prediction counts as a mismatch; a
/// failing gold query is an error.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn actsql_execution_match(
    db_path: *const c_char,
    pred: *const c_char,
    gold: *const c_char,
    timeout_ms: u32,
    out: *mut i32,
) -> ActsqlStatus {
    guard(|| {
        if timeout_ms == 0 {
            return Err(Failure::new(ActsqlStatus::InvalidArgument, "timeout must be positive"));
        }
        let path = Path::new(text(db_path, "db_path")?);
        let v = execution_verdict(text(pred, "pred")?, text(gold, "gold")?, path, Duration::from_millis(timeout_ms.into()))
            .map_err(|e| Failure::new(ActsqlStatus::ExecutionError, e.to_string()))?;
        write_out(out, v.matched as i32)
    })
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn actsql_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn actsql_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
