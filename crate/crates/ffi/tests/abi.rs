use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use actsql_ffi::*;

fn tables() -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/tables.json");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

struct Catalog(*mut ActsqlCatalog);

impl Catalog {
    fn load() -> Catalog {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { actsql_catalog_load(tables().as_ptr(), &mut h) }, ActsqlStatus::Ok);
        assert!(!h.is_null());
        Catalog(h)
    }
}

impl Drop for Catalog {
    fn drop(&mut self) {
        unsafe { actsql_catalog_free(self.0) }
    }
}

fn take(s: *mut c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { actsql_string_free(s) };
    out
}

fn last_error() -> String {
    let p = actsql_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn catalog_lifecycle() {
    let cat = Catalog::load();
    assert!(unsafe { actsql_catalog_len(cat.0) } >= 4);
    assert_eq!(unsafe { actsql_catalog_len(ptr::null()) }, 0);
    unsafe { actsql_catalog_free(ptr::null_mut()) };

    let mut h = ptr::null_mut();
    let status = unsafe { actsql_catalog_load(c("/no/such/tables.json").as_ptr(), &mut h) };
    assert_eq!(status, ActsqlStatus::SchemaError);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe { actsql_catalog_from_json(c("{not json").as_ptr(), &mut h) };
    assert_eq!(status, ActsqlStatus::SchemaError);
}

#[test]
fn render_schema_matches_core() {
    let cat = Catalog::load();
    let mut out = ptr::null_mut();
    let status = unsafe { actsql_render_schema(cat.0, c("concert_singer").as_ptr(), c("create-eot").as_ptr(), ptr::null(), 0, &mut out) };
    assert_eq!(status, ActsqlStatus::Ok);
    let text = take(out);
    let core = actsql::schema::load_schema_catalog(Path::new(tables().to_str().unwrap())).unwrap();
    let want = actsql::style::render_schema(core.get("concert_singer").unwrap(), actsql::style::DbStyle::CreateEoT, None).unwrap();
    assert_eq!(text, want.text);
    assert!(actsql_last_error().is_null());

    let bad = unsafe { actsql_render_schema(cat.0, c("concert_singer").as_ptr(), c("fancy").as_ptr(), ptr::null(), 0, &mut out) };
    assert_eq!(bad, ActsqlStatus::InvalidArgument);
    let missing = unsafe { actsql_render_schema(cat.0, c("nope").as_ptr(), c("create-eot").as_ptr(), ptr::null(), 0, &mut out) };
    assert_eq!(missing, ActsqlStatus::UnknownDatabase);
    assert!(last_error().contains("nope"));
}

#[test]
fn sql_helpers() {
    let cat = Catalog::load();
    let db = c("concert_singer");
    let mut m = -1;
    let pred = c("SELECT name FROM singer WHERE age > 40");
    let gold = c("select Name from singer where Age > 20");
    assert_eq!(unsafe { actsql_exact_match(cat.0, db.as_ptr(), pred.as_ptr(), gold.as_ptr(), &mut m) }, ActsqlStatus::Ok);
    assert_eq!(m, 1);
    let other = c("SELECT count(*) FROM singer");
    unsafe { actsql_exact_match(cat.0, db.as_ptr(), other.as_ptr(), gold.as_ptr(), &mut m) };
    assert_eq!(m, 0);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { actsql_difficulty(cat.0, db.as_ptr(), other.as_ptr(), &mut out) }, ActsqlStatus::Ok);
    assert_eq!(take(out), "Easy");
    assert_eq!(unsafe { actsql_difficulty(cat.0, db.as_ptr(), c("SELECT FROM").as_ptr(), &mut out) }, ActsqlStatus::SqlError);

    let q = c("How many singers do we have?");
    assert_eq!(unsafe { actsql_annotate(cat.0, db.as_ptr(), q.as_ptr(), other.as_ptr(), &mut out) }, ActsqlStatus::Ok);
    let cot = take(out);
    assert!(cot.starts_with("Let's think step by step."));
    assert!(cot.ends_with("SELECT count(*) FROM singer"));
}

#[test]
fn extraction() {
    let mut out = ptr::null_mut();
    let mut status = -1;
    let reply = c("Let's think step by step.\nSo the final answer is:\nSELECT 1\n\nDone.");
    assert_eq!(unsafe { actsql_extract_sql(reply.as_ptr(), c("act-sql").as_ptr(), &mut out, &mut status) }, ActsqlStatus::Ok);
    assert_eq!((take(out).as_str(), status), ("SELECT 1", 0));
    let fenced = c("```sql\nSELECT 2\n```");
    assert_eq!(unsafe { actsql_extract_sql(fenced.as_ptr(), c("few-shot").as_ptr(), &mut out, ptr::null_mut()) }, ActsqlStatus::Ok);
    assert_eq!(take(out), "SELECT 2");
    assert_eq!(
        unsafe { actsql_extract_sql(fenced.as_ptr(), c("one-shot").as_ptr(), &mut out, &mut status) },
        ActsqlStatus::InvalidArgument
    );
}

fn shop_db(dir: &Path) -> PathBuf {
    let path = dir.join("shop.sqlite");
    let conn = rusqlite::Connection::open(&path).unwrap();
    conn.execute_batch("CREATE TABLE t (id int, name text); INSERT INTO t VALUES (1, 'a'), (2, 'b'), (3, 'b');").unwrap();
    path
}

#[test]
fn execution_match() {
    let dir = tempfile::tempdir().unwrap();
    let db = c(shop_db(dir.path()).to_str().unwrap());
    let mut m = -1;
    let run =
        |pred: &str, gold: &str, m: &mut i32| unsafe { actsql_execution_match(db.as_ptr(), c(pred).as_ptr(), c(gold).as_ptr(), 2000, m) };
    assert_eq!(run("SELECT name FROM t ORDER BY id DESC", "SELECT name FROM t", &mut m), ActsqlStatus::Ok);
    assert_eq!(m, 1);
    assert_eq!(run("SELECT DISTINCT name FROM t", "SELECT name FROM t", &mut m), ActsqlStatus::Ok);
    assert_eq!(m, 0);
    assert_eq!(run("SELECT nothing FROM t", "SELECT name FROM t", &mut m), ActsqlStatus::Ok);
    assert_eq!(m, 0);
    assert_eq!(run("SELECT name FROM t", "SELECT broken FROM t", &mut m), ActsqlStatus::ExecutionError);
    assert_eq!(
        unsafe { actsql_execution_match(db.as_ptr(), c("SELECT 1").as_ptr(), c("SELECT 1").as_ptr(), 0, &mut m) },
        ActsqlStatus::InvalidArgument
    );
}

#[test]
fn null_arguments_are_rejected() {
    let cat = Catalog::load();
    let mut out = ptr::null_mut();
    let status =
        unsafe { actsql_render_schema(ptr::null(), c("concert_singer").as_ptr(), c("create-eot").as_ptr(), ptr::null(), 0, &mut out) };
    assert_eq!(status, ActsqlStatus::NullPointer);
    let status = unsafe { actsql_render_schema(cat.0, ptr::null(), c("create-eot").as_ptr(), ptr::null(), 0, &mut out) };
    assert_eq!(status, ActsqlStatus::NullPointer);
    let status = unsafe { actsql_difficulty(cat.0, c("concert_singer").as_ptr(), c("SELECT 1").as_ptr(), ptr::null_mut()) };
    assert_eq!(status, ActsqlStatus::NullPointer);
    let bad = [0xffu8, 0];
    let status = unsafe { actsql_extract_sql(bad.as_ptr() as *const c_char, c("act-sql").as_ptr(), &mut out, ptr::null_mut()) };
    assert_eq!(status, ActsqlStatus::InvalidUtf8);
    unsafe { actsql_string_free(ptr::null_mut()) };
}

#[test]
fn errors_are_per_thread() {
    let mut out = ptr::null_mut();
    unsafe { actsql_extract_sql(c("x").as_ptr(), c("bad").as_ptr(), &mut out, ptr::null_mut()) };
    assert!(!actsql_last_error().is_null());
    std::thread::spawn(|| assert!(actsql_last_error().is_null())).join().unwrap();
}

#[test]
fn header_is_valid_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("actsql.h")).unwrap();
    for name in [
        "actsql_catalog_load",
        "actsql_catalog_free",
        "actsql_render_schema",
        "actsql_annotate",
        "actsql_exact_match",
        "actsql_difficulty",
        "actsql_extract_sql",
        "actsql_execution_match",
        "actsql_last_error",
        "actsql_string_free",
        "typedef struct ActsqlCatalog ActsqlCatalog",
        "ACTSQL_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"actsql.h\"\nint main(void) { ActsqlCatalog *c = 0; ActsqlStatus s = actsql_catalog_load(\"t.json\", &c); actsql_catalog_free(c); return (int)s; }\n",
    )
    .unwrap();
    let Ok(o) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"]).arg(&include).arg(&src).output() else {
        eprintln!("no C compiler found; syntax check skipped");
        return;
    };
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
