use std::collections::BTreeMap;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use super::{DatabaseSchema, SchemaError, TableSchema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentRows {
    pub table_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Python-`repr`-compatible float formatting.
fn render_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:?}");
    match s.split_once('e') {
        None => s,
        Some((mant, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mant}e{sign}{digits:0>2}")
        }
    }
}

pub fn render_value(v: ValueRef<'_>) -> Result<String, String> {
    match v {
        ValueRef::Null => Ok(String::new()),
        ValueRef::Integer(i) => Ok(i.to_string()),
        ValueRef::Real(r) => Ok(render_real(r)),
        ValueRef::Text(b) | ValueRef::Blob(b) => std::str::from_utf8(b).map(str::to_string).map_err(|e| format!("invalid UTF-8: {e}")),
    }
}

fn quote_ident(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub(crate) fn open_read_only(db_path: &Path) -> Result<Connection, SchemaError> {
    if !db_path.is_file() {
        return Err(SchemaError::MissingDatabase(db_path.to_path_buf()));
    }
    let conn = Connection::open_with_flags(db_path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)?;
    Ok(conn)
}

fn sample_with(conn: &Connection, table: &TableSchema, c: usize) -> Result<ContentRows, SchemaError> {
    let exists: bool = conn.query_row(
        "SELECT count(*) FROM sqlite_master WHERE type IN ('table','view') AND name = ?1 COLLATE NOCASE",
        [&table.name],
        |r| r.get::<_, i64>(0).map(|n| n > 0),
    )?;
    if !exists {
        return Err(SchemaError::MissingTable(table.name.clone()));
    }
    let header: Vec<String> = table.columns.iter().map(|c| c.name.clone()).collect();
    let mut rows = Vec::new();
    if c > 0 {
        let cols: Vec<String> = header.iter().map(|h| quote_ident(h)).collect();
        let sql = format!("SELECT {} FROM {} LIMIT {c}", cols.join(", "), quote_ident(&table.name));
        let mut stmt = conn.prepare(&sql)?;
        let mut cursor = stmt.query([])?;
        while let Some(row) = cursor.next()? {
            let mut cells = Vec::with_capacity(header.len());
            for (i, h) in header.iter().enumerate() {
                let cell = render_value(row.get_ref(i)?).map_err(|detail| SchemaError::ValueRenderFailure {
                    table: table.name.clone(),
                    column: h.clone(),
                    detail,
                })?;
                cells.push(cell);
            }
            rows.push(cells);
        }
    }
    Ok(ContentRows { table_name: table.name.clone(), header, rows })
}

/// First `c` rows of `table` in storage order.
pub fn sample_content_rows(db_path: &Path, table: &TableSchema, c: usize) -> Result<ContentRows, SchemaError> {
    let conn = open_read_only(db_path)?;
    sample_with(&conn, table, c)
}

/// Samples every table of `schema` over one connection.
pub fn sample_all(db_path: &Path, schema: &DatabaseSchema, c: usize) -> Result<BTreeMap<String, ContentRows>, SchemaError> {
    let conn = open_read_only(db_path)?;
    schema.tables.iter().map(|t| Ok((t.name.clone(), sample_with(&conn, t, c)?))).collect()
}
