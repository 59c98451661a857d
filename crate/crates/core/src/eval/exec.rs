//! Sandboxed query execution and result comparison.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use super::EvalError;
use crate::sql;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const FLOAT_REL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Cell {
    fn from_ref(v: ValueRef<'_>) -> Cell {
        match v {
            ValueRef::Null => Cell::Null,
            ValueRef::Integer(i) => Cell::Int(i),
            ValueRef::Real(f) => Cell::Real(f),
            ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
        }
    }

    fn number(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Real(f) => Some(*f),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Int(_) | Cell::Real(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }

    /// Equality with relative float tolerance; NULL equals only NULL.
    pub fn matches(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a == b,
            (a, b) if a.rank() == 1 && b.rank() == 1 => {
                let (x, y) = (a.number().unwrap_or(0.0), b.number().unwrap_or(0.0));
                x == y || (x - y).abs() <= FLOAT_REL_TOLERANCE * x.abs().max(y.abs())
            }
            (a, b) => a == b,
        }
    }

    fn total_cmp(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Blob(a), Cell::Blob(b)) => a.cmp(b),
            (a, b) if a.rank() == 1 && b.rank() == 1 => a.number().unwrap_or(0.0).total_cmp(&b.number().unwrap_or(0.0)),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

pub type ResultSet = Vec<Vec<Cell>>;

fn open(db_path: &Path) -> Result<Connection, String> {
    if !db_path.is_file() {
        return Err(format!("database {} not found", db_path.display()));
    }
    Connection::open_with_flags(db_path, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX).map_err(|e| e.to_string())
}

/// Runs one read-only statement, interrupting it once `timeout` elapses.
pub fn execute(db_path: &Path, query: &str, timeout: Duration) -> Result<ResultSet, String> {
    let conn = open(db_path)?;
    let start = Instant::now();
    conn.progress_handler(1000, Some(move || start.elapsed() > timeout)).map_err(|e| e.to_string())?;
    let mut stmt = conn.prepare(query).map_err(|e| e.to_string())?;
    if !stmt.readonly() {
        return Err("statement writes to the database".into());
    }
    let width = stmt.column_count();
    let mut rows = stmt.query([]).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    loop {
        match rows.next() {
            Ok(Some(row)) => {
                let mut cells = Vec::with_capacity(width);
                for i in 0..width {
                    cells.push(Cell::from_ref(row.get_ref(i).map_err(|e| e.to_string())?));
                }
                out.push(cells);
            }
            Ok(None) => break,
            Err(e) => {
                return Err(if start.elapsed() > timeout { format!("timed out after {timeout:?}") } else { e.to_string() });
            }
        }
    }
    Ok(out)
}

fn rows_match(a: &[Cell], b: &[Cell]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.matches(y))
}

fn row_cmp(a: &[Cell], b: &[Cell]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len()))
}

/// Positional column comparison; `ordered` compares row sequences, otherwise multisets.
pub fn results_match(pred: &ResultSet, gold: &ResultSet, ordered: bool) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    if ordered {
        return pred.iter().zip(gold).all(|(a, b)| rows_match(a, b));
    }
    let mut p: Vec<&Vec<Cell>> = pred.iter().collect();
    let mut g: Vec<&Vec<Cell>> = gold.iter().collect();
    p.sort_by(|a, b| row_cmp(a, b));
    g.sort_by(|a, b| row_cmp(a, b));
    p.iter().zip(&g).all(|(a, b)| rows_match(a, b))
}

/// True when the outermost query carries an ORDER BY.
pub fn has_top_level_order_by(gold: &str) -> bool {
    match sql::parse_unbound(gold) {
        Ok(q) => {
            let mut last = &q;
            while let Some((_, next)) = &last.set_op {
                last = next;
            }
            !q.select.order_by.is_empty() || !last.select.order_by.is_empty()
        }
        Err(_) => gold.to_ascii_lowercase().split_whitespace().collect::<Vec<_>>().join(" ").contains("order by"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecVerdict {
    pub matched: bool,
    pub reason: Option<String>,
}

/// Execution match with the failure reason of the prediction, if any.
/// A gold failure is a configuration error.
pub fn execution_verdict(pred: &str, gold: &str, db_path: &Path, timeout: Duration) -> Result<ExecVerdict, EvalError> {
    let gold_rows = execute(db_path, gold, timeout).map_err(|detail| EvalError::GoldExecutionFailure {
        db: PathBuf::from(db_path),
        sql: gold.to_string(),
        detail,
    })?;
    if pred.trim().is_empty() {
        return Ok(ExecVerdict { matched: false, reason: Some("empty prediction".into()) });
    }
    Ok(match execute(db_path, pred, timeout) {
        Ok(rows) => {
            let matched = results_match(&rows, &gold_rows, has_top_level_order_by(gold));
            ExecVerdict { matched, reason: (!matched).then(|| "result mismatch".to_string()) }
        }
        Err(e) => ExecVerdict { matched: false, reason: Some(e) },
    })
}

pub fn execution_match(pred: &str, gold: &str, db_path: &Path) -> Result<bool, EvalError> {
    Ok(execution_verdict(pred, gold, db_path, DEFAULT_TIMEOUT)?.matched)
}

pub fn test_suite_verdict(pred: &str, gold: &str, variants: &[PathBuf], timeout: Duration) -> Result<ExecVerdict, EvalError> {
    if variants.is_empty() {
        return Err(EvalError::NoVariants);
    }
    for v in variants {
        let verdict = execution_verdict(pred, gold, v, timeout)?;
        if !verdict.matched {
            let reason = verdict.reason.map(|r| format!("{}: {r}", v.display()));
            return Ok(ExecVerdict { matched: false, reason });
        }
    }
    Ok(ExecVerdict { matched: true, reason: None })
}

pub fn test_suite_match(pred: &str, gold: &str, variants: &[PathBuf]) -> Result<bool, EvalError> {
    Ok(test_suite_verdict(pred, gold, variants, DEFAULT_TIMEOUT)?.matched)
}

/// `<variants_root>/<db_id>/*.sqlite`, sorted; `None` if the directory is absent or empty.
pub fn variant_paths(variants_root: &Path, db_id: &str) -> Option<Vec<PathBuf>> {
    let dir = variants_root.join(db_id);
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "sqlite"))
        .collect();
    out.sort();
    (!out.is_empty()).then_some(out)
}
