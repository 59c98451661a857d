//! Parsing, analysis and normalization for the Spider SQL subset.

pub mod ast;
mod bind;
mod canonical;
mod hardness;
mod lexer;
mod parser;
mod summary;

pub use ast::Query;
pub use canonical::CanonicalSql;
pub use hardness::{component_counts, Difficulty};
pub use summary::{SchemaColumn, SqlSummary};

use crate::schema::DatabaseSchema;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("cannot resolve column {0:?}")]
    UnresolvableColumn(String),
    #[error("ambiguous column {0:?}")]
    AmbiguousColumn(String),
}

/// Parses without schema binding.
pub fn parse_unbound(text: &str) -> Result<Query, SqlError> {
    parser::parse_query(text)
}

/// Parses and resolves every table and column reference against `schema`.
pub fn parse_sql(text: &str, schema: &DatabaseSchema) -> Result<Query, SqlError> {
    let mut q = parser::parse_query(text)?;
    bind::bind(&mut q, schema)?;
    Ok(q)
}

pub fn summarize(query: &Query, schema: &DatabaseSchema) -> SqlSummary {
    summary::summarize(query, schema)
}

pub fn normalize_for_em(text: &str, schema: &DatabaseSchema) -> Result<CanonicalSql, SqlError> {
    Ok(canonical::canonicalize(&parse_sql(text, schema)?, schema))
}

/// Exact-match verdict with the reason for a failed parse of either side.
pub fn exact_match_verdict(pred: &str, gold: &str, schema: &DatabaseSchema) -> (bool, Option<String>) {
    let gold = match normalize_for_em(gold, schema) {
        Ok(g) => g,
        Err(e) => return (false, Some(format!("gold: {e}"))),
    };
    match normalize_for_em(pred, schema) {
        Ok(p) => (p == gold, None),
        Err(e) => (false, Some(format!("pred: {e}"))),
    }
}

pub fn exact_match(pred: &str, gold: &str, schema: &DatabaseSchema) -> bool {
    exact_match_verdict(pred, gold, schema).0
}

pub fn difficulty(gold: &str, schema: &DatabaseSchema) -> Result<Difficulty, SqlError> {
    Ok(hardness::classify(&parse_sql(gold, schema)?))
}

/// Difficulty of an already-parsed query.
pub fn classify(query: &Query) -> Difficulty {
    hardness::classify(query)
}
