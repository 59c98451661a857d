//! Database schemas, dataset records and sampled table contents.

mod content;
mod dataset;
mod spider;
mod tokenize;

pub use content::{render_value, sample_all, sample_content_rows, ContentRows};
pub use dataset::{load_examples, load_interactions, Example, Interaction, Turn};
pub use spider::{load_schema_catalog, parse_schema_catalog, write_schema_catalog};
pub use tokenize::tokenize_question;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed document ({context}): {detail}")]
    MalformedDocument { context: String, detail: String },
    #[error("dangling key reference in {db_id}: {detail}")]
    DanglingKeyReference { db_id: String, detail: String },
    #[error("record {index}: unknown db_id {db_id:?}")]
    UnknownDbId { index: usize, db_id: String },
    #[error("database file not found: {0}")]
    MissingDatabase(PathBuf),
    #[error("table {0:?} not present in database file")]
    MissingTable(String),
    #[error("cannot render value in {table}.{column}: {detail}")]
    ValueRenderFailure { table: String, column: String, detail: String },
    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SchemaError {
    pub(crate) fn malformed(context: impl Into<String>, detail: impl Into<String>) -> Self {
        SchemaError::MalformedDocument { context: context.into(), detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Number,
    Text,
    Time,
    Boolean,
    Others,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Number => "number",
            ColumnType::Text => "text",
            ColumnType::Time => "time",
            ColumnType::Boolean => "boolean",
            ColumnType::Others => "others",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "number" => ColumnType::Number,
            "text" => ColumnType::Text,
            "time" => ColumnType::Time,
            "boolean" => ColumnType::Boolean,
            "others" => ColumnType::Others,
            _ => return None,
        })
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub name: String,
    pub col_type: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
    pub primary_key: Vec<usize>,
}

impl TableSchema {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ForeignKey {
    pub child_table: usize,
    pub child_column: usize,
    pub parent_table: usize,
    pub parent_column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<TableSchema>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl DatabaseSchema {
    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.table_index(name).map(|i| &self.tables[i])
    }

    /// Checks the structural invariants a loader must guarantee.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let ctx = |d: String| SchemaError::malformed(format!("db_id {}", self.db_id), d);
        if self.db_id.is_empty() {
            return Err(SchemaError::malformed("db_id", "empty db_id"));
        }
        for (i, t) in self.tables.iter().enumerate() {
            if self.tables[..i].iter().any(|o| o.name.eq_ignore_ascii_case(&t.name)) {
                return Err(ctx(format!("duplicate table name {:?}", t.name)));
            }
            for (j, c) in t.columns.iter().enumerate() {
                if t.columns[..j].iter().any(|o| o.name.eq_ignore_ascii_case(&c.name)) {
                    return Err(ctx(format!("duplicate column {}.{}", t.name, c.name)));
                }
            }
            if let Some(&k) = t.primary_key.iter().find(|&&k| k >= t.columns.len()) {
                return Err(SchemaError::DanglingKeyReference {
                    db_id: self.db_id.clone(),
                    detail: format!("primary key index {k} out of range for {}", t.name),
                });
            }
        }
        for fk in &self.foreign_keys {
            let ok = |t: usize, c: usize| self.tables.get(t).is_some_and(|t| c < t.columns.len());
            if !ok(fk.child_table, fk.child_column) || !ok(fk.parent_table, fk.parent_column) {
                return Err(SchemaError::DanglingKeyReference { db_id: self.db_id.clone(), detail: format!("foreign key {fk:?}") });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaCatalog {
    pub databases: BTreeMap<String, DatabaseSchema>,
}

impl SchemaCatalog {
    pub fn get(&self, db_id: &str) -> Option<&DatabaseSchema> {
        self.databases.get(db_id)
    }

    pub fn len(&self) -> usize {
        self.databases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.databases.is_empty()
    }
}

/// Conventional location of a database file under a Spider-style root.
pub fn database_path(db_root: &std::path::Path, db_id: &str) -> PathBuf {
    db_root.join(db_id).join(format!("{db_id}.sqlite"))
}
