//! Schema serialization in the five prompt styles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::schema::{ContentRows, DatabaseSchema, TableSchema};

const INDENT: &str = "    ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DbStyle {
    TableColumn,
    TableColumnPf,
    CreateNoPf,
    CreateEoC,
    CreateEoT,
}

impl DbStyle {
    pub const ALL: [DbStyle; 5] =
        [DbStyle::TableColumn, DbStyle::TableColumnPf, DbStyle::CreateNoPf, DbStyle::CreateEoC, DbStyle::CreateEoT];

    pub fn name(self) -> &'static str {
        match self {
            DbStyle::TableColumn => "table-column",
            DbStyle::TableColumnPf => "table-column-pf",
            DbStyle::CreateNoPf => "create-nopf",
            DbStyle::CreateEoC => "create-eoc",
            DbStyle::CreateEoT => "create-eot",
        }
    }
}

impl fmt::Display for DbStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DbStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DbStyle::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown style {s:?}"))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StyleError {
    #[error("content rows given for unknown table {0:?}")]
    UnknownTableInRows(String),
    #[error("content rows for {rows:?} passed with table {table:?}")]
    TableNameMismatch { table: String, rows: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaPrompt {
    pub text: String,
    pub style: DbStyle,
    pub content_rows_per_table: usize,
}

pub fn render_content_block(table: &TableSchema, rows: &ContentRows) -> Result<String, StyleError> {
    if rows.table_name != table.name {
        return Err(StyleError::TableNameMismatch { table: table.name.clone(), rows: rows.table_name.clone() });
    }
    let mut lines = vec!["/*".to_string(), format!("{} example rows from table {}:", rows.rows.len(), table.name), rows.header.join("\t")];
    lines.extend(rows.rows.iter().map(|r| r.join("\t")));
    lines.push("**/".into());
    Ok(lines.join("\n"))
}

fn qualified(schema: &DatabaseSchema, t: usize, c: usize) -> String {
    let table = &schema.tables[t];
    format!("{}.{}", table.name, table.columns[c].name)
}

fn references(schema: &DatabaseSchema, parent_table: usize, parent_column: usize) -> String {
    let p = &schema.tables[parent_table];
    format!("references {}({})", p.name, p.columns[parent_column].name)
}

fn table_column_line(table: &TableSchema) -> String {
    let cols: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    format!("# {}({})", table.name, cols.join(", "))
}

fn create_block(schema: &DatabaseSchema, ti: usize, style: DbStyle) -> String {
    let table = &schema.tables[ti];
    let fks: Vec<_> = schema.foreign_keys.iter().filter(|fk| fk.child_table == ti).collect();
    let inline_pk = style == DbStyle::CreateEoC && table.primary_key.len() == 1;
    let mut body: Vec<String> = table
        .columns
        .iter()
        .enumerate()
        .map(|(ci, col)| {
            let mut line = format!("{INDENT}{} {}", col.name, col.col_type);
            if style == DbStyle::CreateEoC {
                if inline_pk && table.primary_key[0] == ci {
                    line.push_str(" primary key");
                }
                for fk in fks.iter().filter(|fk| fk.child_column == ci) {
                    line.push(' ');
                    line.push_str(&references(schema, fk.parent_table, fk.parent_column));
                }
            }
            line
        })
        .collect();
    let pk_line = |t: &TableSchema| {
        let names: Vec<&str> = t.primary_key.iter().map(|&k| t.columns[k].name.as_str()).collect();
        format!("{INDENT}primary key ({})", names.join(", "))
    };
    match style {
        DbStyle::CreateEoT => {
            if !table.primary_key.is_empty() {
                body.push(pk_line(table));
            }
            for fk in &fks {
                body.push(format!(
                    "{INDENT}foreign key ({}) {}",
                    table.columns[fk.child_column].name,
                    references(schema, fk.parent_table, fk.parent_column)
                ));
            }
        }
        DbStyle::CreateEoC if table.primary_key.len() > 1 => body.push(pk_line(table)),
        _ => {}
    }
    format!("create table {} (\n{}\n)", table.name, body.join(",\n"))
}

pub fn render_schema(
    schema: &DatabaseSchema,
    style: DbStyle,
    rows: Option<&BTreeMap<String, ContentRows>>,
) -> Result<SchemaPrompt, StyleError> {
    if let Some(rows) = rows {
        if let Some(bad) = rows.keys().find(|k| schema.table(k).is_none()) {
            return Err(StyleError::UnknownTableInRows(bad.clone()));
        }
    }
    let block_for = |t: &TableSchema| -> Result<Option<String>, StyleError> {
        let found = rows.and_then(|m| m.get(&t.name).or_else(|| m.iter().find(|(k, _)| k.eq_ignore_ascii_case(&t.name)).map(|(_, v)| v)));
        found.map(|r| render_content_block(t, r)).transpose()
    };
    let mut parts: Vec<String> = Vec::new();
    for (ti, table) in schema.tables.iter().enumerate() {
        parts.push(match style {
            DbStyle::TableColumn | DbStyle::TableColumnPf => table_column_line(table),
            _ => create_block(schema, ti, style),
        });
        if let Some(block) = block_for(table)? {
            parts.push(block);
        }
    }
    if style == DbStyle::TableColumnPf {
        let pks: Vec<String> = schema
            .tables
            .iter()
            .enumerate()
            .flat_map(|(ti, t)| t.primary_key.iter().map(move |&c| (ti, c)))
            .map(|(t, c)| qualified(schema, t, c))
            .collect();
        let fks: Vec<String> = schema
            .foreign_keys
            .iter()
            .map(|fk| {
                format!("{} = {}", qualified(schema, fk.child_table, fk.child_column), qualified(schema, fk.parent_table, fk.parent_column))
            })
            .collect();
        parts.push(format!("# primary keys = [{}]", pks.join(", ")));
        parts.push(format!("# foreign keys = [{}]", fks.join(", ")));
    }
    let content_rows_per_table = rows.and_then(|m| m.values().map(|r| r.rows.len()).max()).unwrap_or(0);
    Ok(SchemaPrompt { text: parts.join("\n"), style, content_rows_per_table })
}
