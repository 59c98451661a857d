use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ColumnSchema, ColumnType, DatabaseSchema, ForeignKey, SchemaCatalog, SchemaError, TableSchema};

#[derive(Deserialize, Serialize)]
struct RawDatabase {
    db_id: String,
    table_names_original: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table_names: Option<Vec<String>>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    column_names: Option<Vec<(i64, String)>>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<Value>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

pub fn load_schema_catalog(path: &Path) -> Result<SchemaCatalog, SchemaError> {
    if !path.exists() {
        return Err(SchemaError::MissingFile(path.to_path_buf()));
    }
    parse_schema_catalog(&std::fs::read_to_string(path)?)
}

pub fn parse_schema_catalog(text: &str) -> Result<SchemaCatalog, SchemaError> {
    let raw: Vec<Value> = serde_json::from_str(text).map_err(|e| SchemaError::malformed("schema document", e.to_string()))?;
    let mut databases = BTreeMap::new();
    for (i, v) in raw.into_iter().enumerate() {
        let hint = v.get("db_id").and_then(Value::as_str).unwrap_or("?").to_string();
        let rd: RawDatabase =
            serde_json::from_value(v).map_err(|e| SchemaError::malformed(format!("database #{i} ({hint})"), e.to_string()))?;
        let db = convert(rd)?;
        if databases.contains_key(&db.db_id) {
            return Err(SchemaError::malformed(format!("db_id {}", db.db_id), "duplicate db_id"));
        }
        databases.insert(db.db_id.clone(), db);
    }
    Ok(SchemaCatalog { databases })
}

fn convert(rd: RawDatabase) -> Result<DatabaseSchema, SchemaError> {
    let db_id = rd.db_id;
    let ctx = |field: &str| format!("db_id {db_id}, field {field}");
    if db_id.is_empty() {
        return Err(SchemaError::malformed("db_id", "empty db_id"));
    }
    if rd.column_types.len() != rd.column_names_original.len() {
        return Err(SchemaError::malformed(ctx("column_types"), "length differs from column_names_original"));
    }
    let mut tables: Vec<TableSchema> =
        rd.table_names_original.iter().map(|n| TableSchema { name: n.clone(), columns: Vec::new(), primary_key: Vec::new() }).collect();
    // global column index -> (table, local column); index 0 is the "*" sentinel
    let mut locate: Vec<Option<(usize, usize)>> = Vec::with_capacity(rd.column_names_original.len());
    for (gi, ((t, name), ty)) in rd.column_names_original.iter().zip(&rd.column_types).enumerate() {
        if *t < 0 {
            if gi != 0 || name != "*" {
                return Err(SchemaError::malformed(ctx("column_names_original"), format!("unexpected sentinel at {gi}")));
            }
            locate.push(None);
            continue;
        }
        let t = *t as usize;
        let table = tables.get_mut(t).ok_or_else(|| SchemaError::DanglingKeyReference {
            db_id: db_id.clone(),
            detail: format!("column {name:?} names table index {t}"),
        })?;
        let col_type = ColumnType::parse(ty).ok_or_else(|| SchemaError::malformed(ctx("column_types"), format!("unknown type {ty:?}")))?;
        locate.push(Some((t, table.columns.len())));
        table.columns.push(ColumnSchema { name: name.clone(), col_type });
    }
    let resolve = |gi: usize| -> Result<(usize, usize), SchemaError> {
        locate.get(gi).copied().flatten().ok_or_else(|| SchemaError::DanglingKeyReference {
            db_id: db_id.clone(),
            detail: format!("column index {gi} does not name a column"),
        })
    };
    for pk in &rd.primary_keys {
        let members: Vec<usize> = match pk {
            Value::Number(n) => vec![n.as_u64().ok_or_else(|| SchemaError::malformed(ctx("primary_keys"), "negative index"))? as usize],
            Value::Array(items) => items
                .iter()
                .map(|x| x.as_u64().map(|v| v as usize))
                .collect::<Option<_>>()
                .ok_or_else(|| SchemaError::malformed(ctx("primary_keys"), "non-integer member"))?,
            _ => return Err(SchemaError::malformed(ctx("primary_keys"), "expected index or index list")),
        };
        for gi in members {
            let (t, c) = resolve(gi)?;
            if !tables[t].primary_key.contains(&c) {
                tables[t].primary_key.push(c);
            }
        }
    }
    let mut foreign_keys = Vec::with_capacity(rd.foreign_keys.len());
    for (child, parent) in rd.foreign_keys {
        let (child_table, child_column) = resolve(child)?;
        let (parent_table, parent_column) = resolve(parent)?;
        foreign_keys.push(ForeignKey { child_table, child_column, parent_table, parent_column });
    }
    let db = DatabaseSchema { db_id, tables, foreign_keys };
    db.validate()?;
    Ok(db)
}

fn readable(name: &str) -> String {
    name.replace('_', " ").to_lowercase()
}

/// Serializes a catalog back into the Spider tables document layout.
pub fn write_schema_catalog(catalog: &SchemaCatalog) -> String {
    let docs: Vec<RawDatabase> = catalog.databases.values().map(to_raw).collect();
    serde_json::to_string_pretty(&docs).expect("schema document serializes")
}

fn to_raw(db: &DatabaseSchema) -> RawDatabase {
    let mut cols = vec![(-1i64, "*".to_string())];
    let mut types = vec!["text".to_string()];
    let mut offsets = Vec::with_capacity(db.tables.len());
    for (ti, t) in db.tables.iter().enumerate() {
        offsets.push(cols.len());
        for c in &t.columns {
            cols.push((ti as i64, c.name.clone()));
            types.push(c.col_type.as_str().to_string());
        }
    }
    let mut primary_keys = Vec::new();
    for (ti, t) in db.tables.iter().enumerate() {
        match t.primary_key.as_slice() {
            [] => {}
            [k] => primary_keys.push(Value::from(offsets[ti] + k)),
            ks => primary_keys.push(Value::from(ks.iter().map(|k| offsets[ti] + k).collect::<Vec<_>>())),
        }
    }
    RawDatabase {
        db_id: db.db_id.clone(),
        table_names: Some(db.tables.iter().map(|t| readable(&t.name)).collect()),
        table_names_original: db.tables.iter().map(|t| t.name.clone()).collect(),
        column_names: Some(cols.iter().map(|(t, n)| (*t, if *t < 0 { n.clone() } else { readable(n) })).collect()),
        column_names_original: cols,
        column_types: types,
        primary_keys,
        foreign_keys: db
            .foreign_keys
            .iter()
            .map(|fk| (offsets[fk.child_table] + fk.child_column, offsets[fk.parent_table] + fk.parent_column))
            .collect(),
    }
}
