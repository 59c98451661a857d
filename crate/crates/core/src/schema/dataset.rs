use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{tokenize_question, SchemaCatalog, SchemaError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub db_id: String,
    pub question: String,
    pub question_tokens: Vec<String>,
    pub gold_sql: String,
    pub source_id: String,
}

impl Example {
    pub fn new(db_id: impl Into<String>, question: impl Into<String>, gold_sql: impl Into<String>, source_id: impl Into<String>) -> Self {
        let question = question.into();
        Example {
            db_id: db_id.into(),
            question_tokens: tokenize_question(&question),
            question,
            gold_sql: gold_sql.into(),
            source_id: source_id.into(),
        }
    }

    /// Spider-style record: `{db_id, question, query, source_id}`.
    pub fn to_record(&self) -> Value {
        serde_json::json!({
            "db_id": self.db_id,
            "question": self.question,
            "query": self.gold_sql,
            "source_id": self.source_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub question: String,
    pub gold_sql: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub db_id: String,
    pub turns: Vec<Turn>,
    pub source_id: String,
}

impl Interaction {
    pub fn turn_id(&self, t: usize) -> String {
        format!("{}-{t}", self.source_id)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "examples".into())
}

fn read_records(path: &Path) -> Result<Vec<Value>, SchemaError> {
    if !path.exists() {
        return Err(SchemaError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SchemaError::malformed(path.display().to_string(), e.to_string()))
}

fn str_field<'a>(rec: &'a Value, field: &str, index: usize) -> Result<&'a str, SchemaError> {
    rec.get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| SchemaError::malformed(format!("record {index}"), format!("missing string field {field:?}")))
}

pub fn load_examples(path: &Path, catalog: &SchemaCatalog) -> Result<Vec<Example>, SchemaError> {
    let base = stem(path);
    let mut out = Vec::new();
    for (i, rec) in read_records(path)?.iter().enumerate() {
        let db_id = str_field(rec, "db_id", i)?;
        if catalog.get(db_id).is_none() {
            return Err(SchemaError::UnknownDbId { index: i, db_id: db_id.to_string() });
        }
        let question = str_field(rec, "question", i)?;
        let query = str_field(rec, "query", i)?;
        let source_id = rec.get("source_id").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| format!("{base}-{i}"));
        out.push(Example::new(db_id, question, query, source_id));
    }
    Ok(out)
}

pub fn load_interactions(path: &Path, catalog: &SchemaCatalog) -> Result<Vec<Interaction>, SchemaError> {
    let base = stem(path);
    let mut out = Vec::new();
    for (i, rec) in read_records(path)?.iter().enumerate() {
        let db_id = str_field(rec, "database_id", i)?;
        if catalog.get(db_id).is_none() {
            return Err(SchemaError::UnknownDbId { index: i, db_id: db_id.to_string() });
        }
        let raw = rec
            .get("interaction")
            .and_then(Value::as_array)
            .ok_or_else(|| SchemaError::malformed(format!("record {i}"), "missing interaction list"))?;
        let mut turns: Vec<(String, Option<String>)> = Vec::with_capacity(raw.len());
        for turn in raw {
            let q = str_field(turn, "utterance", i)?.to_string();
            let sql = turn.get("query").and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty());
            turns.push((q, sql.map(str::to_string)));
        }
        while turns.last().is_some_and(|(_, s)| s.is_none()) {
            turns.pop();
        }
        if turns.is_empty() {
            return Err(SchemaError::malformed(format!("record {i}"), "interaction has no turn with SQL"));
        }
        let turns = turns
            .into_iter()
            .enumerate()
            .map(|(t, (question, sql))| {
                sql.map(|gold_sql| Turn { question, gold_sql })
                    .ok_or_else(|| SchemaError::malformed(format!("record {i}, turn {t}"), "turn without SQL"))
            })
            .collect::<Result<_, _>>()?;
        let source_id = rec.get("source_id").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| format!("{base}-{i}"));
        out.push(Interaction { db_id: db_id.to_string(), turns, source_id });
    }
    Ok(out)
}
