//! Prompt assembly for zero-shot, few-shot and auto-CoT prompting, prediction,
//! and multi-turn question rewriting.

mod extract;
mod rewrite;

pub use extract::{extract_sql, ExtractionStatus};
pub use rewrite::{
    numbered, parse_numbered_list, rewrite_interaction, rewrite_messages, RewriteError, RewriteOutcome, RewritePair, RewriteResources,
    DEFAULT_INSTRUCTION,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::cot;
use crate::exemplar::{select_filtered, ExemplarPool, SelectionConfig, SelectionError};
use crate::llm::{ChatMessage, Gateway, GenerationParams, LlmError};
use crate::schema::{database_path, sample_all, ContentRows, DatabaseSchema, Example, SchemaCatalog, SchemaError};
use crate::similarity::SimilarityProvider;
use crate::style::{render_schema, DbStyle, StyleError};

pub const SYSTEM_INSTRUCTION: &str = "Given the database schema, you need to translate the question into the SQL query.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ZeroShot,
    FewShot,
    ActSql,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ZeroShot => "zero-shot",
            Mode::FewShot => "few-shot",
            Mode::ActSql => "act-sql",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('_', "-").as_str() {
            "zero-shot" => Ok(Mode::ZeroShot),
            "few-shot" => Ok(Mode::FewShot),
            "act-sql" => Ok(Mode::ActSql),
            _ => Err(format!("unknown mode {s:?} (expected zero-shot, few-shot or act-sql)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    ConfigInvariantViolated(String),
    #[error("database {0:?} not found in the catalog")]
    UnknownDatabase(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Gateway(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub style: DbStyle,
    pub content_rows: usize,
    pub selection: SelectionConfig,
    pub params: GenerationParams,
}

impl PipelineConfig {
    /// Defaults for `mode`: Create(EoT) style, 3 content rows, two static and
    /// two dynamic exemplars, temperature 0.
    pub fn for_mode(mode: Mode) -> Self {
        let (selection, params) = match mode {
            Mode::ZeroShot => (SelectionConfig { n_s: 0, n_d: 0, seed: 0 }, GenerationParams::plain()),
            Mode::FewShot => (SelectionConfig::default(), GenerationParams::plain()),
            Mode::ActSql => (SelectionConfig::default(), GenerationParams::cot()),
        };
        PipelineConfig { mode, style: DbStyle::CreateEoT, content_rows: 3, selection, params }
    }

    pub fn exemplar_count(&self) -> usize {
        self.selection.n_s + self.selection.n_d
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let n = self.exemplar_count();
        match self.mode {
            Mode::ZeroShot if n != 0 => Err(PipelineError::ConfigInvariantViolated("zero-shot mode takes no exemplars".into())),
            Mode::FewShot | Mode::ActSql if n == 0 => {
                Err(PipelineError::ConfigInvariantViolated(format!("{} mode needs at least one exemplar", self.mode)))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub instruction: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub source_id: String,
    pub sql: String,
    pub raw_reply: String,
    pub extraction_status: ExtractionStatus,
}

impl Prediction {
    /// Dump record `{source_id, sql, extraction_status}`.
    pub fn to_record(&self) -> serde_json::Value {
        serde_json::json!({
            "source_id": self.source_id,
            "sql": self.sql,
            "extraction_status": self.extraction_status,
        })
    }
}

/// Supplies sampled content rows for a schema; `c = 0` means none.
pub trait RowsProvider: Send + Sync {
    fn content_rows(&self, schema: &DatabaseSchema, c: usize) -> Result<Option<Arc<BTreeMap<String, ContentRows>>>, SchemaError>;
}

/// No content rows for any database.
pub struct NoRows;

impl RowsProvider for NoRows {
    fn content_rows(&self, _: &DatabaseSchema, _: usize) -> Result<Option<Arc<BTreeMap<String, ContentRows>>>, SchemaError> {
        Ok(None)
    }
}

type SampledRows = Arc<BTreeMap<String, ContentRows>>;

/// Reads `<root>/<db_id>/<db_id>.sqlite`, memoizing samples per (db_id, c).
pub struct DbRootRows {
    root: PathBuf,
    memo: Mutex<HashMap<(String, usize), SampledRows>>,
}

impl DbRootRows {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DbRootRows { root: root.into(), memo: Mutex::new(HashMap::new()) }
    }
}

impl RowsProvider for DbRootRows {
    fn content_rows(&self, schema: &DatabaseSchema, c: usize) -> Result<Option<Arc<BTreeMap<String, ContentRows>>>, SchemaError> {
        if c == 0 {
            return Ok(None);
        }
        let key = (schema.db_id.clone(), c);
        if let Some(hit) = self.memo.lock().expect("rows lock").get(&key) {
            return Ok(Some(hit.clone()));
        }
        let rows = Arc::new(sample_all(&database_path(&self.root, &schema.db_id), schema, c)?);
        self.memo.lock().expect("rows lock").insert(key, rows.clone());
        Ok(Some(rows))
    }
}

fn user_message(
    schema: &DatabaseSchema,
    question: &str,
    config: &PipelineConfig,
    rows: &dyn RowsProvider,
) -> Result<String, PipelineError> {
    let sampled = rows.content_rows(schema, config.content_rows)?;
    let rendered = render_schema(schema, config.style, sampled.as_deref())?;
    Ok(format!("Database schema:\n{}\nQuestion: {}", rendered.text, question))
}

/// Messages: system instruction, one user/assistant pair per exemplar, then the test case.
pub fn build_prompt(
    example: &Example,
    schema: &DatabaseSchema,
    exemplars: &[(Example, &DatabaseSchema, String)],
    config: &PipelineConfig,
    rows: &dyn RowsProvider,
) -> Result<PromptBundle, PipelineError> {
    config.validate()?;
    if exemplars.len() != config.exemplar_count() {
        return Err(PipelineError::ConfigInvariantViolated(format!(
            "expected {} exemplars, got {}",
            config.exemplar_count(),
            exemplars.len()
        )));
    }
    let mut messages = vec![ChatMessage::system(SYSTEM_INSTRUCTION)];
    for (ex, ex_schema, answer) in exemplars {
        messages.push(ChatMessage::user(user_message(ex_schema, &ex.question, config, rows)?));
        messages.push(ChatMessage::assistant(answer.clone()));
    }
    messages.push(ChatMessage::user(user_message(schema, &example.question, config, rows)?));
    Ok(PromptBundle { instruction: SYSTEM_INSTRUCTION.to_string(), messages })
}

/// Everything a prediction run needs; shareable across worker threads.
pub struct Pipeline<'a> {
    pub config: PipelineConfig,
    pub catalog: &'a SchemaCatalog,
    pub rows: &'a dyn RowsProvider,
    pub pool: &'a ExemplarPool,
    pub sim: &'a dyn SimilarityProvider,
    pub gateway: &'a Gateway,
    answers: Mutex<HashMap<String, Option<String>>>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: PipelineConfig,
        catalog: &'a SchemaCatalog,
        rows: &'a dyn RowsProvider,
        pool: &'a ExemplarPool,
        sim: &'a dyn SimilarityProvider,
        gateway: &'a Gateway,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Pipeline { config, catalog, rows, pool, sim, gateway, answers: Mutex::new(HashMap::new()) })
    }

    /// Exemplar answer: gold SQL in few-shot mode, CoT text in act-sql mode.
    /// `None` when the exemplar cannot be used.
    pub fn exemplar_answer(&self, ex: &Example) -> Option<String> {
        if let Some(hit) = self.answers.lock().expect("answer lock").get(&ex.source_id) {
            return hit.clone();
        }
        let answer = self.catalog.get(&ex.db_id).and_then(|schema| match self.config.mode {
            Mode::ActSql => cot::annotate(ex, schema, self.sim).ok().map(|a| a.text),
            _ => Some(ex.gold_sql.clone()),
        });
        self.answers.lock().expect("answer lock").insert(ex.source_id.clone(), answer.clone());
        answer
    }

    pub fn prompt_for(&self, example: &Example) -> Result<PromptBundle, PipelineError> {
        let schema = self.catalog.get(&example.db_id).ok_or_else(|| PipelineError::UnknownDatabase(example.db_id.clone()))?;
        let picked = if self.config.exemplar_count() == 0 {
            Vec::new()
        } else {
            select_filtered(self.pool, example, &self.config.selection, self.sim, &|e| self.exemplar_answer(e).is_some())?
        };
        let exemplars: Vec<(Example, &DatabaseSchema, String)> = picked
            .into_iter()
            .map(|e| {
                let s = self.catalog.get(&e.db_id).expect("accepted exemplars have a schema");
                let answer = self.exemplar_answer(&e).expect("accepted exemplars have an answer");
                (e, s, answer)
            })
            .collect();
        build_prompt(example, schema, &exemplars, &self.config, self.rows)
    }

    /// Exactly one gateway call per example.
    pub fn predict(&self, example: &Example) -> Result<Prediction, PipelineError> {
        let bundle = self.prompt_for(example)?;
        let reply = self.gateway.complete_chat(&bundle.messages, &self.config.params)?;
        let (sql, extraction_status) = extract_sql(&reply.content, self.config.mode);
        Ok(Prediction { source_id: example.source_id.clone(), sql, raw_reply: reply.content, extraction_status })
    }

    /// Predicts with up to `jobs` worker threads; results keep input order.
    pub fn predict_batch(&self, examples: &[Example], jobs: usize) -> Vec<Result<Prediction, PipelineError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Prediction, PipelineError>>>> = examples.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..jobs.clamp(1, examples.len().max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= examples.len() {
                        break;
                    }
                    *slots[i].lock().expect("slot lock") = Some(self.predict(&examples[i]));
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every slot filled")).collect()
    }
}
