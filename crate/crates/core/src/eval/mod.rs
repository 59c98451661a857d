//! EM / EX / TS scoring, difficulty buckets, and multi-turn QM / IM.

mod exec;

pub use exec::{
    execute, execution_match, execution_verdict, has_top_level_order_by, results_match, test_suite_match, test_suite_verdict,
    variant_paths, Cell, ExecVerdict, ResultSet, DEFAULT_TIMEOUT, FLOAT_REL_TOLERANCE,
};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::schema::{database_path, Example, Interaction, SchemaCatalog};
use crate::sql::{self, Difficulty};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("gold SQL failed on {db}: {detail} ({sql})")]
    GoldExecutionFailure { db: PathBuf, sql: String, detail: String },
    #[error("gold SQL for {source_id} does not parse: {detail}")]
    GoldParseFailure { source_id: String, detail: String },
    #[error("alignment error: {0}")]
    AlignmentError(String),
    #[error("database {0:?} not found in the catalog")]
    UnknownDatabase(String),
    #[error("test-suite evaluation needs at least one variant database")]
    NoVariants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub source_id: String,
    pub em: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ex: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<bool>,
    pub difficulty: Difficulty,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketScores {
    pub count: usize,
    pub em: f64,
    pub ex: Option<f64>,
    pub ts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub verdicts: Vec<Verdict>,
    /// Keys: `easy`, `medium`, `hard`, `extra`, `all`.
    pub aggregates: BTreeMap<String, BucketScores>,
}

fn percent(bits: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut n, mut hit) = (0usize, 0usize);
    for b in bits {
        n += 1;
        hit += usize::from(b);
    }
    (n > 0).then(|| 100.0 * hit as f64 / n as f64)
}

fn bucket(verdicts: &[&Verdict]) -> BucketScores {
    BucketScores {
        count: verdicts.len(),
        em: percent(verdicts.iter().map(|v| v.em)).unwrap_or(0.0),
        ex: percent(verdicts.iter().filter_map(|v| v.ex)),
        ts: percent(verdicts.iter().filter_map(|v| v.ts)),
    }
}

pub const BUCKET_KEYS: [&str; 5] = ["easy", "medium", "hard", "extra", "all"];

impl EvalReport {
    pub fn from_verdicts(verdicts: Vec<Verdict>) -> Self {
        let mut aggregates = BTreeMap::new();
        for d in Difficulty::ALL {
            let sel: Vec<&Verdict> = verdicts.iter().filter(|v| v.difficulty == d).collect();
            aggregates.insert(d.label().to_lowercase(), bucket(&sel));
        }
        aggregates.insert("all".into(), bucket(&verdicts.iter().collect::<Vec<_>>()));
        EvalReport { verdicts, aggregates }
    }

    pub fn all(&self) -> &BucketScores {
        &self.aggregates["all"]
    }

    /// Metric rows by difficulty columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "");
        for h in ["Easy", "Medium", "Hard", "Extra", "All"] {
            let _ = write!(out, "{h:>9}");
        }
        out.push('\n');
        let cols: Vec<&BucketScores> = BUCKET_KEYS.iter().map(|k| &self.aggregates[*k]).collect();
        let _ = write!(out, "{:<8}", "count");
        for c in &cols {
            let _ = write!(out, "{:>9}", c.count);
        }
        out.push('\n');
        type Pick = fn(&BucketScores) -> Option<f64>;
        let metrics: [(&str, Pick); 3] = [("EM", |b| Some(b.em)), ("EX", |b| b.ex), ("TS", |b| b.ts)];
        for (name, pick) in metrics {
            if pick(cols[4]).is_none() {
                continue;
            }
            let _ = write!(out, "{name:<8}");
            for c in &cols {
                match pick(c) {
                    Some(v) if c.count > 0 => {
                        let _ = write!(out, "{v:>9.1}");
                    }
                    _ => {
                        let _ = write!(out, "{:>9}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub db_root: Option<PathBuf>,
    pub variants_root: Option<PathBuf>,
    pub timeout: Duration,
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { db_root: None, variants_root: None, timeout: DEFAULT_TIMEOUT, jobs: 1 }
    }
}

/// Scores one prediction; EM never touches a database.
pub fn score_one(pred: Option<&str>, gold: &Example, catalog: &SchemaCatalog, opts: &EvalOptions) -> Result<Verdict, EvalError> {
    let schema = catalog.get(&gold.db_id).ok_or_else(|| EvalError::UnknownDatabase(gold.db_id.clone()))?;
    let difficulty = sql::difficulty(&gold.gold_sql, schema)
        .map_err(|e| EvalError::GoldParseFailure { source_id: gold.source_id.clone(), detail: e.to_string() })?;
    let pred_sql = pred.unwrap_or("");
    let mut reasons: Vec<String> = Vec::new();
    if pred.is_none() {
        reasons.push("missing prediction".into());
    }
    let (em, em_reason) =
        if pred_sql.trim().is_empty() { (false, None) } else { sql::exact_match_verdict(pred_sql, &gold.gold_sql, schema) };
    reasons.extend(em_reason);
    let ex = match &opts.db_root {
        Some(root) => {
            let v = execution_verdict(pred_sql, &gold.gold_sql, &database_path(root, &gold.db_id), opts.timeout)?;
            if let Some(r) = v.reason.filter(|_| pred.is_some()) {
                reasons.push(format!("ex: {r}"));
            }
            Some(v.matched)
        }
        None => None,
    };
    let ts = match opts.variants_root.as_deref().and_then(|r| variant_paths(r, &gold.db_id)) {
        Some(variants) => {
            let v = test_suite_verdict(pred_sql, &gold.gold_sql, &variants, opts.timeout)?;
            if let Some(r) = v.reason.filter(|_| pred.is_some() && ex == Some(true)) {
                reasons.push(format!("ts: {r}"));
            }
            Some(v.matched)
        }
        None => None,
    };
    Ok(Verdict {
        source_id: gold.source_id.clone(),
        em,
        ex,
        ts,
        difficulty,
        failure_reason: (!reasons.is_empty()).then(|| reasons.join("; ")),
    })
}

/// Predictions are `(source_id, sql)` pairs aligned to golds by id; a gold
/// without a prediction scores false everywhere.
pub fn score_dataset(
    preds: &[(String, String)],
    golds: &[Example],
    catalog: &SchemaCatalog,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<&str, &str> = HashMap::new();
    for (id, sql) in preds {
        if by_id.insert(id.as_str(), sql.as_str()).is_some() {
            return Err(EvalError::AlignmentError(format!("duplicate prediction for {id}")));
        }
    }
    let gold_ids: HashSet<&str> = golds.iter().map(|g| g.source_id.as_str()).collect();
    if gold_ids.len() != golds.len() {
        return Err(EvalError::AlignmentError("duplicate gold source_id".into()));
    }
    if let Some((id, _)) = preds.iter().find(|(id, _)| !gold_ids.contains(id.as_str())) {
        return Err(EvalError::AlignmentError(format!("prediction {id} has no gold example")));
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<Verdict, EvalError>>>> = golds.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..opts.jobs.clamp(1, golds.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= golds.len() {
                    break;
                }
                let g = &golds[i];
                *slots[i].lock().expect("slot lock") = Some(score_one(by_id.get(g.source_id.as_str()).copied(), g, catalog, opts));
            });
        }
    });
    let verdicts =
        slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every slot filled")).collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_verdicts(verdicts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionReport {
    pub qm: f64,
    pub im: f64,
    pub turns: usize,
    pub interactions: usize,
    pub per_interaction: Vec<Vec<bool>>,
}

/// QM over all turns; IM over interactions whose turns are all correct.
pub fn score_interactions(verdicts: &[Vec<bool>]) -> InteractionReport {
    let turns: usize = verdicts.iter().map(Vec::len).sum();
    let qm = percent(verdicts.iter().flatten().copied()).unwrap_or(0.0);
    let im = percent(verdicts.iter().map(|v| v.iter().all(|b| *b))).unwrap_or(0.0);
    InteractionReport { qm, im, turns, interactions: verdicts.len(), per_interaction: verdicts.to_vec() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTurnReport {
    pub em: InteractionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ex: Option<InteractionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<InteractionReport>,
}

impl MultiTurnReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<8}{:>9}{:>9}\n", "", "QM", "IM");
        for (name, r) in [("EM", Some(&self.em)), ("EX", self.ex.as_ref()), ("TS", self.ts.as_ref())] {
            if let Some(r) = r {
                let _ = writeln!(out, "{name:<8}{:>9.1}{:>9.1}", r.qm, r.im);
            }
        }
        out
    }
}

/// Flattens interactions to turn examples (ids `<interaction>-<turn>`), scores
/// them, and regroups the verdicts per interaction.
pub fn score_interaction_set(
    preds: &[(String, String)],
    golds: &[Interaction],
    catalog: &SchemaCatalog,
    opts: &EvalOptions,
) -> Result<(EvalReport, MultiTurnReport), EvalError> {
    let flat: Vec<Example> = golds
        .iter()
        .flat_map(|it| {
            it.turns
                .iter()
                .enumerate()
                .map(move |(t, turn)| Example::new(it.db_id.clone(), turn.question.clone(), turn.gold_sql.clone(), it.turn_id(t)))
        })
        .collect();
    let report = score_dataset(preds, &flat, catalog, opts)?;
    let mut idx = 0;
    let mut grouped: Vec<Vec<&Verdict>> = Vec::new();
    for it in golds {
        grouped.push(report.verdicts[idx..idx + it.turns.len()].iter().collect());
        idx += it.turns.len();
    }
    let channel = |f: fn(&Verdict) -> Option<bool>| -> Option<InteractionReport> {
        let bits: Option<Vec<Vec<bool>>> = grouped.iter().map(|g| g.iter().map(|v| f(v)).collect()).collect();
        bits.map(|b| score_interactions(&b))
    };
    let multi = MultiTurnReport { em: channel(|v| Some(v.em)).expect("em always present"), ex: channel(|v| v.ex), ts: channel(|v| v.ts) };
    Ok((report, multi))
}

/// Reads a prediction file: NDJSON `{source_id, sql}` records, or plain text
/// with one SQL per line aligned to `gold_ids` by position.
pub fn read_predictions(path: &Path, gold_ids: &[String]) -> Result<Vec<(String, String)>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::AlignmentError(format!("{}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().collect();
    let is_json = lines.iter().find(|l| !l.trim().is_empty()).is_some_and(|l| l.trim_start().starts_with('{'));
    if is_json {
        lines
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                let v: serde_json::Value =
                    serde_json::from_str(l).map_err(|e| EvalError::AlignmentError(format!("{} line {}: {e}", path.display(), n + 1)))?;
                let id = v.get("source_id").and_then(|x| x.as_str());
                let sql = v.get("sql").and_then(|x| x.as_str());
                match (id, sql) {
                    (Some(id), Some(sql)) => Ok((id.to_string(), sql.to_string())),
                    _ => Err(EvalError::AlignmentError(format!("{} line {}: needs source_id and sql", path.display(), n + 1))),
                }
            })
            .collect()
    } else {
        let mut lines = lines;
        while lines.last().is_some_and(|l| l.trim().is_empty()) {
            lines.pop();
        }
        if lines.len() != gold_ids.len() {
            return Err(EvalError::AlignmentError(format!(
                "{} has {} lines for {} gold examples",
                path.display(),
                lines.len(),
                gold_ids.len()
            )));
        }
        Ok(gold_ids.iter().cloned().zip(lines.iter().map(|l| l.trim().to_string())).collect())
    }
}
