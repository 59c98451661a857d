//! Automatic chain-of-thought annotations via slice-similarity schema linking.

use serde::{Deserialize, Serialize};

use crate::schema::{DatabaseSchema, Example};
use crate::similarity::{SimilarityError, SimilarityProvider};
use crate::sql::{self, SqlError, SqlSummary};

pub const DEFAULT_MAX_LEN: usize = 8;
pub const COT_OPENING: &str = "Let's think step by step.";
pub const ANSWER_MARKER: &str = "So the final answer is:";

#[derive(Debug, thiserror::Error)]
pub enum CotError {
    #[error("question has no tokens")]
    EmptyQuestion,
    #[error("gold SQL does not parse: {0}")]
    Parse(#[from] SqlError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Slice {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Column,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedItem {
    pub kind: LinkKind,
    pub table: String,
    pub column: Option<String>,
    pub slice: Slice,
    pub score: f64,
}

impl LinkedItem {
    pub fn display(&self) -> String {
        match &self.column {
            Some(c) => format!("[{}.{}]", self.table, c),
            None => format!("[{}]", self.table),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotAnnotation {
    pub links: Vec<LinkedItem>,
    pub values: Vec<String>,
    pub final_sql: String,
    pub text: String,
}

pub fn enumerate_slices(tokens: &[String], max_len: usize) -> Result<Vec<Slice>, CotError> {
    if tokens.is_empty() {
        return Err(CotError::EmptyQuestion);
    }
    let max_len = max_len.max(1);
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for end in start..tokens.len().min(start + max_len) {
            out.push(Slice { start, end, text: tokens[start..=end].join(" ") });
        }
    }
    Ok(out)
}

/// Index of the best slice: highest score, then shortest, then earliest.
pub fn argmax_slice(slices: &[Slice], scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in slices.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (sb, bb) = (scores[i], scores[b]);
                let better =
                    sb > bb || (sb == bb && (s.len() < slices[b].len() || (s.len() == slices[b].len() && s.start < slices[b].start)));
                Some(if better { i } else { b })
            }
        };
    }
    best
}

pub fn link_schema_items(
    summary: &SqlSummary,
    tokens: &[String],
    sim: &dyn SimilarityProvider,
    max_len: usize,
) -> Result<Vec<LinkedItem>, CotError> {
    if summary.linked_columns.is_empty() && summary.from_only_tables.is_empty() {
        return Ok(Vec::new());
    }
    let slices = enumerate_slices(tokens, max_len)?;
    let mut names: Vec<String> = summary.linked_columns.iter().map(|c| c.readable()).collect();
    names.extend(summary.from_only_tables.iter().map(|t| t.replace('_', " ").to_lowercase()));
    let texts: Vec<String> = slices.iter().map(|s| s.text.clone()).collect();
    let matrix = sim.score_matrix(&names, &texts)?;
    let items = summary
        .linked_columns
        .iter()
        .map(|c| (LinkKind::Column, c.table.clone(), Some(c.column.clone())))
        .chain(summary.from_only_tables.iter().map(|t| (LinkKind::Table, t.clone(), None)));
    let mut links: Vec<(usize, LinkedItem)> = items
        .zip(&matrix)
        .enumerate()
        .map(|(order, ((kind, table, column), scores))| {
            let best = argmax_slice(&slices, scores).expect("non-empty slice list");
            (order, LinkedItem { kind, table, column, slice: slices[best].clone(), score: scores[best] })
        })
        .collect();
    links.sort_by(|(oa, a), (ob, b)| (a.slice.start, a.slice.end, a.kind, *oa).cmp(&(b.slice.start, b.slice.end, b.kind, *ob)));
    Ok(links.into_iter().map(|(_, l)| l).collect())
}

pub fn collapse_whitespace(sql: &str) -> String {
    sql.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn render_cot(links: &[LinkedItem], values: &[String], final_sql: &str) -> CotAnnotation {
    let mut lines = vec![COT_OPENING.to_string()];
    let mut i = 0;
    while i < links.len() {
        let link = &links[i];
        match link.kind {
            LinkKind::Column => {
                let mut group = vec![link.display()];
                let mut j = i + 1;
                while j < links.len() && links[j].kind == LinkKind::Column && links[j].slice == link.slice {
                    group.push(links[j].display());
                    j += 1;
                }
                lines.push(format!("According to \"{}\", columns {} may be used.", link.slice.text, group.join(" and ")));
                i = j;
            }
            LinkKind::Table => {
                lines.push(format!("According to \"{}\", tables {} may be used.", link.slice.text, link.display()));
                i += 1;
            }
        }
    }
    if !values.is_empty() {
        lines.push(format!("Values [{}] may be used.", values.join(", ")));
    }
    lines.push(ANSWER_MARKER.to_string());
    lines.push(final_sql.to_string());
    CotAnnotation { links: links.to_vec(), values: values.to_vec(), final_sql: final_sql.to_string(), text: lines.join("\n") }
}

pub fn annotate_with(
    example: &Example,
    schema: &DatabaseSchema,
    sim: &dyn SimilarityProvider,
    max_len: usize,
) -> Result<CotAnnotation, CotError> {
    let ast = sql::parse_sql(&example.gold_sql, schema)?;
    let summary = sql::summarize(&ast, schema);
    let links = link_schema_items(&summary, &example.question_tokens, sim, max_len)?;
    Ok(render_cot(&links, &summary.values, &collapse_whitespace(&example.gold_sql)))
}

pub fn annotate(example: &Example, schema: &DatabaseSchema, sim: &dyn SimilarityProvider) -> Result<CotAnnotation, CotError> {
    annotate_with(example, schema, sim, DEFAULT_MAX_LEN)
}
