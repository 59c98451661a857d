//! Multi-turn to single-turn conversion by question rewriting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::llm::{ChatMessage, Gateway, GenerationParams, LlmError};
use crate::schema::{Example, Interaction};

pub const DEFAULT_INSTRUCTION: &str = include_str!("../../resources/rewrite/instruction.txt");
const SPARC_PAIRS: &str = include_str!("../../resources/rewrite/sparc.json");
const COSQL_PAIRS: &str = include_str!("../../resources/rewrite/cosql.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewritePair {
    pub original: Vec<String>,
    pub rewritten: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteResources {
    pub instruction: String,
    pub pairs: Vec<RewritePair>,
}

#[derive(Debug, thiserror::Error)]
pub enum RewriteError {
    #[error("no rewrite exemplars supplied")]
    NoExemplars,
    #[error("rewrite exemplar {0} has mismatched turn counts")]
    MismatchedPair(usize),
    #[error("cannot read rewrite exemplars: {0}")]
    Load(String),
    #[error(transparent)]
    Gateway(#[from] LlmError),
}

impl RewriteResources {
    /// Bundled exemplars for `sparc` or `cosql`.
    pub fn bundled(dataset: &str) -> Option<Self> {
        let pairs = match dataset.to_ascii_lowercase().as_str() {
            "sparc" => SPARC_PAIRS,
            "cosql" => COSQL_PAIRS,
            _ => return None,
        };
        Some(RewriteResources {
            instruction: DEFAULT_INSTRUCTION.trim_end().to_string(),
            pairs: serde_json::from_str(pairs).expect("bundled rewrite exemplars are valid"),
        })
    }

    pub fn from_json(text: &str, instruction: Option<String>) -> Result<Self, RewriteError> {
        let pairs: Vec<RewritePair> = serde_json::from_str(text).map_err(|e| RewriteError::Load(e.to_string()))?;
        let r = RewriteResources { instruction: instruction.unwrap_or_else(|| DEFAULT_INSTRUCTION.trim_end().to_string()), pairs };
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: &Path, instruction: Option<String>) -> Result<Self, RewriteError> {
        let text = std::fs::read_to_string(path).map_err(|e| RewriteError::Load(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, instruction)
    }

    pub fn validate(&self) -> Result<(), RewriteError> {
        if self.pairs.is_empty() {
            return Err(RewriteError::NoExemplars);
        }
        match self.pairs.iter().position(|p| p.original.len() != p.rewritten.len() || p.original.is_empty()) {
            Some(i) => Err(RewriteError::MismatchedPair(i)),
            None => Ok(()),
        }
    }
}

pub fn numbered(lines: &[String]) -> String {
    lines.iter().enumerate().map(|(i, l)| format!("{}. {}", i + 1, l)).collect::<Vec<_>>().join("\n")
}

pub fn rewrite_messages(questions: &[String], resources: &RewriteResources) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage::system(resources.instruction.clone())];
    for p in &resources.pairs {
        messages.push(ChatMessage::user(numbered(&p.original)));
        messages.push(ChatMessage::assistant(numbered(&p.rewritten)));
    }
    messages.push(ChatMessage::user(numbered(questions)));
    messages
}

/// Items of a numbered list reply keyed by their 1-based number.
pub fn parse_numbered_list(reply: &str) -> Vec<(usize, String)> {
    reply
        .lines()
        .filter_map(|line| {
            let t = line.trim_start();
            let digits = t.chars().take_while(char::is_ascii_digit).count();
            if digits == 0 {
                return None;
            }
            let rest = &t[digits..];
            let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
            Some((t[..digits].parse().ok()?, rest.trim().to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteOutcome {
    pub examples: Vec<Example>,
    /// Turn indices that kept their original question.
    pub fallback_turns: Vec<usize>,
    pub parse_failed: bool,
    pub raw_reply: String,
}

/// One gateway call per interaction; each rewritten question is paired with
/// its turn's gold SQL.
pub fn rewrite_interaction(
    interaction: &Interaction,
    resources: &RewriteResources,
    gateway: &Gateway,
    params: &GenerationParams,
) -> Result<RewriteOutcome, RewriteError> {
    resources.validate()?;
    let questions: Vec<String> = interaction.turns.iter().map(|t| t.question.clone()).collect();
    let reply = gateway.complete_chat(&rewrite_messages(&questions, resources), params)?;
    let items = parse_numbered_list(&reply.content);
    let parse_failed = items.is_empty();
    let mut fallback_turns = Vec::new();
    let examples = interaction
        .turns
        .iter()
        .enumerate()
        .map(|(i, turn)| {
            let rewritten = items.iter().find(|(n, q)| *n == i + 1 && !q.is_empty()).map(|(_, q)| q.clone());
            let question = rewritten.unwrap_or_else(|| {
                fallback_turns.push(i);
                turn.question.clone()
            });
            Example::new(interaction.db_id.clone(), question, turn.gold_sql.clone(), interaction.turn_id(i))
        })
        .collect();
    Ok(RewriteOutcome { examples, fallback_turns, parse_failed, raw_reply: reply.content })
}
