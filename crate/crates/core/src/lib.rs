//! Text-to-SQL prompting toolkit: schema prompts, automatic chain-of-thought
//! exemplars, hybrid exemplar selection, an LLM gateway with a replay cache,
//! and an evaluation harness.

pub mod cli;
pub mod cot;
pub mod eval;
pub mod exemplar;
pub mod llm;
pub mod pipeline;
pub mod schema;
pub mod similarity;
pub mod sql;
pub mod style;
