use serde::{Deserialize, Serialize};

use super::Mode;
use crate::cot::ANSWER_MARKER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionStatus {
    Marker,
    Fallback,
    Failed,
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.split("```").next().unwrap_or("").trim()
}

/// Lines up to the first blank line, joined with single spaces.
fn first_statement(text: &str) -> String {
    text.lines().map(str::trim).take_while(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
}

fn starts_with_select(line: &str) -> bool {
    line.trim_start().get(..6).is_some_and(|p| p.eq_ignore_ascii_case("select"))
}

fn scan_for_select(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let i = lines.iter().position(|l| starts_with_select(l))?;
    Some(first_statement(&lines[i..].join("\n")))
}

/// Pulls the predicted SQL out of a model reply.
pub fn extract_sql(reply: &str, mode: Mode) -> (String, ExtractionStatus) {
    if mode == Mode::ActSql {
        if let Some(pos) = reply.rfind(ANSWER_MARKER) {
            let sql = first_statement(strip_fences(&reply[pos + ANSWER_MARKER.len()..]));
            if !sql.is_empty() {
                return (sql, ExtractionStatus::Marker);
            }
        }
    } else {
        let body = strip_fences(reply);
        if starts_with_select(body) {
            return (first_statement(body), ExtractionStatus::Fallback);
        }
    }
    match scan_for_select(strip_fences(reply)).or_else(|| scan_for_select(reply)) {
        Some(sql) if !sql.is_empty() => (sql, ExtractionStatus::Fallback),
        _ => (String::new(), ExtractionStatus::Failed),
    }
}
