mod common;

use std::path::Path;
use std::process::Command;

use actsql::llm::{request_key, CacheMode, CacheRecord, Gateway, GenerationParams, LlmReply, ReplayCache};
use actsql::pipeline::{rewrite_interaction, rewrite_messages, RewriteResources};
use actsql::schema::{load_examples, load_interactions, Interaction};

const ABERDEEN_REWRITES: [&str; 3] = [
    "What are all the flights that depart from Aberdeen?",
    "What are the flights that depart from Aberdeen and land in Ashley?",
    "How many flights depart from Aberdeen and land in Ashley?",
];

fn interactions() -> Vec<Interaction> {
    load_interactions(&common::fixtures().join("sparc_dev.json"), &common::catalog()).unwrap()
}

fn params() -> GenerationParams {
    GenerationParams::cot()
}

fn record(cache: &ReplayCache, it: &Interaction, resources: &RewriteResources, reply: &str) {
    let questions: Vec<String> = it.turns.iter().map(|t| t.question.clone()).collect();
    let messages = rewrite_messages(&questions, resources);
    let p = params();
    cache
        .append(CacheRecord {
            key: request_key(&messages, &p),
            model: p.model.clone(),
            params: p,
            messages,
            reply: LlmReply::stop(reply),
            timestamp: 0,
        })
        .unwrap();
}

fn replay(path: &Path) -> Gateway {
    Gateway::new(CacheMode::ReplayStrict, None, Some(ReplayCache::open(path).unwrap()), 1).unwrap()
}

#[test]
fn aberdeen_interaction_from_recorded_reply() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.ndjson");
    let resources = RewriteResources::bundled("sparc").unwrap();
    let its = interactions();
    let reply = format!("1. {}\n2. {}\n3. {}", ABERDEEN_REWRITES[0], ABERDEEN_REWRITES[1], ABERDEEN_REWRITES[2]);
    record(&ReplayCache::open(&path).unwrap(), &its[0], &resources, &reply);

    let out = rewrite_interaction(&its[0], &resources, &replay(&path), &params()).unwrap();
    let questions: Vec<&str> = out.examples.iter().map(|e| e.question.as_str()).collect();
    assert_eq!(questions, ABERDEEN_REWRITES);
    assert!(out.fallback_turns.is_empty() && !out.parse_failed);
    for (t, (ex, turn)) in out.examples.iter().zip(&its[0].turns).enumerate() {
        assert_eq!(ex.gold_sql, turn.gold_sql);
        assert_eq!(ex.db_id, "flight_2");
        assert_eq!(ex.source_id, its[0].turn_id(t));
        assert!(!ex.question_tokens.is_empty());
    }
}

#[test]
fn missing_items_fall_back_to_the_original_turn() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.ndjson");
    let resources = RewriteResources::bundled("sparc").unwrap();
    let its = interactions();
    let cache = ReplayCache::open(&path).unwrap();
    record(&cache, &its[0], &resources, "1. Rewritten one?\n3. Rewritten three?");
    record(&cache, &its[1], &resources, "I am not sure what you mean.");
    drop(cache);
    let gw = replay(&path);

    let partial = rewrite_interaction(&its[0], &resources, &gw, &params()).unwrap();
    assert_eq!(partial.fallback_turns, [1]);
    assert_eq!(partial.examples[1].question, its[0].turns[1].question);
    assert_eq!(partial.examples[2].question, "Rewritten three?");
    assert!(!partial.parse_failed);

    let failed = rewrite_interaction(&its[1], &resources, &gw, &params()).unwrap();
    assert!(failed.parse_failed);
    assert_eq!(failed.fallback_turns, [0, 1, 2]);
}

#[test]
fn prompt_layout() {
    let resources = RewriteResources::bundled("cosql").unwrap();
    let qs = vec!["How many singers are there?".to_string(), "Which of them are from France?".to_string()];
    let msgs = rewrite_messages(&qs, &resources);
    assert_eq!(msgs.len(), 2 + 2 * resources.pairs.len());
    assert_eq!(msgs[0].content, resources.instruction);
    assert_eq!(msgs.last().unwrap().content, "1. How many singers are there?\n2. Which of them are from France?");
}

#[test]
fn cli_rewrite_replays_and_rejects_empty_exemplars() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("cache.ndjson");
    let resources = RewriteResources::bundled("sparc").unwrap();
    let its = interactions();
    let cache = ReplayCache::open(&cache_path).unwrap();
    record(&cache, &its[0], &resources, &format!("1. {}\n2. {}\n3. {}", ABERDEEN_REWRITES[0], ABERDEEN_REWRITES[1], ABERDEEN_REWRITES[2]));
    record(
        &cache,
        &its[1],
        &resources,
        "1. What are all the airlines?\n2. Which airline is JetBlue Airways?\n3. What is the country of JetBlue Airways?",
    );
    drop(cache);

    let out_path = dir.path().join("rewritten.json");
    let tables = common::fixtures().join("tables.json");
    let run = |exemplars: &str| {
        Command::new(env!("CARGO_BIN_EXE_actsql"))
            .args(["rewrite", "--exemplars", exemplars, "--cache-mode", "replay-strict"])
            .arg("--tables")
            .arg(&tables)
            .arg("--interactions")
            .arg(common::fixtures().join("sparc_dev.json"))
            .arg("--cache")
            .arg(&cache_path)
            .arg("--out")
            .arg(&out_path)
            .output()
            .unwrap()
    };
    let ok = run("sparc");
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let examples = load_examples(&out_path, &common::catalog()).unwrap();
    assert_eq!(examples.len(), 6);
    assert_eq!(examples[2].question, ABERDEEN_REWRITES[2]);
    assert_eq!(examples[5].gold_sql, its[1].turns[2].gold_sql);

    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    assert_eq!(run(empty.to_str().unwrap()).status.code(), Some(2));
}
