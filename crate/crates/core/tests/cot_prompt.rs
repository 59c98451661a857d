mod common;

use actsql::cot::{self, argmax_slice, enumerate_slices, link_schema_items, render_cot, LinkKind, LinkedItem, Slice};
use actsql::llm::{ChatMessage, Role};
use actsql::pipeline::{build_prompt, extract_sql, DbRootRows, ExtractionStatus, Mode, PipelineConfig};
use actsql::schema::Example;
use actsql::similarity::LexicalSimilarity;
use actsql::sql;
use proptest::prelude::*;

fn golden_assistant_turns(name: &str) -> Vec<String> {
    common::golden_prompt(name).into_iter().filter(|m| m.role == Role::Assistant).map(|m| m.content).collect()
}

#[test]
fn cot_matches_golden_exemplars() {
    let catalog = common::catalog();
    let train = common::train();
    let sim = common::anchored::anchored();
    let golden = golden_assistant_turns("act_sql");
    assert_eq!(golden.len(), 4);
    for (ex, expected) in train.iter().take(4).zip(&golden) {
        let a = cot::annotate(ex, catalog.get(&ex.db_id).unwrap(), &sim).unwrap();
        assert_eq!(&a.text, expected, "{}", ex.source_id);
    }
}

#[test]
fn cot_text_layout() {
    let catalog = common::catalog();
    for ex in common::train() {
        let a = cot::annotate(&ex, catalog.get(&ex.db_id).unwrap(), &LexicalSimilarity).unwrap();
        let lines: Vec<&str> = a.text.lines().collect();
        assert_eq!(lines[0], cot::COT_OPENING);
        assert_eq!(lines[lines.len() - 2], cot::ANSWER_MARKER);
        assert_eq!(lines[lines.len() - 1], cot::collapse_whitespace(&ex.gold_sql));
        assert_eq!(lines.iter().any(|l| l.starts_with("Values [")), !a.values.is_empty());
        let tables = a.links.iter().filter(|l| l.kind == LinkKind::Table).count();
        assert_eq!(lines.iter().filter(|l| l.contains(", tables [")).count(), tables);
        for l in &a.links {
            assert!(a.text.contains(&l.display()));
            assert!(l.slice.len() <= cot::DEFAULT_MAX_LEN);
        }
    }
}

#[test]
fn linking_matches_exhaustive_search() {
    let catalog = common::catalog();
    let mut checked = 0;
    for ex in common::train() {
        let schema = catalog.get(&ex.db_id).unwrap();
        let summary = sql::summarize(&sql::parse_sql(&ex.gold_sql, schema).unwrap(), schema);
        let links = link_schema_items(&summary, &ex.question_tokens, &LexicalSimilarity, 8).unwrap();
        for l in &links {
            let name = match &l.column {
                Some(c) => format!("{} {}", l.table, c),
                None => l.table.clone(),
            };
            let expected = common::oracle::best_slice(&name, &ex.question_tokens, 8);
            assert_eq!((l.slice.start, l.slice.end), expected, "{} {}", ex.source_id, name);
            checked += 1;
        }
        assert_eq!(links.len(), summary.linked_columns.len() + summary.from_only_tables.len());
    }
    assert!(checked >= 30);
}

#[test]
fn cot_round_trips_through_extraction() {
    let catalog = common::catalog();
    for ex in common::train().iter().chain(common::dev().iter()) {
        let a = cot::annotate(ex, catalog.get(&ex.db_id).unwrap(), &LexicalSimilarity).unwrap();
        assert_eq!(extract_sql(&a.text, Mode::ActSql), (a.final_sql.clone(), ExtractionStatus::Marker));
    }
}

// Prompt goldens.

fn exemplars<'a>(
    ids: &[usize],
    pool: &[Example],
    catalog: &'a actsql::schema::SchemaCatalog,
    answer: impl Fn(&Example) -> String,
) -> Vec<(Example, &'a actsql::schema::DatabaseSchema, String)> {
    ids.iter()
        .map(|i| pool[*i].clone())
        .map(|e| {
            let s = catalog.get(&e.db_id).unwrap();
            let a = answer(&e);
            (e, s, a)
        })
        .collect()
}

#[test]
fn prompts_match_goldens() {
    let root = common::DbRoot::new();
    let rows = DbRootRows::new(root.path());
    let catalog = common::catalog();
    let train = common::train();
    let test = &common::dev()[0];
    let schema = catalog.get(&test.db_id).unwrap();
    let sim = common::anchored::anchored();
    let cases: Vec<(&str, Mode, Vec<usize>)> = vec![
        ("zero_shot", Mode::ZeroShot, vec![]),
        ("few_shot", Mode::FewShot, vec![0, 1, 4, 5]),
        ("act_sql", Mode::ActSql, vec![0, 1, 2, 3]),
    ];
    for (name, mode, ids) in cases {
        let config = PipelineConfig::for_mode(mode);
        let ex = exemplars(&ids, &train, &catalog, |e| match mode {
            Mode::ActSql => cot::annotate(e, catalog.get(&e.db_id).unwrap(), &sim).unwrap().text,
            _ => e.gold_sql.clone(),
        });
        let bundle = build_prompt(test, schema, &ex, &config, &rows).unwrap();
        assert_eq!(bundle.messages, common::golden_prompt(name), "{name}");
        assert_eq!(bundle.messages.len(), 2 + 2 * config.exemplar_count());
    }
}

#[test]
fn prompt_rejects_wrong_exemplar_count() {
    let catalog = common::catalog();
    let train = common::train();
    let test = &common::dev()[0];
    let ex = exemplars(&[0, 1, 2], &train, &catalog, |e| e.gold_sql.clone());
    let config = PipelineConfig::for_mode(Mode::FewShot);
    let err = build_prompt(test, catalog.get(&test.db_id).unwrap(), &ex, &config, &actsql::pipeline::NoRows);
    assert!(err.is_err());
}

#[test]
fn extraction_of_rewritten_reply() {
    let reply = "Let's think step by step.\nAccording to \"city Aberdeen\", columns [airports.City] may be used.\n\
                 According to \"flights\", columns [flights.FlightNo] may be used.\nValues [Aberdeen] may be used.\n\
                 So the final answer is:\nSELECT count(*) FROM flights AS T1 JOIN airports AS T2 ON T1.DestAirport = T2.AirportCode WHERE T2.City = 'Aberdeen'\n\n\
                 This counts flights arriving in Aberdeen.";
    let (got, status) = extract_sql(reply, Mode::ActSql);
    assert_eq!(status, ExtractionStatus::Marker);
    assert_eq!(got, "SELECT count(*) FROM flights AS T1 JOIN airports AS T2 ON T1.DestAirport = T2.AirportCode WHERE T2.City = 'Aberdeen'");
    assert_eq!(extract_sql("I cannot answer that.", Mode::ActSql).1, ExtractionStatus::Failed);
    assert_eq!(extract_sql("```sql\nSELECT 1\n```", Mode::FewShot), ("SELECT 1".to_string(), ExtractionStatus::Fallback));
}

#[test]
fn message_roles_alternate() {
    for name in ["zero_shot", "few_shot", "act_sql"] {
        let msgs: Vec<ChatMessage> = common::golden_prompt(name);
        assert_eq!(msgs[0].role, Role::System);
        for (i, m) in msgs.iter().enumerate().skip(1) {
            assert_eq!(m.role, if i % 2 == 1 { Role::User } else { Role::Assistant });
        }
    }
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("name".to_string()),
        Just("singer".to_string()),
        Just("age".to_string()),
        Just("the".to_string()),
        Just("country".to_string()),
        "[a-z]{1,6}",
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn argmax_dominates(tokens in prop::collection::vec(word(), 1..14), max_len in 1usize..10, seed in any::<u64>()) {
        let slices = enumerate_slices(&tokens, max_len).unwrap();
        let scores: Vec<f64> = slices.iter().enumerate().map(|(i, _)| ((seed.wrapping_mul(i as u64 + 7) >> 7) % 5) as f64 / 4.0).collect();
        let best = argmax_slice(&slices, &scores).unwrap();
        for (i, s) in slices.iter().enumerate() {
            prop_assert!(s.len() <= max_len);
            prop_assert!(scores[best] >= scores[i]);
            if scores[i] == scores[best] && i != best {
                prop_assert!((slices[best].len(), slices[best].start) < (s.len(), s.start));
            }
        }
    }

    #[test]
    fn links_respect_max_len(idx in 0usize..20, max_len in 1usize..10) {
        let catalog = common::catalog();
        let ex = &common::train()[idx];
        let schema = catalog.get(&ex.db_id).unwrap();
        let a = cot::annotate_with(ex, schema, &LexicalSimilarity, max_len).unwrap();
        for l in &a.links {
            prop_assert!(l.slice.len() <= max_len);
            prop_assert_eq!(&l.slice.text, &ex.question_tokens[l.slice.start..=l.slice.end].join(" "));
        }
    }

    #[test]
    fn rendered_cot_extracts_final_sql(values in prop::collection::vec("[A-Za-z0-9 ]{1,8}", 0..3), sql_tail in "[a-z_]{1,8}") {
        let link = LinkedItem {
            kind: LinkKind::Column,
            table: "t".into(),
            column: Some("c".into()),
            slice: Slice { start: 0, end: 0, text: "word".into() },
            score: 1.0,
        };
        let final_sql = format!("SELECT {sql_tail} FROM t");
        let a = render_cot(&[link], &values, &final_sql);
        prop_assert_eq!(extract_sql(&a.text, Mode::ActSql), (final_sql, ExtractionStatus::Marker));
    }
}
