#![allow(dead_code)]

use std::path::{Path, PathBuf};

use actsql::schema::{load_examples, load_schema_catalog, Example, SchemaCatalog};
use rusqlite::Connection;

pub mod anchored;
pub mod cases;
pub mod oracle;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn catalog() -> SchemaCatalog {
    load_schema_catalog(&fixtures().join("tables.json")).expect("fixture catalog")
}

pub fn train() -> Vec<Example> {
    load_examples(&fixtures().join("train.json"), &catalog()).expect("train fixture")
}

pub fn dev() -> Vec<Example> {
    load_examples(&fixtures().join("dev.json"), &catalog()).expect("dev fixture")
}

pub fn build_db(path: &Path, sql: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let _ = std::fs::remove_file(path);
    let conn = Connection::open(path).unwrap();
    conn.execute_batch("PRAGMA foreign_keys = OFF;").unwrap();
    conn.execute_batch(sql).unwrap();
}

/// Builds `<root>/<db_id>/<db_id>.sqlite` for every fixture script.
pub fn build_db_root(root: &Path) {
    for entry in std::fs::read_dir(fixtures().join("db")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "sql") {
            let id = path.file_stem().unwrap().to_string_lossy().into_owned();
            build_db(&root.join(&id).join(format!("{id}.sqlite")), &std::fs::read_to_string(&path).unwrap());
        }
    }
}

pub struct DbRoot {
    pub dir: tempfile::TempDir,
}

impl DbRoot {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        build_db_root(dir.path());
        DbRoot { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn db(&self, id: &str) -> PathBuf {
        actsql::schema::database_path(self.path(), id)
    }
}

pub fn golden_schema(style: &str, c: usize) -> String {
    std::fs::read_to_string(fixtures().join(format!("golden/schema/{}_c{c}.txt", style.replace('-', "_")))).unwrap()
}

pub fn golden_prompt(name: &str) -> Vec<actsql::llm::ChatMessage> {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join(format!("golden/prompts/{name}.json"))).unwrap()).unwrap()
}

pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use serde_json::{json, Value};

    pub type Handler = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

    /// Minimal OpenAI-compatible chat server on localhost; one request per connection.
    pub struct StubServer {
        pub url: String,
        pub hits: Arc<AtomicUsize>,
    }

    impl StubServer {
        pub fn start(handler: impl Fn(usize, &Value) -> (u16, String) + Send + Sync + 'static) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let url = format!("http://{}/v1", listener.local_addr().unwrap());
            let hits = Arc::new(AtomicUsize::new(0));
            let handler: Arc<Handler> = Arc::new(handler);
            let counter = hits.clone();
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    let Ok(stream) = stream else { continue };
                    let handler = handler.clone();
                    let counter = counter.clone();
                    std::thread::spawn(move || {
                        let mut reader = BufReader::new(stream.try_clone().unwrap());
                        let mut length = 0usize;
                        loop {
                            let mut line = String::new();
                            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                                return;
                            }
                            if line == "\r\n" {
                                break;
                            }
                            if let Some((k, v)) = line.split_once(':') {
                                if k.eq_ignore_ascii_case("content-length") {
                                    length = v.trim().parse().unwrap();
                                }
                            }
                        }
                        let mut body = vec![0; length];
                        reader.read_exact(&mut body).unwrap();
                        let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                        let n = counter.fetch_add(1, Ordering::SeqCst);
                        let (status, content) = handler(n, &request);
                        let payload = if status == 200 {
                            json!({
                                "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
                                "usage": {"prompt_tokens": 10, "completion_tokens": 5},
                            })
                            .to_string()
                        } else {
                            json!({"error": {"message": content}}).to_string()
                        };
                        let mut stream = stream;
                        let _ = write!(
                            stream,
                            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                            payload.len()
                        );
                    });
                }
            });
            StubServer { url, hits }
        }

        pub fn hits(&self) -> usize {
            self.hits.load(Ordering::SeqCst)
        }
    }

    /// Text after the last "Question: " in the final user message.
    pub fn last_question(request: &Value) -> String {
        let msgs = request["messages"].as_array().unwrap();
        let last = msgs.last().unwrap()["content"].as_str().unwrap();
        last.rsplit_once("Question: ").map(|(_, q)| q.trim().to_string()).unwrap_or_default()
    }

    /// Answers every question with its gold SQL, CoT-formatted when `cot` is set.
    pub fn ideal(golds: std::collections::HashMap<String, String>, cot: bool) -> impl Fn(usize, &Value) -> (u16, String) + Send + Sync {
        move |_, req| {
            let sql = golds.get(&last_question(req)).cloned().unwrap_or_else(|| "SELECT 1".into());
            if cot {
                (200, format!("Let's think step by step.\nSo the final answer is:\n{sql}"))
            } else {
                (200, sql)
            }
        }
    }
}
