//! Text similarity providers shared by schema linking and exemplar retrieval.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error("embedding request failed: {0}")]
    Request(String),
    #[error("embedding response malformed: {0}")]
    Response(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Sparse(BTreeMap<String, f64>),
    Dense(Vec<f64>),
}

fn sparse_cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn cosine(a: &Representation, b: &Representation) -> f64 {
    match (a, b) {
        (Representation::Sparse(x), Representation::Sparse(y)) => sparse_cosine(x, y),
        (Representation::Dense(x), Representation::Dense(y)) => dense_cosine(x, y),
        _ => 0.0,
    }
}

pub trait SimilarityProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Representation>, SimilarityError>;

    fn compare(&self, a: &Representation, b: &Representation) -> f64 {
        cosine(a, b)
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, SimilarityError> {
        let reps = self.embed(&[a.to_string(), b.to_string()])?;
        Ok(self.compare(&reps[0], &reps[1]))
    }

    /// `scores[i][j]` = Sim(queries[i], candidates[j]).
    fn score_matrix(&self, queries: &[String], candidates: &[String]) -> Result<Vec<Vec<f64>>, SimilarityError> {
        let q = self.embed(queries)?;
        let c = self.embed(candidates)?;
        Ok(q.iter().map(|x| c.iter().map(|y| self.compare(x, y)).collect()).collect())
    }

    /// Short identifier recorded in run manifests.
    fn name(&self) -> String;
}

/// Cosine similarity over character-trigram counts of the lowercased text,
/// underscores read as spaces and one space of padding on each side.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalSimilarity;

impl LexicalSimilarity {
    pub fn trigrams(text: &str) -> BTreeMap<String, f64> {
        let norm: Vec<char> = format!(" {} ", text.to_lowercase().replace('_', " ")).chars().collect();
        let mut out = BTreeMap::new();
        for w in norm.windows(3) {
            *out.entry(w.iter().collect::<String>()).or_insert(0.0) += 1.0;
        }
        out
    }
}

impl SimilarityProvider for LexicalSimilarity {
    fn embed(&self, texts: &[String]) -> Result<Vec<Representation>, SimilarityError> {
        Ok(texts.iter().map(|t| Representation::Sparse(Self::trigrams(t))).collect())
    }

    fn name(&self) -> String {
        "lexical".into()
    }
}

/// OpenAI-compatible `/embeddings` endpoint; vectors are memoized per text.
pub struct EmbeddingSimilarity {
    url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    memo: Mutex<HashMap<String, Vec<f64>>>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl EmbeddingSimilarity {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Result<Self, SimilarityError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| SimilarityError::Request(e.to_string()))?;
        Ok(EmbeddingSimilarity { url: url.into(), model: model.into(), api_key, client, memo: Mutex::new(HashMap::new()) })
    }

    fn fetch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, SimilarityError> {
        let mut req = self.client.post(&self.url).json(&serde_json::json!({ "model": self.model, "input": texts }));
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| SimilarityError::Request(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(SimilarityError::Request(format!("HTTP {}", resp.status())));
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| SimilarityError::Response(e.to_string()))?;
        if body.data.len() != texts.len() {
            return Err(SimilarityError::Response(format!("expected {} vectors, got {}", texts.len(), body.data.len())));
        }
        let mut data = body.data;
        data.sort_by_key(|d| d.index.unwrap_or(0));
        Ok(data.into_iter().map(|d| d.embedding).collect())
    }
}

impl SimilarityProvider for EmbeddingSimilarity {
    fn embed(&self, texts: &[String]) -> Result<Vec<Representation>, SimilarityError> {
        let missing: Vec<String> = {
            let memo = self.memo.lock().expect("memo lock");
            let mut m: Vec<String> = texts.iter().filter(|t| !memo.contains_key(*t)).cloned().collect();
            m.sort();
            m.dedup();
            m
        };
        if !missing.is_empty() {
            let vecs = self.fetch(&missing)?;
            let mut memo = self.memo.lock().expect("memo lock");
            for (t, v) in missing.into_iter().zip(vecs) {
                memo.insert(t, v);
            }
        }
        let memo = self.memo.lock().expect("memo lock");
        Ok(texts.iter().map(|t| Representation::Dense(memo[t].clone())).collect())
    }

    fn name(&self) -> String {
        format!("embedding:{}", self.url)
    }
}
