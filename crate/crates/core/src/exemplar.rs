//! Hybrid exemplar selection: seeded static picks plus similarity-ranked dynamic picks.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::schema::Example;
use crate::similarity::{Representation, SimilarityError, SimilarityProvider};

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("pool too small: requested {requested} exemplars, {available} available")]
    PoolTooSmall { requested: usize, available: usize },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n_s: usize,
    pub n_d: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { n_s: 2, n_d: 2, seed: 0 }
    }
}

/// Training examples with their question representations precomputed once.
pub struct ExemplarPool {
    examples: Vec<Example>,
    reps: Vec<Representation>,
}

impl ExemplarPool {
    pub fn new(examples: Vec<Example>, sim: &dyn SimilarityProvider) -> Result<Self, SimilarityError> {
        let questions: Vec<String> = examples.iter().map(|e| e.question.clone()).collect();
        let reps = sim.embed(&questions)?;
        Ok(ExemplarPool { examples, reps })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Pool indices in seeded permutation order.
    pub fn permutation(&self, seed: u64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.examples.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx
    }

    /// Pool indices ranked by similarity to `question`, highest first, ties by index.
    pub fn rank(&self, question: &str, sim: &dyn SimilarityProvider) -> Result<Vec<(usize, f64)>, SimilarityError> {
        let q = sim.embed(&[question.to_string()])?.remove(0);
        let mut scored: Vec<(usize, f64)> = self.reps.iter().map(|r| sim.compare(&q, r)).enumerate().collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        Ok(scored)
    }
}

pub fn select_static(pool: &ExemplarPool, n_s: usize, seed: u64) -> Result<Vec<Example>, SelectionError> {
    if n_s > pool.len() {
        return Err(SelectionError::PoolTooSmall { requested: n_s, available: pool.len() });
    }
    Ok(pool.permutation(seed).into_iter().take(n_s).map(|i| pool.examples[i].clone()).collect())
}

pub fn select_dynamic(
    pool: &ExemplarPool,
    question: &str,
    n_d: usize,
    sim: &dyn SimilarityProvider,
    exclude: &[Example],
) -> Result<Vec<Example>, SelectionError> {
    let available = pool.len().saturating_sub(exclude.len());
    if n_d > available {
        return Err(SelectionError::PoolTooSmall { requested: n_d, available });
    }
    if n_d == 0 {
        return Ok(Vec::new());
    }
    let skip: HashSet<&str> = exclude.iter().map(|e| e.source_id.as_str()).collect();
    Ok(pool
        .rank(question, sim)?
        .into_iter()
        .map(|(i, _)| &pool.examples[i])
        .filter(|e| !skip.contains(e.source_id.as_str()))
        .take(n_d)
        .cloned()
        .collect())
}

/// Static picks followed by dynamic picks. A pool example sharing the test
/// example's `source_id` is never selected.
pub fn select(
    pool: &ExemplarPool,
    test: &Example,
    config: &SelectionConfig,
    sim: &dyn SimilarityProvider,
) -> Result<Vec<Example>, SelectionError> {
    select_filtered(pool, test, config, sim, &|_| true)
}

/// Like [`select`], skipping candidates rejected by `accept`; a rejected
/// static pick is replaced by the next one in the permutation and a rejected
/// dynamic pick by the next-ranked candidate.
pub fn select_filtered(
    pool: &ExemplarPool,
    test: &Example,
    config: &SelectionConfig,
    sim: &dyn SimilarityProvider,
    accept: &dyn Fn(&Example) -> bool,
) -> Result<Vec<Example>, SelectionError> {
    let requested = config.n_s + config.n_d;
    let usable = pool.examples.iter().filter(|e| e.source_id != test.source_id).count();
    if requested > usable {
        return Err(SelectionError::PoolTooSmall { requested, available: usable });
    }
    let statics: Vec<Example> = pool
        .permutation(config.seed)
        .into_iter()
        .map(|i| &pool.examples[i])
        .filter(|e| e.source_id != test.source_id && accept(e))
        .take(config.n_s)
        .cloned()
        .collect();
    let mut taken: HashSet<String> = statics.iter().map(|e| e.source_id.clone()).collect();
    taken.insert(test.source_id.clone());
    let dynamic: Vec<Example> = if config.n_d == 0 {
        Vec::new()
    } else {
        pool.rank(&test.question, sim)?
            .into_iter()
            .map(|(i, _)| &pool.examples[i])
            .filter(|e| !taken.contains(&e.source_id) && accept(e))
            .take(config.n_d)
            .cloned()
            .collect()
    };
    let got = statics.len() + dynamic.len();
    if statics.len() < config.n_s || dynamic.len() < config.n_d {
        return Err(SelectionError::PoolTooSmall { requested, available: got });
    }
    let mut out = statics;
    out.extend(dynamic);
    Ok(out)
}
