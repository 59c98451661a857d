//! Independent re-implementations used as test oracles.

use std::collections::BTreeMap;

fn trigrams(text: &str) -> BTreeMap<String, usize> {
    let padded: Vec<char> = format!(" {} ", text.to_lowercase().replace('_', " ")).chars().collect();
    let mut m = BTreeMap::new();
    for i in 0..padded.len().saturating_sub(2) {
        *m.entry(padded[i..i + 3].iter().collect()).or_default() += 1;
    }
    m
}

/// Cosine over character-trigram counts.
pub fn trigram_cosine(a: &str, b: &str) -> f64 {
    let (x, y) = (trigrams(a), trigrams(b));
    let dot: usize = x.iter().map(|(k, v)| v * y.get(k).copied().unwrap_or(0)).sum();
    if dot == 0 {
        return 0.0;
    }
    let norm = |m: &BTreeMap<String, usize>| (m.values().map(|v| v * v).sum::<usize>() as f64).sqrt();
    dot as f64 / (norm(&x) * norm(&y))
}

/// Exhaustive search over slices of at most `max_len` tokens: shortest first,
/// then leftmost, keeping only strict improvements.
pub fn best_slice(name: &str, tokens: &[String], max_len: usize) -> (usize, usize) {
    let mut best: Option<(f64, usize, usize)> = None;
    for len in 1..=max_len.min(tokens.len()) {
        for start in 0..=tokens.len() - len {
            let score = trigram_cosine(name, &tokens[start..start + len].join(" "));
            if best.is_none_or(|(b, _, _)| score > b + 1e-12) {
                best = Some((score, start, start + len - 1));
            }
        }
    }
    let (_, s, e) = best.expect("non-empty tokens");
    (s, e)
}

/// Pool indices sorted by similarity to `question`, highest first, ties by index.
pub fn rank_pool(question: &str, pool: &[actsql::schema::Example]) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = pool.iter().enumerate().map(|(i, e)| (trigram_cosine(question, &e.question), i)).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, i)| i).collect()
}
