use actsql::similarity::{LexicalSimilarity, Representation, SimilarityError, SimilarityProvider};

/// Scores the annotated (schema item, slice) anchors 1.0 and everything else
/// at half the lexical score.
pub struct AnchoredSimilarity {
    pub anchors: Vec<(&'static str, &'static str)>,
}

impl SimilarityProvider for AnchoredSimilarity {
    fn embed(&self, texts: &[String]) -> Result<Vec<Representation>, SimilarityError> {
        LexicalSimilarity.embed(texts)
    }

    fn score_matrix(&self, queries: &[String], candidates: &[String]) -> Result<Vec<Vec<f64>>, SimilarityError> {
        let base = LexicalSimilarity.score_matrix(queries, candidates)?;
        Ok(queries
            .iter()
            .zip(base)
            .map(|(q, row)| {
                candidates
                    .iter()
                    .zip(row)
                    .map(|(c, s)| if self.anchors.contains(&(q.as_str(), c.as_str())) { 1.0 } else { s * 0.5 })
                    .collect()
            })
            .collect())
    }

    fn name(&self) -> String {
        "anchored".into()
    }
}

pub fn anchored() -> AnchoredSimilarity {
    AnchoredSimilarity {
        anchors: vec![
            ("savings balance", "savings balance"),
            ("accounts name", "accounts"),
            ("flight destination", "flights"),
            ("has amenity dormid", "dorms have amenities ?"),
            ("dorm amenity", "dorm amenities are there ?"),
        ],
    }
}
