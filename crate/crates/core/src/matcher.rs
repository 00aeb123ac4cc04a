//! Locates the caption word that stands for a class label.
//!
//! For a label such as `person` the caption "a woman sitting on a couch"
//! names it as `woman`; that token is the anchor the replacement strategy
//! rewrites.

use thiserror::Error;

use crate::embedding::{cosine_similarity, tokenize, EmbeddingError, EmbeddingProvider, Token};

/// Similarity floor below which no caption token counts as the label.
pub const DEFAULT_MIN_SCORE: f64 = 0.35;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub token: Token,
    pub score: f64,
    pub label: String,
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("label {0:?} has no in-vocabulary token")]
    LabelOutOfVocabulary(String),
    #[error(transparent)]
    Embedding(EmbeddingError),
}

/// Returns the token of `caption` most similar to `label`, or `None` when
/// no embeddable token reaches `min_score`. Ties go to the earliest token.
pub fn match_label_word<P: EmbeddingProvider + ?Sized>(
    caption: &str,
    label: &str,
    provider: &P,
    min_score: f64,
) -> Result<Option<MatchResult>, MatchError> {
    let label_vec = provider.phrase_vector(label).map_err(|e| match e {
        EmbeddingError::AllTokensOutOfVocabulary(_) => {
            MatchError::LabelOutOfVocabulary(label.to_string())
        }
        other => MatchError::Embedding(other),
    })?;

    let tokens = tokenize(caption);
    let vectors = provider.token_vectors(caption, &tokens);

    let mut best: Option<(usize, f64)> = None;
    for (idx, vector) in vectors.iter().enumerate() {
        let Some(vector) = vector else { continue };
        let score = match cosine_similarity(vector, &label_vec) {
            Ok(s) => s,
            Err(EmbeddingError::ZeroVector) => continue,
            Err(e) => return Err(MatchError::Embedding(e)),
        };
        // Strict comparison keeps the earliest token on ties.
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((idx, score));
        }
    }

    Ok(best
        .filter(|(_, score)| *score >= min_score)
        .map(|(idx, score)| MatchResult {
            token: tokens[idx].clone(),
            score,
            label: label.to_string(),
        }))
}
