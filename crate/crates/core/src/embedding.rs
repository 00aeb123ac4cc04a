//! Word vectors, caption tokenization and cosine similarity.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding file contains no vectors")]
    EmptyFile,
    #[error("line {0}: vector dimension differs from the first line")]
    DimensionMismatch(usize),
    #[error("line {0}: unparsable number")]
    UnparsableFloat(usize),
    #[error("word {0:?} appears more than once")]
    DuplicateWord(String),
    #[error("every vector in the table is zero")]
    AllVectorsZero,
    #[error("vectors have different dimensions ({0} vs {1})")]
    VectorDimensionMismatch(usize, usize),
    #[error("cosine similarity of a zero vector is undefined")]
    ZeroVector,
    #[error("no token of {0:?} is in the vocabulary")]
    AllTokensOutOfVocabulary(String),
    #[error("reading embeddings: {0}")]
    Io(#[from] std::io::Error),
}

/// A normalized word from a caption. `start`/`end` are half-open character
/// (not byte) offsets into the source string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits on Unicode whitespace, strips leading and trailing ASCII
/// punctuation from each piece and lowercases what remains. Empty pieces
/// are dropped.
pub fn tokenize(caption: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut piece: Vec<char> = Vec::new();
    let mut piece_start = 0;

    let mut flush = |piece: &mut Vec<char>, piece_start: usize| {
        let lead = piece
            .iter()
            .take_while(|c| c.is_ascii_punctuation())
            .count();
        let trail = piece[lead..]
            .iter()
            .rev()
            .take_while(|c| c.is_ascii_punctuation())
            .count();
        if lead + trail < piece.len() {
            let core: String = piece[lead..piece.len() - trail].iter().collect();
            tokens.push(Token {
                text: core.to_lowercase(),
                start: piece_start + lead,
                end: piece_start + piece.len() - trail,
            });
        }
        piece.clear();
    };

    for (pos, ch) in caption.chars().enumerate() {
        if ch.is_whitespace() {
            if !piece.is_empty() {
                flush(&mut piece, piece_start);
            }
        } else {
            if piece.is_empty() {
                piece_start = pos;
            }
            piece.push(ch);
        }
    }
    if !piece.is_empty() {
        flush(&mut piece, piece_start);
    }
    tokens
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::VectorDimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Static word → vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds a table from in-memory entries. Words are lowercased.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut table = Self {
            dimension: 0,
            entries: HashMap::new(),
        };
        for (line, (word, vector)) in entries.into_iter().enumerate() {
            table.insert(line + 1, word.as_ref(), vector)?;
        }
        table.finish()
    }

    fn insert(
        &mut self,
        line_no: usize,
        word: &str,
        vector: Vec<f64>,
    ) -> Result<(), EmbeddingError> {
        if self.entries.is_empty() {
            self.dimension = vector.len();
        }
        if vector.is_empty() || vector.len() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch(line_no));
        }
        let word = word.to_lowercase();
        if self.entries.contains_key(&word) {
            return Err(EmbeddingError::DuplicateWord(word));
        }
        self.entries.insert(word, vector);
        Ok(())
    }

    fn finish(self) -> Result<Self, EmbeddingError> {
        if self.entries.is_empty() {
            return Err(EmbeddingError::EmptyFile);
        }
        if self.entries.values().all(|v| v.iter().all(|x| *x == 0.0)) {
            return Err(EmbeddingError::AllVectorsZero);
        }
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Vocabulary in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        words.sort_unstable();
        words
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dimension: self.dimension,
            entries: self
                .entries
                .iter()
                .map(|(w, v)| (w.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }

    /// Mean of the vectors of the phrase's in-vocabulary tokens.
    pub fn embed_phrase(&self, phrase: &str) -> Result<Vec<f64>, EmbeddingError> {
        let mut sum = vec![0.0; self.dimension];
        let mut count = 0usize;
        for token in tokenize(phrase) {
            if let Some(v) = self.entries.get(&token.text) {
                for (acc, x) in sum.iter_mut().zip(v) {
                    *acc += x;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(EmbeddingError::AllTokensOutOfVocabulary(phrase.to_string()));
        }
        if count > 1 {
            let n = count as f64;
            sum.iter_mut().for_each(|x| *x /= n);
        }
        Ok(sum)
    }
}

/// Reads the whitespace-separated text vector format:
/// `word v1 v2 ... vD`, one record per line. `D` is fixed by the first line.
/// Blank lines are ignored.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut table = EmbeddingTable {
        dimension: 0,
        entries: HashMap::new(),
    };
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().expect("nonblank line has a field");
        let vector = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| EmbeddingError::UnparsableFloat(line_no))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::UnparsableFloat(line_no));
        }
        table.insert(line_no, word, vector)?;
    }
    table.finish()
}

/// Source of vectors for caption tokens and label phrases.
///
/// [`EmbeddingTable`] is the static implementation. A contextual model can
/// implement this trait and use the caption when embedding its tokens.
pub trait EmbeddingProvider {
    /// One entry per token; `None` marks tokens the provider cannot embed.
    fn token_vectors(&self, caption: &str, tokens: &[Token]) -> Vec<Option<Vec<f64>>>;

    fn phrase_vector(&self, phrase: &str) -> Result<Vec<f64>, EmbeddingError>;
}

impl EmbeddingProvider for EmbeddingTable {
    fn token_vectors(&self, _caption: &str, tokens: &[Token]) -> Vec<Option<Vec<f64>>> {
        tokens
            .iter()
            .map(|t| self.embed_phrase(&t.text).ok())
            .collect()
    }

    fn phrase_vector(&self, phrase: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.embed_phrase(phrase)
    }
}
