//! Text to sparse vectors without a neural encoder: raw term frequency for
//! queries and Okapi BM25 impacts for documents, so that
//! `dot(encode_tf(q), encode_bm25_doc(d))` is the BM25 score of `d` for `q`.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sparse::{OnUnknown, SparseVector, TermId, VocabId, Vocabulary};

/// Small English stopword list, applied only on request.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "if", "in", "into",
    "is", "it", "its", "no", "not", "of", "on", "or", "such", "that", "the", "their", "then",
    "there", "these", "they", "this", "to", "was", "were", "which", "will", "with",
];

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Term-frequency vector: every weight is the token's multiplicity.
pub fn encode_tf<S: AsRef<str>>(
    tokens: &[S],
    vocab: &mut Vocabulary,
    mode: OnUnknown,
) -> Result<SparseVector> {
    SparseVector::from_pairs(tokens.iter().map(|t| (t.as_ref(), 1.0)), vocab, mode)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidArgument(format!(
                "BM25 needs k1 >= 0 and b in [0, 1], got k1={} b={}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

/// Global collection statistics for BM25.
#[derive(Debug, Clone)]
pub struct CorpusStats {
    space: VocabId,
    doc_count: usize,
    doc_freq: Vec<u32>,
    avg_doc_len: f64,
}

impl CorpusStats {
    /// Collects statistics from term-frequency vectors, one per document.
    pub fn from_tf_vectors(vocab: &Vocabulary, docs: &[SparseVector]) -> Result<Self> {
        let mut doc_freq = vec![0u32; vocab.len()];
        let mut total_len = 0.0;
        for d in docs {
            if d.space() != vocab.id() {
                return Err(Error::VocabularyMismatch);
            }
            for (id, w) in d.iter() {
                doc_freq[id as usize] += 1;
                total_len += w;
            }
        }
        let doc_count = docs.len();
        let avg_doc_len = if doc_count > 0 {
            total_len / doc_count as f64
        } else {
            0.0
        };
        Ok(Self {
            space: vocab.id(),
            doc_count,
            doc_freq,
            avg_doc_len,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Zero for terms never seen in the corpus.
    pub fn doc_freq(&self, id: TermId) -> u32 {
        self.doc_freq.get(id as usize).copied().unwrap_or(0)
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf(&self, id: TermId) -> f64 {
        let n = self.doc_count as f64;
        let df = self.doc_freq(id) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// Converts a document's term-frequency vector into BM25 impact weights.
pub fn bm25_weights(
    tf: &SparseVector,
    stats: &CorpusStats,
    params: Bm25Params,
) -> Result<SparseVector> {
    if tf.space() != stats.space {
        return Err(Error::VocabularyMismatch);
    }
    if stats.avg_doc_len <= 0.0 {
        return Err(Error::Inconsistent(
            "BM25 statistics describe an empty corpus".into(),
        ));
    }
    let doc_len: f64 = tf.weights().iter().sum();
    let norm = params.k1 * (1.0 - params.b + params.b * doc_len / stats.avg_doc_len);
    let mut out = SparseVector::empty_in(tf.space());
    // tf is canonical, so ids arrive sorted and unique.
    for (id, freq) in tf.iter() {
        if stats.doc_freq(id) == 0 {
            return Err(Error::Inconsistent(format!(
                "term id {id} occurs in a document but has document frequency 0"
            )));
        }
        out.push_sorted(id, stats.idf(id) * freq * (params.k1 + 1.0) / (freq + norm));
    }
    Ok(out)
}

/// BM25 document vector from raw tokens. Every token must already be in the
/// vocabulary the statistics were built over.
pub fn encode_bm25_doc<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    stats: &CorpusStats,
    params: Bm25Params,
) -> Result<SparseVector> {
    let tf = SparseVector::from_known_pairs(
        tokens.iter().map(|t| (t.as_ref(), 1.0)),
        vocab,
        OnUnknown::Strict,
    )
    .map_err(|e| match e {
        Error::UnknownTerm(t) => {
            Error::Inconsistent(format!("token {t:?} is missing from the corpus statistics"))
        }
        other => other,
    })?;
    bm25_weights(&tf, stats, params)
}

/// Two-pass corpus encoding: intern every token and count document
/// frequencies, then weight each document.
pub fn encode_bm25_corpus<S: AsRef<str> + Sync>(
    docs: &[Vec<S>],
    vocab: &mut Vocabulary,
    params: Bm25Params,
    exec: Execution,
) -> Result<(CorpusStats, Vec<SparseVector>)> {
    params.validate()?;
    let tfs = docs
        .iter()
        .map(|d| encode_tf(d, vocab, OnUnknown::Extend))
        .collect::<Result<Vec<_>>>()?;
    let stats = CorpusStats::from_tf_vectors(vocab, &tfs)?;
    let vectors = exec.try_map(&tfs, |tf| bm25_weights(tf, &stats, params))?;
    Ok((stats, vectors))
}
