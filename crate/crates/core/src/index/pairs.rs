use std::collections::HashMap;

use super::{top_k, DocId, Hit, InvertedIndex, SearchResult};
use crate::cpt::{PseudoTermVector, TermPair};
use crate::error::{Error, Result};

/// Fully expanded pair-dimension index: every document contributes
/// `sqrt(d_i * d_j)` under every ordered pair of its terms. Quadratic in
/// document length, so meant for small corpora.
#[derive(Debug)]
pub struct PairIndex<'a> {
    base: &'a InvertedIndex,
    postings: HashMap<TermPair, Vec<(DocId, f64)>>,
}

impl<'a> PairIndex<'a> {
    pub fn build(base: &'a InvertedIndex) -> Result<Self> {
        if base.has_negative_weights() {
            let (term, weight) = base
                .docs
                .iter()
                .flat_map(|d| d.iter())
                .find(|&(_, w)| w < 0.0)
                .expect("flagged index holds a negative weight");
            return Err(Error::NegativeWeight { term, weight });
        }
        let mut postings: HashMap<TermPair, Vec<(DocId, f64)>> = HashMap::new();
        for (doc, d) in base.docs.iter().enumerate() {
            for (i, wi) in d.iter() {
                for (j, wj) in d.iter() {
                    postings
                        .entry((i, j))
                        .or_default()
                        .push((doc as DocId, (wi * wj).sqrt()));
                }
            }
        }
        Ok(Self { base, postings })
    }

    pub fn pair_count(&self) -> usize {
        self.postings.len()
    }

    /// Exhaustive CPT scoring through the pair postings.
    pub fn search(&self, q: &PseudoTermVector, k: usize) -> Result<SearchResult> {
        if q.space() != self.base.vocab().id() {
            return Err(Error::VocabularyMismatch);
        }
        let mut acc: HashMap<DocId, f64> = HashMap::new();
        for &(pair, qw) in q.entries() {
            if let Some(list) = self.postings.get(&pair) {
                for &(doc, dw) in list {
                    *acc.entry(doc).or_insert(0.0) += qw * dw;
                }
            }
        }
        let ranked = top_k(acc.into_iter().collect(), k);
        let hits = ranked
            .into_iter()
            .map(|(doc_id, score)| Hit {
                doc_id,
                name: self.base.doc_names[doc_id as usize].clone(),
                score,
            })
            .collect();
        Ok(SearchResult { hits })
    }
}
