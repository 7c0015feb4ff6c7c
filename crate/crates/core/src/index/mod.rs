//! Exact top-k retrieval with signed weights.
//!
//! Scoring is term-at-a-time into a dense accumulator with no dynamic
//! pruning: upper-bound pruning is unsound once query or document weights can
//! be negative, and negation penalties must be applied in full. Documents
//! that share no term with the query are never returned.

mod pairs;
mod persist;

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::compose::{self, ComposedQuery};
use crate::cpt::CptQuery;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sparse::{SparseVector, TermId, Vocabulary};

pub use pairs::PairIndex;
pub use persist::{FORMAT_VERSION, MAGIC};

pub type DocId = u32;

/// Postings of one term, sorted by doc id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PostingList {
    docs: Vec<DocId>,
    weights: Vec<f64>,
}

impl PostingList {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DocId, f64)> + '_ {
        self.docs.iter().copied().zip(self.weights.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub doc_id: DocId,
    pub name: String,
    pub score: f64,
}

/// Ranked hits: scores nonincreasing, ties by ascending doc id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchResult {
    pub hits: Vec<Hit>,
}

impl SearchResult {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.name.as_str()).collect()
    }

    /// `(doc name, score)` pairs in rank order.
    pub fn to_ranking(&self) -> Vec<(String, f64)> {
        self.hits
            .iter()
            .map(|h| (h.name.clone(), h.score))
            .collect()
    }
}

/// Higher score first, then lower doc id. `-0.0` and `0.0` tie.
pub fn rank_order(a: &(DocId, f64), b: &(DocId, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Keeps the best `k` of `scored` in rank order.
pub(crate) fn top_k(mut scored: Vec<(DocId, f64)>, k: usize) -> Vec<(DocId, f64)> {
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    scored
}

#[derive(Debug)]
pub struct InvertedIndex {
    vocab: Vocabulary,
    postings: Vec<PostingList>,
    doc_names: Vec<String>,
    doc_lookup: HashMap<String, DocId>,
    docs: Vec<SparseVector>,
    has_negative: bool,
}

impl InvertedIndex {
    /// Indexes `docs` in order; doc ids are assigned from 0.
    pub fn build<I, S>(vocab: Vocabulary, docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, SparseVector)>,
        S: Into<String>,
    {
        let mut names = Vec::new();
        let mut vectors = Vec::new();
        let mut lookup = HashMap::new();
        for (name, v) in docs {
            let name = name.into();
            if v.space() != vocab.id() {
                return Err(Error::VocabularyMismatch);
            }
            let id = DocId::try_from(names.len())
                .map_err(|_| Error::InvalidArgument("more documents than u32 doc ids".into()))?;
            if lookup.insert(name.clone(), id).is_some() {
                return Err(Error::DuplicateDoc(name));
            }
            names.push(name);
            vectors.push(v);
        }
        Ok(Self::from_parts(vocab, names, lookup, vectors))
    }

    fn from_parts(
        vocab: Vocabulary,
        doc_names: Vec<String>,
        doc_lookup: HashMap<String, DocId>,
        docs: Vec<SparseVector>,
    ) -> Self {
        let mut counts = vec![0usize; vocab.len()];
        for d in &docs {
            for &t in d.ids() {
                counts[t as usize] += 1;
            }
        }
        let mut postings: Vec<PostingList> = counts
            .into_iter()
            .map(|n| PostingList {
                docs: Vec::with_capacity(n),
                weights: Vec::with_capacity(n),
            })
            .collect();
        // Doc ids are visited in increasing order, so each list comes out sorted.
        for (doc, d) in docs.iter().enumerate() {
            for (t, w) in d.iter() {
                let p = &mut postings[t as usize];
                p.docs.push(doc as DocId);
                p.weights.push(w);
            }
        }
        let has_negative = docs.iter().any(SparseVector::has_negative);
        Self {
            vocab,
            postings,
            doc_names,
            doc_lookup,
            docs,
            has_negative,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn doc_count(&self) -> usize {
        self.doc_names.len()
    }

    pub fn doc_name(&self, id: DocId) -> Option<&str> {
        self.doc_names.get(id as usize).map(String::as_str)
    }

    pub fn doc_id(&self, name: &str) -> Option<DocId> {
        self.doc_lookup.get(name).copied()
    }

    pub fn doc_vector(&self, id: DocId) -> Option<&SparseVector> {
        self.docs.get(id as usize)
    }

    pub fn postings(&self, term: TermId) -> Option<&PostingList> {
        self.postings.get(term as usize)
    }

    pub fn has_negative_weights(&self) -> bool {
        self.has_negative
    }

    fn check_query(&self, q: &SparseVector) -> Result<()> {
        if q.space() != self.vocab.id() {
            return Err(Error::VocabularyMismatch);
        }
        Ok(())
    }

    fn hits(&self, ranked: Vec<(DocId, f64)>) -> SearchResult {
        let hits = ranked
            .into_iter()
            .map(|(doc_id, score)| Hit {
                doc_id,
                name: self.doc_names[doc_id as usize].clone(),
                score,
            })
            .collect();
        SearchResult { hits }
    }

    /// Scores of every document touched by `q`, in doc-id order.
    pub fn score_touched(&self, q: &SparseVector) -> Result<Vec<(DocId, f64)>> {
        self.check_query(q)?;
        let mut acc = vec![0.0f64; self.doc_count()];
        let mut touched = vec![false; self.doc_count()];
        let mut order = Vec::new();
        // Terms are visited in increasing id order, so each document sums its
        // contributions in the same order as a sparse dot product.
        for (t, qw) in q.iter() {
            let Some(list) = self.postings.get(t as usize) else {
                continue;
            };
            for (doc, dw) in list.iter() {
                let d = doc as usize;
                if !touched[d] {
                    touched[d] = true;
                    order.push(doc);
                }
                acc[d] += qw * dw;
            }
        }
        order.sort_unstable();
        Ok(order.into_iter().map(|d| (d, acc[d as usize])).collect())
    }

    /// Scores of all documents, zero for untouched ones.
    pub fn score_all(&self, q: &SparseVector) -> Result<Vec<f64>> {
        let mut all = vec![0.0; self.doc_count()];
        for (d, s) in self.score_touched(q)? {
            all[d as usize] = s;
        }
        Ok(all)
    }

    /// The `k` best documents by `dot(q, d)` among those sharing a term with
    /// `q`. Negative scores are kept.
    pub fn search(&self, q: &SparseVector, k: usize) -> Result<SearchResult> {
        Ok(self.hits(top_k(self.score_touched(q)?, k)))
    }

    /// Like [`InvertedIndex::search`] but ranks every document in the
    /// corpus, untouched ones with score 0.
    pub fn search_full_corpus(&self, q: &SparseVector, k: usize) -> Result<SearchResult> {
        let scored = self
            .score_all(q)?
            .into_iter()
            .enumerate()
            .map(|(d, s)| (d as DocId, s))
            .collect();
        Ok(self.hits(top_k(scored, k)))
    }

    /// Two-stage CPT retrieval: `candidate_pool` documents by the maxpool
    /// union of both sides, rescored with the factorized CPT score.
    pub fn search_cpt(
        &self,
        q: &CptQuery,
        k: usize,
        candidate_pool: usize,
    ) -> Result<SearchResult> {
        if self.has_negative {
            let (term, weight) = self
                .docs
                .iter()
                .flat_map(|d| d.iter())
                .find(|&(_, w)| w < 0.0)
                .expect("flagged index holds a negative weight");
            return Err(Error::NegativeWeight { term, weight });
        }
        self.check_query(q.a())?;
        if q.a().is_empty() || q.b().is_empty() {
            return Ok(SearchResult::default());
        }
        let union = compose::union_maxpool(q.a(), q.b())?;
        let candidates = top_k(self.score_touched(&union)?, candidate_pool);
        let mut rescored = Vec::with_capacity(candidates.len());
        for (doc, _) in candidates {
            rescored.push((doc, q.score(&self.docs[doc as usize])?));
        }
        Ok(self.hits(top_k(rescored, k)))
    }

    /// Dispatches on the kind of composed query.
    pub fn search_composed(
        &self,
        q: &ComposedQuery,
        k: usize,
        candidate_pool: usize,
    ) -> Result<SearchResult> {
        match q {
            ComposedQuery::Sparse(v) => self.search(v, k),
            ComposedQuery::Cpt(c) => self.search_cpt(c, k, candidate_pool),
        }
    }

    pub fn search_batch(
        &self,
        queries: &[SparseVector],
        k: usize,
        exec: Execution,
    ) -> Result<Vec<SearchResult>> {
        exec.try_map(queries, |q| self.search(q, k))
    }

    pub fn search_composed_batch(
        &self,
        queries: &[ComposedQuery],
        k: usize,
        candidate_pool: usize,
        exec: Execution,
    ) -> Result<Vec<SearchResult>> {
        exec.try_map(queries, |q| self.search_composed(q, k, candidate_pool))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::OnUnknown;

    fn three_docs() -> InvertedIndex {
        let mut v = Vocabulary::new();
        let mut docs = Vec::new();
        for (name, terms) in [
            ("d1", &["colombia"][..]),
            ("d2", &["colombia", "venezuela"]),
            ("d3", &["venezuela"]),
        ] {
            let vec = SparseVector::from_pairs(
                terms.iter().map(|t| (*t, 1.0)),
                &mut v,
                OnUnknown::Extend,
            )
            .unwrap();
            docs.push((name, vec));
        }
        InvertedIndex::build(v, docs).unwrap()
    }

    fn query(idx: &InvertedIndex, xs: &[(&str, f64)]) -> SparseVector {
        SparseVector::from_known_pairs(xs.iter().copied(), idx.vocab(), OnUnknown::Strict).unwrap()
    }

    #[test]
    fn signed_query_ranks_penalized_documents_last() {
        let idx = three_docs();
        let q = query(&idx, &[("colombia", 1.0), ("venezuela", -1.0)]);
        let r = idx.search(&q, 10).unwrap();
        assert_eq!(r.names(), ["d1", "d2", "d3"]);
        assert_eq!(
            r.hits.iter().map(|h| h.score).collect::<Vec<_>>(),
            [1.0, 0.0, -1.0]
        );
        assert_eq!(idx.search(&q, 1).unwrap().names(), ["d1"]);
        assert!(idx
            .search(&SparseVector::empty(idx.vocab()), 10)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn build_counts_postings() {
        let mut v = Vocabulary::new();
        for t in ["a", "b", "c", "d"] {
            v.intern(t).unwrap();
        }
        let d = |xs: &[(TermId, f64)]| SparseVector::from_ids(&v, xs.iter().copied()).unwrap();
        let docs = vec![
            ("x", d(&[(0, 1.0), (1, 2.0)])),
            ("y", d(&[(0, 1.0), (2, 1.0)])),
            ("z", d(&[(0, 3.0), (3, 1.0)])),
            ("e", d(&[])),
        ];
        let idx = InvertedIndex::build(v, docs).unwrap();
        let lens: Vec<usize> = (0..4).map(|t| idx.postings(t).unwrap().len()).collect();
        assert_eq!(lens, [3, 1, 1, 1]);
        assert_eq!(idx.doc_count(), 4);
        assert_eq!(idx.doc_id("e"), Some(3));
    }

    #[test]
    fn empty_corpus_and_duplicates() {
        let v = Vocabulary::new();
        let idx = InvertedIndex::build(v, Vec::<(String, SparseVector)>::new()).unwrap();
        assert!(idx
            .search(&SparseVector::empty(idx.vocab()), 5)
            .unwrap()
            .is_empty());

        let v = Vocabulary::from_terms(["a"]).unwrap();
        let d = SparseVector::from_ids(&v, [(0, 1.0)]).unwrap();
        let err = InvertedIndex::build(v, vec![("x", d.clone()), ("x", d)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateDoc(n) if n == "x"));
    }

    #[test]
    fn foreign_query_is_rejected() {
        let idx = three_docs();
        let other = Vocabulary::from_terms(["colombia"]).unwrap();
        let q = SparseVector::from_ids(&other, [(0, 1.0)]).unwrap();
        assert!(matches!(idx.search(&q, 3), Err(Error::VocabularyMismatch)));
    }

    #[test]
    fn full_corpus_search_includes_untouched_documents() {
        let idx = three_docs();
        let q = query(&idx, &[("venezuela", -1.0)]);
        assert_eq!(idx.search(&q, 10).unwrap().names(), ["d2", "d3"]);
        assert_eq!(
            idx.search_full_corpus(&q, 10).unwrap().names(),
            ["d1", "d2", "d3"]
        );
    }

    #[test]
    fn cpt_search_rejects_negative_corpora() {
        let v = Vocabulary::from_terms(["a", "b"]).unwrap();
        let d = SparseVector::from_ids(&v, [(0, -1.0)]).unwrap();
        let a = SparseVector::from_ids(&v, [(0, 1.0)]).unwrap();
        let b = SparseVector::from_ids(&v, [(1, 1.0)]).unwrap();
        let q = CptQuery::new(a, b, 5).unwrap();
        let idx = InvertedIndex::build(v, vec![("d", d)]).unwrap();
        assert!(matches!(
            idx.search_cpt(&q, 5, 10),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn cpt_search_prefers_documents_matching_both_sides() {
        let mut v = Vocabulary::new();
        let mut docs = Vec::new();
        for (name, terms) in [
            ("d0", &["colombia"][..]),
            ("d1", &["venezuela", "birds"]),
            ("d2", &["birds", "colombia", "venezuela"]),
            ("d3", &["andes"]),
            ("d4", &["colombia", "colombia", "colombia"]),
        ] {
            let vec = SparseVector::from_pairs(
                terms.iter().map(|t| (*t, 1.0)),
                &mut v,
                OnUnknown::Extend,
            )
            .unwrap();
            docs.push((name, vec));
        }
        let idx = InvertedIndex::build(v, docs).unwrap();
        let a = query(&idx, &[("colombia", 1.0)]);
        let b = query(&idx, &[("venezuela", 1.0)]);
        let q = CptQuery::new(a.clone(), b.clone(), 5).unwrap();
        let r = idx.search_cpt(&q, 10, 100).unwrap();
        assert_eq!(r.hits[0].name, "d2");
        assert!(r.hits[1..].iter().all(|h| h.score == 0.0));
        let empty = CptQuery::new(a, SparseVector::empty(idx.vocab()), 5).unwrap();
        assert!(idx.search_cpt(&empty, 10, 100).unwrap().is_empty());
    }

    #[test]
    fn top_k_keeps_ties_in_doc_order() {
        let scored = vec![(4, 1.0), (2, 1.0), (3, 2.0), (0, -0.0), (1, 0.0)];
        assert_eq!(top_k(scored.clone(), 3), vec![(3, 2.0), (2, 1.0), (4, 1.0)]);
        assert_eq!(
            top_k(scored, 10).iter().map(|x| x.0).collect::<Vec<_>>(),
            [3, 2, 4, 0, 1]
        );
    }
}
