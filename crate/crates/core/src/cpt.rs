//! Combined pseudo-terms for intersection queries.
//!
//! A query `A ∩ B` is expanded into pair dimensions `(i, j)` with weight
//! `sqrt(a_i * b_j)` over the top-m terms of each side; a document into
//! `(i, j)` with weight `sqrt(d_i * d_j)` over its support. Their inner product
//! factorizes as
//!
//! ```text
//! (Σ_i sqrt(a_i d_i)) * (Σ_j sqrt(b_j d_j))
//! ```
//!
//! so a document only scores above zero when it matches both sides.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::sparse::{self, SparseVector, TermId, VocabId, Vocabulary};

pub const DEFAULT_TOP_M: usize = 5;

pub type TermPair = (TermId, TermId);

/// Pair-dimension vector, sorted by `(i, j)`, all weights positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoTermVector {
    space: VocabId,
    entries: Vec<(TermPair, f64)>,
}

impl PseudoTermVector {
    pub fn space(&self) -> VocabId {
        self.space
    }

    pub fn entries(&self) -> &[(TermPair, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, pair: TermPair) -> f64 {
        match self.entries.binary_search_by(|(p, _)| p.cmp(&pair)) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn pairs(&self) -> BTreeSet<TermPair> {
        self.entries.iter().map(|(p, _)| *p).collect()
    }

    /// Human-readable keys of the form `termA∩termB`.
    pub fn render(&self, vocab: &Vocabulary) -> Vec<(String, f64)> {
        self.entries
            .iter()
            .map(|&((i, j), w)| {
                let t = |id| vocab.term(id).unwrap_or("<unknown>");
                (format!("{}∩{}", t(i), t(j)), w)
            })
            .collect()
    }
}

fn check_nonnegative(v: &SparseVector) -> Result<()> {
    match v.iter().find(|&(_, w)| w < 0.0) {
        Some((term, weight)) => Err(Error::NegativeWeight { term, weight }),
        None => Ok(()),
    }
}

/// Outer product of the top-m terms of `a` and `b`, at most `m²` entries.
pub fn expand_query(a: &SparseVector, b: &SparseVector, m: usize) -> Result<PseudoTermVector> {
    if a.space() != b.space() {
        return Err(Error::VocabularyMismatch);
    }
    check_nonnegative(a)?;
    check_nonnegative(b)?;
    let (a, b) = (sparse::top_m(a, m)?, sparse::top_m(b, m)?);
    let mut entries = Vec::with_capacity(a.nnz() * b.nnz());
    for (i, wa) in a.iter() {
        for (j, wb) in b.iter() {
            entries.push(((i, j), (wa * wb).sqrt()));
        }
    }
    Ok(PseudoTermVector {
        space: a.space(),
        entries,
    })
}

/// Outer product of a document with itself, optionally materializing only
/// the pairs in `restrict_to`.
pub fn expand_doc(
    d: &SparseVector,
    restrict_to: Option<&BTreeSet<TermPair>>,
) -> Result<PseudoTermVector> {
    check_nonnegative(d)?;
    let mut entries = Vec::new();
    match restrict_to {
        None => {
            entries.reserve(d.nnz() * d.nnz());
            for (i, wi) in d.iter() {
                for (j, wj) in d.iter() {
                    entries.push(((i, j), (wi * wj).sqrt()));
                }
            }
        }
        Some(pairs) => {
            for &(i, j) in pairs {
                let (wi, wj) = (d.get(i), d.get(j));
                if wi > 0.0 && wj > 0.0 {
                    entries.push(((i, j), (wi * wj).sqrt()));
                }
            }
        }
    }
    Ok(PseudoTermVector {
        space: d.space(),
        entries,
    })
}

/// Inner product over matching pair dimensions.
pub fn cpt_score(q: &PseudoTermVector, d: &PseudoTermVector) -> Result<f64> {
    if q.space != d.space {
        return Err(Error::VocabularyMismatch);
    }
    let (mut x, mut y) = (0, 0);
    let mut acc = 0.0;
    while x < q.entries.len() && y < d.entries.len() {
        match q.entries[x].0.cmp(&d.entries[y].0) {
            Ordering::Less => x += 1,
            Ordering::Greater => y += 1,
            Ordering::Equal => {
                acc += q.entries[x].1 * d.entries[y].1;
                x += 1;
                y += 1;
            }
        }
    }
    Ok(acc)
}

fn sqrt_overlap(side: &SparseVector, d: &SparseVector) -> f64 {
    side.iter().map(|(i, w)| (w * d.get(i)).sqrt()).sum()
}

/// Closed form of `cpt_score(expand_query(..), expand_doc(d, None))` for
/// already-truncated sides.
pub fn cpt_score_factorized(
    a_top: &SparseVector,
    b_top: &SparseVector,
    d: &SparseVector,
) -> Result<f64> {
    if a_top.space() != d.space() || b_top.space() != d.space() {
        return Err(Error::VocabularyMismatch);
    }
    check_nonnegative(a_top)?;
    check_nonnegative(b_top)?;
    check_nonnegative(d)?;
    Ok(sqrt_overlap(a_top, d) * sqrt_overlap(b_top, d))
}

/// An intersection query ready for retrieval: both atomic vectors plus
/// their truncated sides.
#[derive(Debug, Clone)]
pub struct CptQuery {
    a: SparseVector,
    b: SparseVector,
    a_top: SparseVector,
    b_top: SparseVector,
    m: usize,
}

impl CptQuery {
    pub fn new(a: SparseVector, b: SparseVector, m: usize) -> Result<Self> {
        if a.space() != b.space() {
            return Err(Error::VocabularyMismatch);
        }
        check_nonnegative(&a)?;
        check_nonnegative(&b)?;
        let a_top = sparse::top_m(&a, m)?;
        let b_top = sparse::top_m(&b, m)?;
        Ok(Self {
            a,
            b,
            a_top,
            b_top,
            m,
        })
    }

    pub fn a(&self) -> &SparseVector {
        &self.a
    }

    pub fn b(&self) -> &SparseVector {
        &self.b
    }

    pub fn a_top(&self) -> &SparseVector {
        &self.a_top
    }

    pub fn b_top(&self) -> &SparseVector {
        &self.b_top
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn space(&self) -> VocabId {
        self.a.space()
    }

    pub fn expand(&self) -> PseudoTermVector {
        let mut entries = Vec::with_capacity(self.a_top.nnz() * self.b_top.nnz());
        for (i, wa) in self.a_top.iter() {
            for (j, wb) in self.b_top.iter() {
                entries.push(((i, j), (wa * wb).sqrt()));
            }
        }
        PseudoTermVector {
            space: self.space(),
            entries,
        }
    }

    /// Factorized CPT score of one document.
    pub fn score(&self, d: &SparseVector) -> Result<f64> {
        cpt_score_factorized(&self.a_top, &self.b_top, d)
    }
}
