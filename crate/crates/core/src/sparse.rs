//! Vocabulary management and sparse-vector algebra.
//!
//! A [`SparseVector`] is kept in canonical form: term ids strictly increasing
//! and no stored weight with magnitude below [`ZERO_TOLERANCE`]. Missing
//! entries mean zero in every elementwise operation, matching the semantics of
//! a sparse dot product.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::error::{Error, Result};

pub type TermId = u32;

/// Magnitudes below this are treated as exact zeros and dropped.
pub const ZERO_TOLERANCE: f64 = 1e-12;

static NEXT_VOCAB_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of a term space. Vectors built against different vocabularies
/// cannot be combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VocabId(u64);

/// What to do with a term string that the vocabulary does not know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnUnknown {
    /// Fail with [`Error::UnknownTerm`].
    #[default]
    Strict,
    /// Append the term to the vocabulary.
    Extend,
    /// Drop the entry.
    Skip,
}

/// Bijection between term strings and dense ids starting at 0.
///
/// Terms are only ever appended, so ids handed out earlier stay valid as the
/// vocabulary grows.
#[derive(Debug)]
pub struct Vocabulary {
    id: VocabId,
    terms: Vec<String>,
    lookup: HashMap<String, TermId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self {
            id: VocabId(NEXT_VOCAB_ID.fetch_add(1, AtomicOrdering::Relaxed)),
            terms: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    /// Builds a vocabulary whose ids follow the iteration order.
    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for term in terms {
            let term = term.into();
            if vocab.lookup.contains_key(&term) {
                return Err(Error::DuplicateTerm(term));
            }
            vocab.intern(&term)?;
        }
        Ok(vocab)
    }

    pub fn id(&self) -> VocabId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<TermId> {
        self.lookup.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Returns the id of `term`, appending it if needed.
    pub fn intern(&mut self, term: &str) -> Result<TermId> {
        if term.is_empty() {
            return Err(Error::EmptyTerm);
        }
        if let Some(id) = self.lookup.get(term) {
            return Ok(*id);
        }
        let id = TermId::try_from(self.terms.len())
            .map_err(|_| Error::InvalidArgument("vocabulary exceeds u32 term ids".into()))?;
        self.terms.push(term.to_owned());
        self.lookup.insert(term.to_owned(), id);
        Ok(id)
    }

    /// Resolves `term` according to `mode`; `Ok(None)` means skipped.
    pub fn resolve(&mut self, term: &str, mode: OnUnknown) -> Result<Option<TermId>> {
        match mode {
            OnUnknown::Extend => self.intern(term).map(Some),
            _ => self.resolve_frozen(term, mode),
        }
    }

    /// Like [`Vocabulary::resolve`] without the ability to grow.
    pub fn resolve_frozen(&self, term: &str, mode: OnUnknown) -> Result<Option<TermId>> {
        if term.is_empty() {
            return Err(Error::EmptyTerm);
        }
        match (self.get(term), mode) {
            (Some(id), _) => Ok(Some(id)),
            (None, OnUnknown::Skip) => Ok(None),
            (None, OnUnknown::Strict) => Err(Error::UnknownTerm(term.to_owned())),
            (None, OnUnknown::Extend) => Err(Error::InvalidArgument(
                "cannot extend a frozen vocabulary".into(),
            )),
        }
    }
}

/// Sorted `(term id, weight)` pairs over one vocabulary. Weights may be
/// negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    space: VocabId,
    ids: Vec<TermId>,
    weights: Vec<f64>,
}

fn is_zero(w: f64) -> bool {
    w.abs() < ZERO_TOLERANCE
}

impl SparseVector {
    pub fn empty(vocab: &Vocabulary) -> Self {
        Self::empty_in(vocab.id())
    }

    pub(crate) fn empty_in(space: VocabId) -> Self {
        Self {
            space,
            ids: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Canonicalises arbitrary `(id, weight)` pairs: sorts, sums duplicates
    /// and drops zeros.
    pub fn from_ids<I>(vocab: &Vocabulary, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (TermId, f64)>,
    {
        let len = vocab.len();
        let mut entries: Vec<(TermId, f64)> = entries.into_iter().collect();
        for &(id, w) in &entries {
            if id as usize >= len {
                return Err(Error::TermOutOfRange { id, len });
            }
            if !w.is_finite() {
                return Err(Error::NonFinite {
                    term: id,
                    weight: w,
                });
            }
        }
        entries.sort_by_key(|&(id, _)| id);
        let mut out = Self::empty(vocab);
        let mut iter = entries.into_iter().peekable();
        while let Some((id, mut w)) = iter.next() {
            while let Some(&(next, v)) = iter.peek() {
                if next != id {
                    break;
                }
                w += v;
                iter.next();
            }
            out.push_sorted(id, w);
        }
        Ok(out)
    }

    /// Builds a vector from term strings, growing the vocabulary when `mode`
    /// is [`OnUnknown::Extend`]. Duplicate terms have their weights summed.
    pub fn from_pairs<I, S>(pairs: I, vocab: &mut Vocabulary, mode: OnUnknown) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut ids = Vec::new();
        for (term, w) in pairs {
            if let Some(id) = vocab.resolve(term.as_ref(), mode)? {
                ids.push((id, w));
            }
        }
        Self::from_ids(vocab, ids)
    }

    /// [`SparseVector::from_pairs`] against a vocabulary that may not grow.
    pub fn from_known_pairs<I, S>(pairs: I, vocab: &Vocabulary, mode: OnUnknown) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut ids = Vec::new();
        for (term, w) in pairs {
            if let Some(id) = vocab.resolve_frozen(term.as_ref(), mode)? {
                ids.push((id, w));
            }
        }
        Self::from_ids(vocab, ids)
    }

    // Caller guarantees ids arrive strictly increasing.
    pub(crate) fn push_sorted(&mut self, id: TermId, w: f64) {
        debug_assert!(self.ids.last().is_none_or(|&last| last < id));
        if !is_zero(w) {
            self.ids.push(id);
            self.weights.push(w);
        }
    }

    pub fn space(&self) -> VocabId {
        self.space
    }

    pub fn nnz(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[TermId] {
        &self.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, f64)> + '_ {
        self.ids.iter().copied().zip(self.weights.iter().copied())
    }

    /// Weight of `id`, zero when absent.
    pub fn get(&self, id: TermId) -> f64 {
        match self.ids.binary_search(&id) {
            Ok(pos) => self.weights[pos],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, id: TermId) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn norm_squared(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn has_negative(&self) -> bool {
        self.weights.iter().any(|&w| w < 0.0)
    }

    /// `(term, weight)` view in term-id order.
    pub fn to_pairs<'v>(&self, vocab: &'v Vocabulary) -> Vec<(&'v str, f64)> {
        self.iter()
            .map(|(id, w)| (vocab.term(id).unwrap_or("<unknown>"), w))
            .collect()
    }

    fn check_space(&self, other: &SparseVector) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(Error::VocabularyMismatch)
        }
    }
}

/// Merge-join of two vectors with missing entries read as zero.
fn merge_with(
    a: &SparseVector,
    b: &SparseVector,
    f: impl Fn(f64, f64) -> f64,
) -> Result<SparseVector> {
    a.check_space(b)?;
    let mut out = SparseVector::empty_in(a.space);
    let (mut i, mut j) = (0, 0);
    while i < a.ids.len() || j < b.ids.len() {
        let ord = match (a.ids.get(i), b.ids.get(j)) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                out.push_sorted(a.ids[i], f(a.weights[i], 0.0));
                i += 1;
            }
            Ordering::Greater => {
                out.push_sorted(b.ids[j], f(0.0, b.weights[j]));
                j += 1;
            }
            Ordering::Equal => {
                out.push_sorted(a.ids[i], f(a.weights[i], b.weights[j]));
                i += 1;
                j += 1;
            }
        }
    }
    Ok(out)
}

/// Sum of products over shared term ids, accumulated in term-id order.
pub fn dot(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    a.check_space(b)?;
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.ids.len() && j < b.ids.len() {
        match a.ids[i].cmp(&b.ids[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += a.weights[i] * b.weights[j];
                i += 1;
                j += 1;
            }
        }
    }
    Ok(acc)
}

pub fn add(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    merge_with(a, b, |x, y| x + y)
}

pub fn sub(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    merge_with(a, b, |x, y| x - y)
}

pub fn scale(a: &SparseVector, factor: f64) -> SparseVector {
    let mut out = SparseVector::empty_in(a.space);
    for (id, w) in a.iter() {
        out.push_sorted(id, w * factor);
    }
    out
}

/// Elementwise maximum, missing entries counting as zero.
pub fn maxpool(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    merge_with(a, b, f64::max)
}

/// `b` with every entry on the support of `support_of` removed.
pub fn mask_remove(b: &SparseVector, support_of: &SparseVector) -> Result<SparseVector> {
    b.check_space(support_of)?;
    let mut out = SparseVector::empty_in(b.space);
    for (id, w) in b.iter() {
        if !support_of.contains(id) {
            out.push_sorted(id, w);
        }
    }
    Ok(out)
}

/// Projection of `a` onto the line spanned by `onto`.
pub fn project(a: &SparseVector, onto: &SparseVector) -> Result<SparseVector> {
    a.check_space(onto)?;
    let denom = onto.norm_squared();
    if denom == 0.0 {
        return Err(Error::DegenerateProjection);
    }
    Ok(scale(onto, dot(a, onto)? / denom))
}

pub fn cosine(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    let d = dot(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((d / (na * nb)).clamp(-1.0, 1.0))
}

/// Keeps the `m` largest weights; ties go to the smaller term id.
pub fn top_m(a: &SparseVector, m: usize) -> Result<SparseVector> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "top-m truncation needs m >= 1".into(),
        ));
    }
    if m >= a.nnz() {
        return Ok(a.clone());
    }
    let mut order: Vec<usize> = (0..a.nnz()).collect();
    order.sort_by(|&x, &y| {
        a.weights[y]
            .total_cmp(&a.weights[x])
            .then(a.ids[x].cmp(&a.ids[y]))
    });
    order.truncate(m);
    order.sort_unstable();
    let mut out = SparseVector::empty_in(a.space);
    for pos in order {
        out.push_sorted(a.ids[pos], a.weights[pos]);
    }
    Ok(out)
}
