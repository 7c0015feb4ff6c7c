#![allow(dead_code)]

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use setsparse::sparse::dot;
use setsparse::{InvertedIndex, SparseVector, Vocabulary};

pub fn vocab(n: usize) -> Vocabulary {
    Vocabulary::from_terms((0..n).map(|i| format!("t{i:04}"))).unwrap()
}

/// Dyadic weights keep every sum of a few products exact.
pub const DYADIC: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0];

pub fn dyadic<R: Rng>(rng: &mut R, signed: bool) -> f64 {
    let w = *DYADIC.choose(rng).unwrap();
    if signed && rng.gen_bool(0.5) {
        -w
    } else {
        w
    }
}

pub fn random_vector<R: Rng>(
    rng: &mut R,
    v: &Vocabulary,
    max_nnz: usize,
    mut weight: impl FnMut(&mut R) -> f64,
) -> SparseVector {
    let nnz = rng.gen_range(0..=max_nnz.min(v.len()));
    let ids: Vec<u32> = rand::seq::index::sample(rng, v.len(), nnz)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    let entries: Vec<(u32, f64)> = ids.into_iter().map(|i| (i, weight(rng))).collect();
    SparseVector::from_ids(v, entries).unwrap()
}

pub fn nonempty_vector<R: Rng>(
    rng: &mut R,
    v: &Vocabulary,
    max_nnz: usize,
    mut weight: impl FnMut(&mut R) -> f64,
) -> SparseVector {
    loop {
        let x = random_vector(rng, v, max_nnz, &mut weight);
        if !x.is_empty() {
            return x;
        }
    }
}

/// Document names sort in id order.
pub fn doc_name(i: usize) -> String {
    format!("d{i:05}")
}

pub fn corpus<R: Rng>(
    rng: &mut R,
    v: &Vocabulary,
    n_docs: usize,
    max_nnz: usize,
    signed: bool,
) -> Vec<SparseVector> {
    (0..n_docs)
        .map(|_| random_vector(rng, v, max_nnz, |r| dyadic(r, signed)))
        .collect()
}

pub fn build(v: Vocabulary, docs: &[SparseVector]) -> InvertedIndex {
    InvertedIndex::build(
        v,
        docs.iter()
            .enumerate()
            .map(|(i, d)| (doc_name(i), d.clone())),
    )
    .unwrap()
}

/// Reference top-k: score every document with a plain dot product, sort by
/// descending score then ascending id. `touched_only` drops documents that
/// share no term with the query.
pub fn brute_force(
    q: &SparseVector,
    docs: &[SparseVector],
    k: usize,
    touched_only: bool,
) -> Vec<(u32, f64)> {
    let mut all: Vec<(u32, f64)> = docs
        .iter()
        .enumerate()
        .filter(|(_, d)| !touched_only || d.ids().iter().any(|&t| q.contains(t)))
        .map(|(i, d)| (i as u32, dot(q, d).unwrap()))
        .collect();
    all.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    all.truncate(k);
    all
}
