//! Score fusion of two per-atomic-query runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::index::SearchResult;

/// Document scores for one query.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredRun {
    pub qid: String,
    pub scores: BTreeMap<String, f64>,
}

impl ScoredRun {
    pub fn new(qid: impl Into<String>) -> Self {
        Self {
            qid: qid.into(),
            scores: BTreeMap::new(),
        }
    }

    /// Fails on a repeated document name.
    pub fn from_pairs<I, S>(qid: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut run = Self::new(qid);
        for (doc, s) in pairs {
            let doc = doc.into();
            if run.scores.insert(doc.clone(), s).is_some() {
                return Err(Error::DuplicateId(doc));
            }
        }
        Ok(run)
    }

    pub fn from_search(qid: impl Into<String>, result: &SearchResult) -> Self {
        let scores = result
            .hits
            .iter()
            .map(|h| (h.name.clone(), h.score))
            .collect();
        Self {
            qid: qid.into(),
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Documents by descending score, ties by ascending name.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self.scores.iter().map(|(d, s)| (d.clone(), *s)).collect();
        v.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        v
    }

    /// Min-max scaling to `[0, 1]`. A run whose scores are all equal maps to
    /// all zeros.
    pub fn min_max_scaled(&self) -> Self {
        let min = self.scores.values().copied().fold(f64::INFINITY, f64::min);
        let max = self
            .scores
            .values()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        if !self.scores.is_empty() && span <= 0.0 {
            log::warn!(
                "run for query {:?} has constant scores; scaling maps them to 0",
                self.qid
            );
        }
        let scores = self
            .scores
            .iter()
            .map(|(d, &s)| (d.clone(), if span > 0.0 { (s - min) / span } else { 0.0 }))
            .collect();
        Self {
            qid: self.qid.clone(),
            scores,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseOp {
    /// Union.
    Plus,
    /// Intersection.
    Times,
    /// Difference.
    Minus,
}

impl FuseOp {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            FuseOp::Plus => a + b,
            FuseOp::Times => a * b,
            FuseOp::Minus => a - b,
        }
    }
}

/// Combines two runs document by document. A document missing from one run
/// scores 0 there (also after scaling).
pub fn fuse(run_a: &ScoredRun, run_b: &ScoredRun, op: FuseOp, scaled: bool) -> ScoredRun {
    let (a, b) = if scaled {
        (run_a.min_max_scaled(), run_b.min_max_scaled())
    } else {
        (run_a.clone(), run_b.clone())
    };
    let mut out = ScoredRun::new(run_a.qid.clone());
    for doc in a.scores.keys().chain(b.scores.keys()) {
        if out.scores.contains_key(doc) {
            continue;
        }
        let sa = a.scores.get(doc).copied().unwrap_or(0.0);
        let sb = b.scores.get(doc).copied().unwrap_or(0.0);
        out.scores.insert(doc.clone(), op.apply(sa, sb));
    }
    out
}

impl FromStr for FuseOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Self::Plus),
            "times" | "*" => Ok(Self::Times),
            "minus" | "-" => Ok(Self::Minus),
            _ => Err(Error::InvalidArgument(format!(
                "unknown fusion operator {s:?}"
            ))),
        }
    }
}

impl fmt::Display for FuseOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Plus => "plus",
            Self::Times => "times",
            Self::Minus => "minus",
        })
    }
}
