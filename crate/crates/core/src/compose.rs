//! Compositional query encoding: two atomic vectors and a set operator in,
//! one retrievable query representation out.
//!
//! | operator     | methods                                          |
//! |--------------|--------------------------------------------------|
//! | difference   | subtract, ignore, disentangled, orthogonal, nrf  |
//! | union        | add, maxpool                                     |
//! | intersection | add, maxpool, cpt                                |
//! | atomic       | atomic                                           |

use std::fmt;
use std::str::FromStr;

use crate::cpt::{CptQuery, DEFAULT_TOP_M};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sparse::{self, SparseVector};

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOperator {
    Difference,
    Union,
    Intersection,
    Atomic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Subtract,
    Ignore,
    Disentangled,
    Orthogonal,
    Nrf,
    Add,
    Maxpool,
    Cpt,
    Atomic,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Subtract,
        Method::Ignore,
        Method::Disentangled,
        Method::Orthogonal,
        Method::Nrf,
        Method::Add,
        Method::Maxpool,
        Method::Cpt,
        Method::Atomic,
    ];

    pub fn valid_for(self, op: SetOperator) -> bool {
        use Method::*;
        match op {
            SetOperator::Difference => {
                matches!(self, Subtract | Ignore | Disentangled | Orthogonal | Nrf)
            }
            SetOperator::Union => matches!(self, Add | Maxpool),
            SetOperator::Intersection => matches!(self, Add | Maxpool | Cpt),
            SetOperator::Atomic => self == Atomic,
        }
    }

    /// The method used when a query does not name one.
    pub fn default_for(op: SetOperator) -> Method {
        match op {
            SetOperator::Difference => Method::Disentangled,
            SetOperator::Union => Method::Maxpool,
            SetOperator::Intersection => Method::Cpt,
            SetOperator::Atomic => Method::Atomic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionParams {
    /// Weight of the negative feedback vector for `nrf`.
    pub lambda: f64,
    /// Terms kept per atomic query for `cpt`.
    pub m: usize,
}

impl Default for CompositionParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            m: DEFAULT_TOP_M,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompositionalQuery {
    pub qid: String,
    pub operator: SetOperator,
    pub method: Method,
    pub a: SparseVector,
    pub b: Option<SparseVector>,
    pub params: CompositionParams,
}

impl CompositionalQuery {
    pub fn new(
        qid: impl Into<String>,
        operator: SetOperator,
        method: Method,
        a: SparseVector,
        b: Option<SparseVector>,
        params: CompositionParams,
    ) -> Result<Self> {
        let q = Self {
            qid: qid.into(),
            operator,
            method,
            a,
            b,
            params,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn atomic(qid: impl Into<String>, a: SparseVector) -> Self {
        Self {
            qid: qid.into(),
            operator: SetOperator::Atomic,
            method: Method::Atomic,
            a,
            b: None,
            params: CompositionParams::default(),
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidQuery {
            qid: self.qid.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.method.valid_for(self.operator) {
            return Err(self.invalid(format!(
                "method {} does not apply to {}",
                self.method, self.operator
            )));
        }
        match (&self.b, self.operator) {
            (None, op) if op != SetOperator::Atomic => {
                return Err(self.invalid("missing second atomic query"))
            }
            (Some(_), SetOperator::Atomic) => {
                return Err(self.invalid("atomic query takes a single vector"))
            }
            (Some(b), _) if b.space() != self.a.space() => return Err(Error::VocabularyMismatch),
            _ => {}
        }
        if !(self.params.lambda >= 0.0 && self.params.lambda.is_finite()) {
            return Err(self.invalid(format!("lambda must be >= 0, got {}", self.params.lambda)));
        }
        if self.params.m == 0 {
            return Err(self.invalid("m must be >= 1"));
        }
        Ok(())
    }
}

/// Output of [`compose`]: a plain sparse query, or a pseudo-term query for
/// CPT intersections.
#[derive(Debug, Clone)]
pub enum ComposedQuery {
    Sparse(SparseVector),
    Cpt(CptQuery),
}

impl ComposedQuery {
    pub fn as_sparse(&self) -> Option<&SparseVector> {
        match self {
            ComposedQuery::Sparse(v) => Some(v),
            ComposedQuery::Cpt(_) => None,
        }
    }
}

pub fn difference_subtract(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    sparse::sub(a, b)
}

/// Drops the negated part entirely.
pub fn difference_ignore(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    if a.space() != b.space() {
        return Err(Error::VocabularyMismatch);
    }
    Ok(a.clone())
}

/// `a - (b with a's support removed)`: penalizes terms only `b` carries while
/// leaving every weight of `a` untouched.
pub fn difference_disentangled(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    sparse::sub(a, &sparse::mask_remove(b, a)?)
}

/// `a` minus its projection onto `b`.
pub fn difference_orthogonal(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    sparse::sub(a, &sparse::project(a, b)?)
}

/// Rocchio-style negative feedback, `a - lambda * b`.
pub fn difference_nrf(a: &SparseVector, b: &SparseVector, lambda: f64) -> Result<SparseVector> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    sparse::sub(a, &sparse::scale(b, lambda))
}

pub fn union_add(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    sparse::add(a, b)
}

pub fn union_maxpool(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    sparse::maxpool(a, b)
}

pub fn intersection_add(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    sparse::add(a, b)
}

pub fn intersection_maxpool(a: &SparseVector, b: &SparseVector) -> Result<SparseVector> {
    sparse::maxpool(a, b)
}

pub fn intersection_cpt(a: &SparseVector, b: &SparseVector, m: usize) -> Result<CptQuery> {
    CptQuery::new(a.clone(), b.clone(), m)
}

pub fn compose(q: &CompositionalQuery) -> Result<ComposedQuery> {
    q.validate()?;
    let a = &q.a;
    let b = match (&q.b, q.method) {
        (_, Method::Atomic) => return Ok(ComposedQuery::Sparse(a.clone())),
        (Some(b), _) => b,
        (None, _) => return Err(q.invalid("missing second atomic query")),
    };
    let v = match q.method {
        Method::Subtract => difference_subtract(a, b)?,
        Method::Ignore => difference_ignore(a, b)?,
        Method::Disentangled => difference_disentangled(a, b)?,
        // Projecting onto an empty vector removes nothing.
        Method::Orthogonal if b.is_empty() => a.clone(),
        Method::Orthogonal => difference_orthogonal(a, b)?,
        Method::Nrf => difference_nrf(a, b, q.params.lambda)?,
        Method::Add => sparse::add(a, b)?,
        Method::Maxpool => sparse::maxpool(a, b)?,
        Method::Cpt => return Ok(ComposedQuery::Cpt(intersection_cpt(a, b, q.params.m)?)),
        Method::Atomic => unreachable!(),
    };
    Ok(ComposedQuery::Sparse(v))
}

pub fn compose_batch(
    queries: &[CompositionalQuery],
    exec: Execution,
) -> Result<Vec<ComposedQuery>> {
    exec.try_map(queries, compose)
}

impl FromStr for SetOperator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "difference" => Ok(Self::Difference),
            "union" => Ok(Self::Union),
            "intersection" => Ok(Self::Intersection),
            "atomic" => Ok(Self::Atomic),
            _ => Err(Error::InvalidArgument(format!(
                "unknown set operator {s:?}"
            ))),
        }
    }
}

impl fmt::Display for SetOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Difference => "difference",
            Self::Union => "union",
            Self::Intersection => "intersection",
            Self::Atomic => "atomic",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown composition method {s:?}")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Subtract => "subtract",
            Self::Ignore => "ignore",
            Self::Disentangled => "disentangled",
            Self::Orthogonal => "orthogonal",
            Self::Nrf => "nrf",
            Self::Add => "add",
            Self::Maxpool => "maxpool",
            Self::Cpt => "cpt",
            Self::Atomic => "atomic",
        })
    }
}
