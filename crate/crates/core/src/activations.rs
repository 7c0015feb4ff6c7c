//! Term-weight activations applied to per-position vocabulary logits.
//!
//! `splade_activate` is the usual log-saturated ReLU with max pooling over
//! positions. The SNReLU family adds a mirrored negative branch and a dead
//! zone of half-width `epsilon` around zero so that terms can carry negative
//! weight while most of the vocabulary stays exactly zero.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sparse::{SparseVector, TermId, VocabId, Vocabulary};

/// Raw encoder outputs: one row per input position, one column per term.
#[derive(Debug, Clone)]
pub struct LogitMatrix {
    space: VocabId,
    columns: Vec<TermId>,
    rows: usize,
    values: Vec<f64>,
}

impl LogitMatrix {
    pub fn new(vocab: &Vocabulary, columns: Vec<TermId>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument(
                "logit matrix needs at least one position".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(columns.len());
        for &c in &columns {
            if c as usize >= vocab.len() {
                return Err(Error::TermOutOfRange {
                    id: c,
                    len: vocab.len(),
                });
            }
            if !seen.insert(c) {
                return Err(Error::InvalidArgument(format!(
                    "term id {c} appears in two logit columns"
                )));
            }
        }
        let width = columns.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidArgument(format!(
                    "logit row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            for (&c, &x) in columns.iter().zip(row) {
                if !x.is_finite() {
                    return Err(Error::NonFinite { term: c, weight: x });
                }
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            space: vocab.id(),
            columns,
            rows: rows.len(),
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[TermId] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let width = self.columns.len();
        (0..self.rows).map(move |i| self.values[i * width + j])
    }

    /// Elementwise negation, used to check odd symmetry.
    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|x| -x).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegFormula {
    /// `-log(1 + ReLU(-x - eps))`: odd mirror of the positive branch.
    #[default]
    Corrected,
    /// `-log(1 + ReLU(-x + eps))`: as originally written; leaks negative
    /// weight inside the dead zone.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Plain Splade: max over positions of the positive branch only.
    #[default]
    SpladeMax,
    /// Whichever of the pooled positive and pooled negative value has the
    /// larger magnitude; ties go to the positive side.
    AbsMax,
    /// Pooled positive plus pooled negative value.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationConfig {
    pub epsilon: f64,
    pub neg_formula: NegFormula,
    pub aggregation: Aggregation,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.25,
            neg_formula: NegFormula::Corrected,
            aggregation: Aggregation::SpladeMax,
        }
    }
}

impl ActivationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn splade_weight(x: f64) -> f64 {
    relu(x).ln_1p()
}

pub fn snrelu_pos(x: f64, epsilon: f64) -> f64 {
    relu(x - epsilon).ln_1p()
}

pub fn snrelu_neg(x: f64, epsilon: f64, formula: NegFormula) -> f64 {
    match formula {
        NegFormula::Corrected => -relu(-x - epsilon).ln_1p(),
        NegFormula::Literal => -relu(-x + epsilon).ln_1p(),
    }
}

fn collect(m: &LogitMatrix, weights: Vec<f64>) -> SparseVector {
    let mut entries: Vec<(TermId, f64)> = m.columns.iter().copied().zip(weights).collect();
    entries.sort_by_key(|&(id, _)| id);
    let mut out = SparseVector::empty_in(m.space);
    for (id, w) in entries {
        out.push_sorted(id, w);
    }
    out
}

/// `w_j = max_i log(1 + ReLU(out_ij))`.
pub fn splade_activate(m: &LogitMatrix, exec: Execution) -> SparseVector {
    let weights = exec.map_range(m.columns.len(), |j| {
        m.column(j).map(splade_weight).fold(0.0, f64::max)
    });
    collect(m, weights)
}

/// Pools one column into a single signed weight.
pub fn snrelu_pool(
    column: impl Iterator<Item = f64>,
    epsilon: f64,
    formula: NegFormula,
    aggregation: Aggregation,
) -> f64 {
    let (mut pos, mut neg) = (0.0f64, 0.0f64);
    for x in column {
        pos = pos.max(snrelu_pos(x, epsilon));
        neg = neg.min(snrelu_neg(x, epsilon, formula));
    }
    match aggregation {
        Aggregation::AbsMax | Aggregation::SpladeMax => {
            if pos.abs() >= neg.abs() {
                pos
            } else {
                neg
            }
        }
        Aggregation::Sum => pos + neg,
    }
}

/// SNReLU with absmax or sum pooling over positions.
pub fn snrelu_activate(
    m: &LogitMatrix,
    cfg: &ActivationConfig,
    exec: Execution,
) -> Result<SparseVector> {
    cfg.validate()?;
    if cfg.aggregation == Aggregation::SpladeMax {
        return Err(Error::InvalidArgument(
            "SNReLU pooling must be absmax or sum".into(),
        ));
    }
    let weights = exec.map_range(m.columns.len(), |j| {
        snrelu_pool(m.column(j), cfg.epsilon, cfg.neg_formula, cfg.aggregation)
    });
    Ok(collect(m, weights))
}

/// Dispatches on `cfg.aggregation`: Splade for `SpladeMax`, SNReLU otherwise.
pub fn activate(m: &LogitMatrix, cfg: &ActivationConfig, exec: Execution) -> Result<SparseVector> {
    match cfg.aggregation {
        Aggregation::SpladeMax => Ok(splade_activate(m, exec)),
        _ => snrelu_activate(m, cfg, exec),
    }
}

impl FromStr for NegFormula {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "literal" => Ok(Self::Literal),
            _ => Err(Error::InvalidArgument(format!(
                "unknown negative formula {s:?}"
            ))),
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "splade_max" | "splade" => Ok(Self::SpladeMax),
            "absmax" => Ok(Self::AbsMax),
            "sum" => Ok(Self::Sum),
            _ => Err(Error::InvalidArgument(format!("unknown aggregation {s:?}"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SpladeMax => "splade_max",
            Self::AbsMax => "absmax",
            Self::Sum => "sum",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn single_column(values: &[f64]) -> (Vocabulary, LogitMatrix) {
        let v = Vocabulary::from_terms(["t"]).unwrap();
        let rows = values.iter().map(|&x| vec![x]).collect();
        let m = LogitMatrix::new(&v, vec![0], rows).unwrap();
        (v, m)
    }

    fn cfg(epsilon: f64, aggregation: Aggregation) -> ActivationConfig {
        ActivationConfig {
            epsilon,
            neg_formula: NegFormula::Corrected,
            aggregation,
        }
    }

    #[test]
    fn splade_examples() {
        let (_, m) = single_column(&[2.0, 0.5]);
        assert_relative_eq!(
            splade_activate(&m, Execution::Sequential).get(0),
            3f64.ln(),
            max_relative = 1e-15
        );
        let (_, m) = single_column(&[-1.0, -3.0]);
        assert!(splade_activate(&m, Execution::Sequential).is_empty());
        let (_, m) = single_column(&[E - 1.0]);
        assert_relative_eq!(
            splade_activate(&m, Execution::Sequential).get(0),
            1.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn snrelu_scalar_examples() {
        assert_eq!(snrelu_pos(1.0, 1.0), 0.0);
        assert_eq!(snrelu_neg(1.0, 1.0, NegFormula::Corrected), 0.0);
        assert_relative_eq!(snrelu_pos(E, 1.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            snrelu_neg(-E, 1.0, NegFormula::Corrected),
            -1.0,
            max_relative = 1e-15
        );
        // literal formula leaks inside the dead zone
        assert!(snrelu_neg(0.0, 1.0, NegFormula::Literal) < 0.0);
        assert_eq!(snrelu_neg(0.0, 1.0, NegFormula::Corrected), 0.0);
    }

    #[test]
    fn pooling_of_the_worked_column() {
        // Column whose branch outputs are pos {0.5, 0} and neg {0, -0.8}.
        let eps = 0.25;
        let x_pos = 0.5f64.exp_m1() + eps;
        let x_neg = -(0.8f64.exp_m1() + eps);
        let (_, m) = single_column(&[x_pos, x_neg]);
        let abs =
            snrelu_activate(&m, &cfg(eps, Aggregation::AbsMax), Execution::Sequential).unwrap();
        let sum = snrelu_activate(&m, &cfg(eps, Aggregation::Sum), Execution::Sequential).unwrap();
        assert_relative_eq!(abs.get(0), -0.8, max_relative = 1e-12);
        assert_relative_eq!(sum.get(0), -0.3, max_relative = 1e-12);
    }

    #[test]
    fn dead_zone_and_single_position() {
        let (_, m) = single_column(&[0.2, -0.25, 0.25, 0.0]);
        for agg in [Aggregation::AbsMax, Aggregation::Sum] {
            assert!(snrelu_activate(&m, &cfg(0.25, agg), Execution::Sequential)
                .unwrap()
                .is_empty());
        }
        let (_, m) = single_column(&[E]);
        for agg in [Aggregation::AbsMax, Aggregation::Sum] {
            let w = snrelu_activate(&m, &cfg(1.0, agg), Execution::Sequential)
                .unwrap()
                .get(0);
            assert_relative_eq!(w, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn splade_aggregation_is_rejected_by_snrelu() {
        let (_, m) = single_column(&[1.0]);
        assert!(snrelu_activate(
            &m,
            &cfg(0.25, Aggregation::SpladeMax),
            Execution::Sequential
        )
        .is_err());
        assert!(activate(
            &m,
            &cfg(0.25, Aggregation::SpladeMax),
            Execution::Sequential
        )
        .is_ok());
    }

    #[test]
    fn matrix_validation() {
        let v = Vocabulary::from_terms(["a", "b"]).unwrap();
        assert!(LogitMatrix::new(&v, vec![0, 1], vec![]).is_err());
        assert!(LogitMatrix::new(&v, vec![0, 1], vec![vec![1.0]]).is_err());
        assert!(LogitMatrix::new(&v, vec![0, 0], vec![vec![1.0, 1.0]]).is_err());
        assert!(LogitMatrix::new(&v, vec![0, 5], vec![vec![1.0, 1.0]]).is_err());
        assert!(LogitMatrix::new(&v, vec![0], vec![vec![f64::INFINITY]]).is_err());
        assert!(ActivationConfig {
            epsilon: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    fn matrix() -> impl Strategy<Value = (Vocabulary, LogitMatrix)> {
        (1usize..6, 1usize..8).prop_flat_map(|(rows, cols)| {
            prop::collection::vec(prop::collection::vec(-4.0..4.0f64, cols), rows).prop_map(
                move |values| {
                    let v = Vocabulary::from_terms((0..cols).map(|j| format!("t{j}"))).unwrap();
                    let m = LogitMatrix::new(&v, (0..cols as u32).rev().collect(), values).unwrap();
                    (v, m)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn corrected_sum_is_odd((_v, m) in matrix(), eps in 0.0..1.0f64) {
            let c = cfg(eps, Aggregation::Sum);
            let fwd = snrelu_activate(&m, &c, Execution::Sequential).unwrap();
            let back = snrelu_activate(&m.negated(), &c, Execution::Sequential).unwrap();
            prop_assert_eq!(crate::sparse::scale(&fwd, -1.0), back);
        }

        #[test]
        fn branches_are_monotone(x in -5.0..5.0f64, dx in 0.0..1.0f64, eps in 0.0..1.0f64) {
            prop_assert!(snrelu_pos(x + dx, eps) >= snrelu_pos(x, eps));
            prop_assert!(snrelu_neg(x + dx, eps, NegFormula::Corrected) >= snrelu_neg(x, eps, NegFormula::Corrected));
        }

        #[test]
        fn splade_is_positive_branch_at_zero_epsilon((_v, m) in matrix()) {
            let s = splade_activate(&m, Execution::Sequential);
            prop_assert!(s.weights().iter().all(|&w| w > 0.0));
            for (j, &term) in m.columns().iter().enumerate() {
                let expected = m.column(j).map(|x| snrelu_pos(x, 0.0)).fold(0.0, f64::max);
                prop_assert_eq!(s.get(term), expected);
            }
        }

        #[test]
        fn single_position_aggregations_coincide(x in -5.0..5.0f64, eps in 0.0..1.0f64) {
            let a = snrelu_pool([x].into_iter(), eps, NegFormula::Corrected, Aggregation::AbsMax);
            let s = snrelu_pool([x].into_iter(), eps, NegFormula::Corrected, Aggregation::Sum);
            prop_assert_eq!(a, s);
            prop_assert!(snrelu_pos(x, eps) == 0.0 || snrelu_neg(x, eps, NegFormula::Corrected) == 0.0);
        }

        #[test]
        fn parallel_columns_match_sequential((_v, m) in matrix(), eps in 0.0..1.0f64) {
            let c = cfg(eps, Aggregation::AbsMax);
            prop_assert_eq!(
                snrelu_activate(&m, &c, Execution::Sequential).unwrap(),
                snrelu_activate(&m, &c, Execution::Parallel).unwrap()
            );
        }
    }
}
