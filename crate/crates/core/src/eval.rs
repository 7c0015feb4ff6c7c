//! Ranking metrics, counterfactual pairwise accuracy and interference-bin
//! analysis.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compose::{CompositionalQuery, SetOperator};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sparse;

/// Relevance grades keyed by query then document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous grade when the pair was already judged.
    pub fn insert(
        &mut self,
        qid: impl Into<String>,
        doc: impl Into<String>,
        grade: u32,
    ) -> Option<u32> {
        self.judgments
            .entry(qid.into())
            .or_default()
            .insert(doc.into(), grade)
    }

    pub fn grade(&self, qid: &str, doc: &str) -> u32 {
        self.judgments
            .get(qid)
            .and_then(|m| m.get(doc))
            .copied()
            .unwrap_or(0)
    }

    pub fn judged(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(qid)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn relevant_count(&self, qid: &str) -> usize {
        self.judged(qid)
            .map_or(0, |m| m.values().filter(|&&g| g > 0).count())
    }
}

/// Ranked document lists keyed by query id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    lists: BTreeMap<String, Vec<(String, f64)>>,
}

impl Run {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores a ranking, stably re-sorted by descending score.
    pub fn insert(&mut self, qid: impl Into<String>, mut ranking: Vec<(String, f64)>) {
        ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        self.lists.insert(qid.into(), ranking);
    }

    pub(crate) fn insert_ranked(&mut self, qid: String, ranking: Vec<(String, f64)>) {
        self.lists.insert(qid, ranking);
    }

    pub fn get(&self, qid: &str) -> Option<&[(String, f64)]> {
        self.lists.get(qid).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.lists.iter().map(|(q, l)| (q.as_str(), l.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Document names of one query in rank order.
    pub fn ranking(&self, qid: &str) -> Vec<&str> {
        self.lists
            .get(qid)
            .map_or_else(Vec::new, |l| l.iter().map(|(d, _)| d.as_str()).collect())
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "metric cutoff k must be >= 1".into(),
        ));
    }
    Ok(())
}

fn check_defined(qrels: &Qrels, qid: &str) -> Result<()> {
    if qrels.relevant_count(qid) == 0 {
        return Err(Error::UndefinedMetric(qid.to_owned()));
    }
    Ok(())
}

/// NDCG@k with raw grades as gains and a `log2(rank + 1)` discount.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, qid: &str, k: usize) -> Result<f64> {
    check_k(k)?;
    check_defined(qrels, qid)?;
    let discount = |rank: usize| ((rank + 1) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, d)| f64::from(qrels.grade(qid, d.as_ref())) / discount(r + 1))
        .sum();
    let mut ideal: Vec<u32> = qrels
        .judged(qid)
        .map(|m| m.values().copied().collect())
        .unwrap_or_default();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(r, &g)| f64::from(g) / discount(r + 1))
        .sum();
    Ok(dcg / idcg)
}

/// Fraction of relevant documents found in the top k.
pub fn recall_at_k<S: AsRef<str>>(
    ranking: &[S],
    qrels: &Qrels,
    qid: &str,
    k: usize,
) -> Result<f64> {
    check_k(k)?;
    check_defined(qrels, qid)?;
    let found = ranking
        .iter()
        .take(k)
        .filter(|d| qrels.grade(qid, d.as_ref()) > 0)
        .count();
    Ok(found as f64 / qrels.relevant_count(qid) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Ndcg(usize),
    Recall(usize),
}

impl Metric {
    pub fn compute<S: AsRef<str>>(self, ranking: &[S], qrels: &Qrels, qid: &str) -> Result<f64> {
        match self {
            Metric::Ndcg(k) => ndcg_at_k(ranking, qrels, qid, k),
            Metric::Recall(k) => recall_at_k(ranking, qrels, qid, k),
        }
    }

    /// Parses a comma-separated list such as `ndcg@10,recall@100`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        s.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidArgument(format!("unknown metric {s:?}; expected ndcg@K or recall@K"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        check_k(k)?;
        match name.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Metric::Ndcg(k)),
            "recall" => Ok(Metric::Recall(k)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::Recall(k) => write!(f, "recall@{k}"),
        }
    }
}

/// Per-query and mean metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<String>,
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    pub mean: BTreeMap<String, f64>,
    pub num_queries: usize,
}

/// Evaluates every query with at least one positive judgment. Queries absent
/// from the run score 0; run queries without judgments are skipped.
pub fn evaluate(
    run: &Run,
    qrels: &Qrels,
    metrics: &[Metric],
    exec: Execution,
) -> Result<EvalReport> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics requested".into()));
    }
    let qids: Vec<&str> = qrels
        .qids()
        .filter(|q| qrels.relevant_count(q) > 0)
        .collect();
    for q in qrels.qids().filter(|q| qrels.relevant_count(q) == 0) {
        log::warn!("query {q:?} has no positive judgments; excluded from evaluation");
    }
    for (q, _) in run.iter().filter(|(q, _)| qrels.relevant_count(q) == 0) {
        log::debug!("run query {q:?} has no judgments; skipped");
    }
    let rows = exec.try_map(&qids, |&q| {
        let ranking = run.ranking(q);
        metrics
            .iter()
            .map(|m| Ok((m.to_string(), m.compute(&ranking, qrels, q)?)))
            .collect::<Result<BTreeMap<String, f64>>>()
            .map(|row| (q.to_owned(), row))
    })?;
    let names: Vec<String> = metrics.iter().map(Metric::to_string).collect();
    let mut mean = BTreeMap::new();
    for name in &names {
        let total: f64 = rows.iter().map(|(_, r)| r[name]).sum();
        mean.insert(
            name.clone(),
            if rows.is_empty() {
                0.0
            } else {
                total / rows.len() as f64
            },
        );
    }
    Ok(EvalReport {
        metrics: names,
        num_queries: rows.len(),
        per_query: rows.into_iter().collect(),
        mean,
    })
}

impl EvalReport {
    /// Plain-text table: one row per query then the mean.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<20}", "qid");
        for m in &self.metrics {
            out += &format!(" {m:>12}");
        }
        out.push('\n');
        for (q, row) in &self.per_query {
            out += &format!("{q:<20}");
            for m in &self.metrics {
                out += &format!(" {:>12.4}", row[m]);
            }
            out.push('\n');
        }
        out += &format!("{:<20}", format!("mean (n={})", self.num_queries));
        for m in &self.metrics {
            out += &format!(" {:>12.4}", self.mean[m]);
        }
        out.push('\n');
        out
    }

    /// One metric's per-query values.
    pub fn column(&self, metric: &str) -> Result<HashMap<String, f64>> {
        if !self.metrics.iter().any(|m| m == metric) {
            return Err(Error::InvalidArgument(format!(
                "report has no metric {metric:?}"
            )));
        }
        Ok(self
            .per_query
            .iter()
            .filter_map(|(q, r)| r.get(metric).map(|v| (q.clone(), *v)))
            .collect())
    }
}

/// Two counterfactual queries over a pair of minimally different documents:
/// `doc_a` answers `query_a` and not `query_b`, and vice versa.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedQueries {
    pub query_a: String,
    pub doc_a: String,
    pub query_b: String,
    pub doc_b: String,
}

/// Fraction of pairs where both queries score their own document strictly
/// above the other one. Ties count as failures.
pub fn pairwise_accuracy<F>(pairs: &[PairedQueries], mut scorer: F) -> Result<f64>
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no query pairs to evaluate".into()));
    }
    let mut wins = 0usize;
    for p in pairs {
        let a_ok = scorer(&p.query_a, &p.doc_a)? > scorer(&p.query_a, &p.doc_b)?;
        let b_ok = scorer(&p.query_b, &p.doc_b)? > scorer(&p.query_b, &p.doc_a)?;
        if a_ok && b_ok {
            wins += 1;
        }
    }
    Ok(wins as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceBin {
    /// Smallest and largest positive/negative cosine in the bin.
    pub lo: f64,
    pub hi: f64,
    pub mean_metric: f64,
    pub count: usize,
    pub qids: Vec<String>,
}

/// Groups difference queries into equal-population bins by the cosine
/// between their positive and negative vectors and averages a per-query
/// metric within each bin. Bins are ordered by increasing similarity.
pub fn interference_bins(
    queries: &[CompositionalQuery],
    metric: &HashMap<String, f64>,
    n_bins: usize,
) -> Result<Vec<InterferenceBin>> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    let mut points = Vec::with_capacity(queries.len());
    for q in queries {
        if q.operator != SetOperator::Difference {
            return Err(Error::InvalidQuery {
                qid: q.qid.clone(),
                reason: format!(
                    "interference analysis needs difference queries, got {}",
                    q.operator
                ),
            });
        }
        let b = q.b.as_ref().ok_or_else(|| Error::InvalidQuery {
            qid: q.qid.clone(),
            reason: "missing negative part".into(),
        })?;
        let sim = match sparse::cosine(&q.a, b) {
            Ok(s) => s,
            Err(Error::ZeroNorm) => {
                log::warn!("query {:?} has an empty atomic vector; skipped", q.qid);
                continue;
            }
            Err(e) => return Err(e),
        };
        let Some(&value) = metric.get(&q.qid) else {
            log::warn!("no metric value for query {:?}; skipped", q.qid);
            continue;
        };
        points.push((sim, q.qid.clone(), value));
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut distinct = points.iter().map(|p| p.0).collect::<Vec<_>>();
    distinct.dedup();
    let mut bins = n_bins;
    if points.len() < bins {
        log::warn!(
            "only {} queries for {bins} bins; reducing bin count",
            points.len()
        );
        bins = points.len();
    }
    if distinct.len() < bins {
        log::warn!(
            "only {} distinct similarity values; reducing bin count",
            distinct.len()
        );
        bins = distinct.len();
    }
    let n = points.len();
    let out = (0..bins)
        .map(|i| {
            let chunk = &points[i * n / bins..(i + 1) * n / bins];
            InterferenceBin {
                lo: chunk[0].0,
                hi: chunk[chunk.len() - 1].0,
                mean_metric: chunk.iter().map(|p| p.2).sum::<f64>() / chunk.len() as f64,
                count: chunk.len(),
                qids: chunk.iter().map(|p| p.1.clone()).collect(),
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{CompositionParams, Method};
    use crate::sparse::{OnUnknown, SparseVector, Vocabulary};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn qrels(pairs: &[(&str, &str, u32)]) -> Qrels {
        let mut q = Qrels::new();
        for &(qid, d, g) in pairs {
            q.insert(qid, d, g);
        }
        q
    }

    #[test]
    fn ndcg_fixture() {
        let q = qrels(&[("q", "d1", 1), ("q", "d2", 1)]);
        let v = ndcg_at_k(&["d1", "d3", "d2"], &q, "q", 3).unwrap();
        let expected = (1.0 + 0.0 + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert_relative_eq!(v, expected, max_relative = 1e-15);
        assert!((v - 0.9197).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&["d2", "d1", "d3"], &q, "q", 3).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&["d7", "d8"], &q, "q", 2).unwrap(), 0.0);
    }

    #[test]
    fn graded_ndcg_uses_ideal_order() {
        let q = qrels(&[("q", "a", 3), ("q", "b", 1), ("q", "c", 0)]);
        assert_eq!(ndcg_at_k(&["a", "b"], &q, "q", 10).unwrap(), 1.0);
        assert!(ndcg_at_k(&["b", "a"], &q, "q", 10).unwrap() < 1.0);
    }

    #[test]
    fn recall_fixture() {
        let q = qrels(&[("q", "d1", 1), ("q", "d2", 1)]);
        assert_eq!(recall_at_k(&["d1", "d3", "d2"], &q, "q", 2).unwrap(), 0.5);
        assert_eq!(recall_at_k(&["d1", "d3", "d2"], &q, "q", 3).unwrap(), 1.0);
        assert!(matches!(
            recall_at_k(&["d1"], &q, "q", 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn undefined_without_positive_judgments() {
        let q = qrels(&[("q", "d1", 0)]);
        assert!(matches!(
            ndcg_at_k(&["d1"], &q, "q", 1),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            recall_at_k(&["d1"], &q, "other", 1),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn evaluate_report() {
        let q = qrels(&[
            ("q1", "d1", 1),
            ("q1", "d2", 1),
            ("q2", "x", 1),
            ("q3", "y", 0),
        ]);
        let mut run = Run::new();
        run.insert(
            "q1",
            vec![("d1".into(), 3.0), ("d3".into(), 2.0), ("d2".into(), 1.0)],
        );
        run.insert("q9", vec![("zz".into(), 1.0)]);
        let metrics = Metric::parse_list("ndcg@3, recall@2").unwrap();
        let r = evaluate(&run, &q, &metrics, Execution::Sequential).unwrap();
        assert_eq!(r.num_queries, 2);
        assert_eq!(r.per_query["q2"]["ndcg@3"], 0.0);
        assert_eq!(r.per_query["q1"]["recall@2"], 0.5);
        assert_relative_eq!(r.mean["recall@2"], 0.25);
        assert!(r.to_table().contains("mean (n=2)"));
        assert_eq!(r.column("recall@2").unwrap()["q1"], 0.5);
        assert!(r.column("map").is_err());
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!("NDCG@10".parse::<Metric>().unwrap(), Metric::Ndcg(10));
        assert_eq!(
            "recall@100".parse::<Metric>().unwrap().to_string(),
            "recall@100"
        );
        for bad in ["ndcg", "map@10", "recall@0", "ndcg@x"] {
            assert!(bad.parse::<Metric>().is_err(), "{bad}");
        }
    }

    fn pair(i: usize) -> PairedQueries {
        PairedQueries {
            query_a: format!("a{i}"),
            doc_a: format!("da{i}"),
            query_b: format!("b{i}"),
            doc_b: format!("db{i}"),
        }
    }

    #[test]
    fn pairwise_accuracy_cases() {
        let pairs = vec![pair(0), pair(1)];
        let perfect = |q: &str, d: &str| {
            Ok(if q[1..] == d[2..] && q[..1] == d[1..2] {
                1.0
            } else {
                0.0
            })
        };
        assert_eq!(pairwise_accuracy(&pairs, perfect).unwrap(), 1.0);
        // Query a always right, query b always wrong.
        let half = |_q: &str, d: &str| Ok(if d.starts_with("da") { 1.0 } else { 0.0 });
        assert_eq!(pairwise_accuracy(&pairs, half).unwrap(), 0.0);
        let ties = |_: &str, _: &str| Ok(0.5);
        assert_eq!(pairwise_accuracy(&pairs, ties).unwrap(), 0.0);
        assert!(pairwise_accuracy(&[], ties).is_err());
    }

    fn difference(
        v: &Vocabulary,
        qid: &str,
        a: &[(&str, f64)],
        b: &[(&str, f64)],
    ) -> CompositionalQuery {
        let a = SparseVector::from_known_pairs(a.iter().copied(), v, OnUnknown::Strict).unwrap();
        let b = SparseVector::from_known_pairs(b.iter().copied(), v, OnUnknown::Strict).unwrap();
        CompositionalQuery::new(
            qid,
            SetOperator::Difference,
            Method::Disentangled,
            a,
            Some(b),
            CompositionParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn interference_bins_split_by_similarity() {
        let v =
            Vocabulary::from_terms(["birds", "fly", "colombia", "andes", "venezuela", "x", "y"])
                .unwrap();
        let qs = vec![
            difference(
                &v,
                "birds",
                &[
                    ("birds", 1.0),
                    ("fly", 1.0),
                    ("colombia", 1.0),
                    ("andes", 1.0),
                ],
                &[
                    ("birds", 1.0),
                    ("fly", 1.0),
                    ("venezuela", 1.0),
                    ("andes", 1.0),
                ],
            ),
            difference(&v, "disjoint", &[("x", 1.0)], &[("y", 1.0)]),
            difference(&v, "half", &[("x", 1.0), ("y", 1.0)], &[("y", 1.0)]),
            difference(
                &v,
                "low",
                &[("x", 1.0), ("colombia", 1.0), ("andes", 1.0), ("fly", 1.0)],
                &[("y", 1.0), ("fly", 1.0)],
            ),
        ];
        let metric: HashMap<String, f64> = [
            ("birds", 0.2),
            ("disjoint", 0.9),
            ("half", 0.4),
            ("low", 0.8),
        ]
        .iter()
        .map(|(q, m)| (q.to_string(), *m))
        .collect();
        let bins = interference_bins(&qs, &metric, 2).unwrap();
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].qids, ["disjoint", "low"]);
        assert_eq!(bins[1].qids, ["half", "birds"]);
        assert_eq!(bins[1].hi, 0.75);
        assert_relative_eq!(bins[1].mean_metric, 0.3);
        assert_eq!(bins[0].count + bins[1].count, 4);
    }

    #[test]
    fn interference_bins_degenerate_inputs() {
        let v = Vocabulary::from_terms(["x", "y"]).unwrap();
        let qs: Vec<_> = (0..3)
            .map(|i| difference(&v, &format!("q{i}"), &[("x", 1.0)], &[("y", 1.0)]))
            .collect();
        let metric: HashMap<String, f64> = (0..3).map(|i| (format!("q{i}"), 1.0)).collect();
        let bins = interference_bins(&qs, &metric, 4).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].count, 3);
        assert!(interference_bins(&qs, &metric, 0).is_err());
        let atomic = CompositionalQuery::atomic("a", qs[0].a.clone());
        assert!(interference_bins(&[atomic], &metric, 2).is_err());
    }

    proptest! {
        #[test]
        fn metric_bounds_and_recall_monotonicity(
            rel in prop::collection::btree_set(0usize..30, 1..10),
            perm in Just((0..30).collect::<Vec<usize>>()).prop_shuffle(),
            k in 1usize..30,
        ) {
            let mut q = Qrels::new();
            for r in &rel {
                q.insert("q", format!("d{r}"), 1);
            }
            let ranking: Vec<String> = perm.iter().map(|i| format!("d{i}")).collect();
            let n = ndcg_at_k(&ranking, &q, "q", k).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
            prop_assert!(recall_at_k(&ranking, &q, "q", k + 1).unwrap() >= recall_at_k(&ranking, &q, "q", k).unwrap());
            prop_assert_eq!(recall_at_k(&ranking, &q, "q", 30).unwrap(), 1.0);
            let mut ideal: Vec<String> = rel.iter().map(|r| format!("d{r}")).collect();
            ideal.extend(ranking.iter().filter(|d| q.grade("q", d) == 0).cloned());
            prop_assert_eq!(ndcg_at_k(&ideal, &q, "q", k).unwrap(), 1.0);
        }
    }
}
