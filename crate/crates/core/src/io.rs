//! File formats. All text is UTF-8 and every reader streams line by line.
//!
//! * Vector JSONL: `{"id": "d0", "vector": {"term": weight, ...}}`
//! * Text JSONL: `{"id": "d0", "text": "..."}`
//! * Query JSONL: `{"qid": "q1", "operator": "difference", "method": "disentangled",
//!   "a": "qA" | {...}, "b": "qB" | {...}, "params": {"lambda": 0.5, "m": 5}}`
//!   where `a`/`b` are ids into a vector file or inline term maps; `method`
//!   and `params` are optional.
//! * Composed JSONL: vector records, or for CPT intersections
//!   `{"id": "q1", "cpt": {"m": 5, "a": {...}, "b": {...}, "pseudo_terms": {"x∩y": w}}}`
//! * Pair JSONL: `{"query_a": "...", "doc_a": "...", "query_b": "...", "doc_b": "..."}`
//! * Logit grid: tab-separated; first row holds term strings, every further
//!   row one input position.
//! * TREC qrels: `qid 0 docid grade`
//! * TREC run: `qid Q0 docid rank score tag`, rank from 1, score with six
//!   decimals.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::activations::LogitMatrix;
use crate::compose::{ComposedQuery, CompositionParams, CompositionalQuery, Method, SetOperator};
use crate::cpt::CptQuery;
use crate::error::{Error, Result};
use crate::eval::{PairedQueries, Qrels, Run};
use crate::sparse::{OnUnknown, SparseVector, Vocabulary};

/// Term map that keeps repeated keys so they can be summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermWeights(pub Vec<(String, f64)>);

impl<'de> Deserialize<'de> for TermWeights {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = TermWeights;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping term strings to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<TermWeights, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(TermWeights(out))
            }
        }
        d.deserialize_map(V)
    }
}

impl TermWeights {
    pub fn into_vector(self, vocab: &mut Vocabulary, mode: OnUnknown) -> Result<SparseVector> {
        SparseVector::from_pairs(self.0, vocab, mode)
    }
}

/// Serializes a vector as a term map in term-id order.
struct VectorView<'a> {
    vector: &'a SparseVector,
    vocab: &'a Vocabulary,
}

impl Serialize for VectorView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.vector.nnz()))?;
        for (term, w) in self.vector.to_pairs(self.vocab) {
            map.serialize_entry(term, &w)?;
        }
        map.end()
    }
}

#[derive(Deserialize)]
struct VectorLine {
    id: String,
    vector: TermWeights,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Iterates over the non-blank lines of a reader with 1-based line numbers.
struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Iterator for Lines<R> {
    type Item = Result<(usize, String)>;
    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line += 1;
            match self.inner.next()? {
                Err(e) => return Some(Err(e.into())),
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => return Some(Ok((self.line, l))),
            }
        }
    }
}

fn lines<R: BufRead>(r: R) -> Lines<R> {
    Lines {
        inner: r.lines(),
        line: 0,
    }
}

/// Streaming reader for vector JSONL.
pub struct VectorReader<'v, R> {
    lines: Lines<R>,
    label: PathBuf,
    vocab: &'v mut Vocabulary,
    mode: OnUnknown,
    seen: HashSet<String>,
}

impl<'v, R: BufRead> VectorReader<'v, R> {
    pub fn new(
        reader: R,
        label: impl Into<PathBuf>,
        vocab: &'v mut Vocabulary,
        mode: OnUnknown,
    ) -> Self {
        Self {
            lines: lines(reader),
            label: label.into(),
            vocab,
            mode,
            seen: HashSet::new(),
        }
    }

    fn parse(&mut self, line: usize, text: &str) -> Result<(String, SparseVector)> {
        let rec: VectorLine = serde_json::from_str(text)
            .map_err(|e| Error::parse(&self.label, line, e.to_string()))?;
        if !self.seen.insert(rec.id.clone()) {
            return Err(Error::parse(
                &self.label,
                line,
                format!("duplicate id {:?}", rec.id),
            ));
        }
        let v = rec
            .vector
            .into_vector(self.vocab, self.mode)
            .map_err(|e| Error::parse(&self.label, line, e.to_string()))?;
        Ok((rec.id, v))
    }
}

impl<R: BufRead> Iterator for VectorReader<'_, R> {
    type Item = Result<(String, SparseVector)>;
    fn next(&mut self) -> Option<Self::Item> {
        let item = self.lines.next()?;
        Some(item.and_then(|(n, text)| self.parse(n, &text)))
    }
}

pub fn read_vectors(
    path: impl AsRef<Path>,
    vocab: &mut Vocabulary,
    mode: OnUnknown,
) -> Result<Vec<(String, SparseVector)>> {
    let path = path.as_ref();
    VectorReader::new(open(path)?, path, vocab, mode).collect()
}

pub fn write_vector<W: Write>(
    w: &mut W,
    id: &str,
    v: &SparseVector,
    vocab: &Vocabulary,
) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        vector: VectorView<'a>,
    }
    serde_json::to_writer(
        &mut *w,
        &Line {
            id,
            vector: VectorView { vector: v, vocab },
        },
    )
    .map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_vectors<'a, W, I>(w: &mut W, records: I, vocab: &Vocabulary) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a SparseVector)>,
{
    for (id, v) in records {
        write_vector(w, id, v, vocab)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
pub struct TextRecord {
    pub id: String,
    pub text: String,
}

pub fn read_texts(path: impl AsRef<Path>) -> Result<Vec<TextRecord>> {
    read_jsonl(path.as_ref())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    lines(open(path)?)
        .map(|item| {
            let (n, text) = item?;
            serde_json::from_str(&text).map_err(|e| Error::parse(path, n, e.to_string()))
        })
        .collect()
}

/// Either an id into a vector file or an inline term map.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum VectorRef {
    Id(String),
    Inline(TermWeights),
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ParamsRecord {
    pub lambda: Option<f64>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct QueryRecord {
    pub qid: String,
    pub operator: String,
    #[serde(default)]
    pub method: Option<String>,
    pub a: VectorRef,
    #[serde(default)]
    pub b: Option<VectorRef>,
    #[serde(default)]
    pub params: ParamsRecord,
}

pub fn read_query_records(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>> {
    read_jsonl(path.as_ref())
}

/// Overrides applied while turning query records into queries.
#[derive(Debug, Clone, Copy, Default)]
pub struct QueryDefaults {
    /// Replaces the record's method when set.
    pub method: Option<Method>,
    /// Used when the record has no params.
    pub params: CompositionParams,
}

impl QueryRecord {
    /// Resolves vector references against `vectors` and inline maps against
    /// `vocab`.
    pub fn resolve(
        &self,
        vectors: &HashMap<String, SparseVector>,
        vocab: &mut Vocabulary,
        mode: OnUnknown,
        defaults: QueryDefaults,
    ) -> Result<CompositionalQuery> {
        let invalid = |reason: String| Error::InvalidQuery {
            qid: self.qid.clone(),
            reason,
        };
        let operator: SetOperator = self
            .operator
            .parse()
            .map_err(|e: Error| invalid(e.to_string()))?;
        let method = match (defaults.method, &self.method) {
            (Some(m), _) => m,
            (None, Some(m)) => m.parse().map_err(|e: Error| invalid(e.to_string()))?,
            (None, None) => Method::default_for(operator),
        };
        let mut fetch = |r: &VectorRef| -> Result<SparseVector> {
            match r {
                VectorRef::Id(id) => vectors
                    .get(id)
                    .cloned()
                    .ok_or_else(|| invalid(format!("unknown vector id {id:?}"))),
                VectorRef::Inline(w) => w.clone().into_vector(vocab, mode),
            }
        };
        let a = fetch(&self.a)?;
        let b = self.b.as_ref().map(&mut fetch).transpose()?;
        let params = CompositionParams {
            lambda: self.params.lambda.unwrap_or(defaults.params.lambda),
            m: self.params.m.unwrap_or(defaults.params.m),
        };
        CompositionalQuery::new(self.qid.clone(), operator, method, a, b, params)
    }
}

/// Reads queries and the vector file they reference into one vocabulary.
pub fn read_queries(
    queries: impl AsRef<Path>,
    vectors: impl AsRef<Path>,
    vocab: &mut Vocabulary,
    defaults: QueryDefaults,
) -> Result<Vec<CompositionalQuery>> {
    let vecs: HashMap<String, SparseVector> = read_vectors(vectors, vocab, OnUnknown::Extend)?
        .into_iter()
        .collect();
    let queries = queries.as_ref();
    read_query_records(queries)?
        .iter()
        .map(|r| r.resolve(&vecs, vocab, OnUnknown::Extend, defaults))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::Parse { .. } => e,
            other => Error::parse(queries, 0, other.to_string()),
        })
}

pub fn write_composed<W: Write>(
    w: &mut W,
    qid: &str,
    q: &ComposedQuery,
    vocab: &Vocabulary,
) -> Result<()> {
    match q {
        ComposedQuery::Sparse(v) => write_vector(w, qid, v, vocab),
        ComposedQuery::Cpt(c) => {
            struct Pseudo<'a>(Vec<(String, f64)>, std::marker::PhantomData<&'a ()>);
            impl Serialize for Pseudo<'_> {
                fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                    let mut map = s.serialize_map(Some(self.0.len()))?;
                    for (k, v) in &self.0 {
                        map.serialize_entry(k, v)?;
                    }
                    map.end()
                }
            }
            #[derive(Serialize)]
            struct Body<'a> {
                m: usize,
                a: VectorView<'a>,
                b: VectorView<'a>,
                pseudo_terms: Pseudo<'a>,
            }
            #[derive(Serialize)]
            struct Line<'a> {
                id: &'a str,
                cpt: Body<'a>,
            }
            let line = Line {
                id: qid,
                cpt: Body {
                    m: c.m(),
                    a: VectorView {
                        vector: c.a(),
                        vocab,
                    },
                    b: VectorView {
                        vector: c.b(),
                        vocab,
                    },
                    pseudo_terms: Pseudo(c.expand().render(vocab), std::marker::PhantomData),
                },
            };
            serde_json::to_writer(&mut *w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            Ok(())
        }
    }
}

#[derive(Deserialize)]
struct CptBody {
    m: usize,
    a: TermWeights,
    b: TermWeights,
}

#[derive(Deserialize)]
struct ComposedLine {
    id: String,
    #[serde(default)]
    vector: Option<TermWeights>,
    #[serde(default)]
    cpt: Option<CptBody>,
}

/// Reads plain or composed query vectors against a frozen vocabulary (for
/// example an index's). Terms the vocabulary does not know are handled by
/// `mode`; [`OnUnknown::Extend`] is rejected.
pub fn read_composed(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    mode: OnUnknown,
) -> Result<Vec<(String, ComposedQuery)>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in lines(open(path)?) {
        let (n, text) = item?;
        let at = |e: Error| Error::parse(path, n, e.to_string());
        let line: ComposedLine =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, n, e.to_string()))?;
        if !seen.insert(line.id.clone()) {
            return Err(Error::parse(path, n, format!("duplicate id {:?}", line.id)));
        }
        let q = match (line.vector, line.cpt) {
            (Some(v), None) => {
                ComposedQuery::Sparse(SparseVector::from_known_pairs(v.0, vocab, mode).map_err(at)?)
            }
            (None, Some(c)) => {
                let a = SparseVector::from_known_pairs(c.a.0, vocab, mode).map_err(at)?;
                let b = SparseVector::from_known_pairs(c.b.0, vocab, mode).map_err(at)?;
                ComposedQuery::Cpt(CptQuery::new(a, b, c.m).map_err(at)?)
            }
            _ => {
                return Err(Error::parse(
                    path,
                    n,
                    "record needs exactly one of \"vector\" or \"cpt\"",
                ))
            }
        };
        out.push((line.id, q));
    }
    Ok(out)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<PairedQueries>> {
    read_jsonl(path.as_ref())
}

/// Parses a logit grid, interning header terms per `mode`.
pub fn read_logits(
    path: impl AsRef<Path>,
    vocab: &mut Vocabulary,
    mode: OnUnknown,
) -> Result<LogitMatrix> {
    let path = path.as_ref();
    parse_logits(open(path)?, path, vocab, mode)
}

pub fn parse_logits<R: BufRead>(
    r: R,
    label: &Path,
    vocab: &mut Vocabulary,
    mode: OnUnknown,
) -> Result<LogitMatrix> {
    let mut it = lines(r);
    let (hn, header) = it
        .next()
        .ok_or_else(|| Error::parse(label, 1, "empty logit file"))??;
    let mut columns = Vec::new();
    for term in header.split('\t') {
        let id = vocab
            .resolve(term, mode)
            .map_err(|e| Error::parse(label, hn, e.to_string()))?
            .ok_or_else(|| Error::parse(label, hn, format!("unknown term {term:?}")))?;
        columns.push(id);
    }
    let mut rows = Vec::new();
    for item in it {
        let (n, text) = item?;
        let row = text
            .split('\t')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(label, n, format!("not a number: {x:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != columns.len() {
            return Err(Error::parse(
                label,
                n,
                format!("expected {} values, found {}", columns.len(), row.len()),
            ));
        }
        rows.push(row);
    }
    LogitMatrix::new(vocab, columns, rows).map_err(|e| Error::parse(label, 0, e.to_string()))
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    parse_qrels(open(path)?, path)
}

/// Repeated `(qid, doc)` pairs keep the last grade.
pub fn parse_qrels<R: BufRead>(r: R, label: &Path) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for item in lines(r) {
        let (n, text) = item?;
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::parse(
                label,
                n,
                format!("expected 4 fields, found {}", f.len()),
            ));
        }
        let grade: i64 = f[3]
            .parse()
            .map_err(|_| Error::parse(label, n, format!("bad grade {:?}", f[3])))?;
        let grade = u32::try_from(grade)
            .map_err(|_| Error::parse(label, n, format!("grade must be >= 0, got {grade}")))?;
        if qrels.insert(f[0], f[2], grade).is_some() {
            log::warn!(
                "{}:{n}: repeated judgment for ({}, {}); keeping the last",
                label.display(),
                f[0],
                f[2]
            );
        }
    }
    Ok(qrels)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<Run> {
    let path = path.as_ref();
    parse_run(open(path)?, path)
}

/// Ranks must increase strictly within each query.
pub fn parse_run<R: BufRead>(r: R, label: &Path) -> Result<Run> {
    let mut lists: HashMap<String, (u64, Vec<(String, f64)>)> = HashMap::new();
    let mut order = Vec::new();
    for item in lines(r) {
        let (n, text) = item?;
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() != 6 {
            return Err(Error::parse(
                label,
                n,
                format!("expected 6 fields, found {}", f.len()),
            ));
        }
        let rank: u64 = f[3]
            .parse()
            .map_err(|_| Error::parse(label, n, format!("bad rank {:?}", f[3])))?;
        let score: f64 = f[4]
            .parse()
            .map_err(|_| Error::parse(label, n, format!("bad score {:?}", f[4])))?;
        if !score.is_finite() {
            return Err(Error::parse(label, n, "score must be finite"));
        }
        let entry = lists.entry(f[0].to_owned()).or_insert_with(|| {
            order.push(f[0].to_owned());
            (0, Vec::new())
        });
        if rank <= entry.0 {
            return Err(Error::parse(
                label,
                n,
                format!(
                    "rank {rank} does not follow rank {} for query {}",
                    entry.0, f[0]
                ),
            ));
        }
        if entry.1.iter().any(|(d, _)| d == f[2]) {
            return Err(Error::parse(
                label,
                n,
                format!("document {} listed twice for query {}", f[2], f[0]),
            ));
        }
        entry.0 = rank;
        entry.1.push((f[2].to_owned(), score));
    }
    let mut run = Run::new();
    for q in order {
        let (_, list) = lists.remove(&q).unwrap();
        run.insert_ranked(q, list);
    }
    Ok(run)
}

/// Writes every list in rank order with 1-based ranks.
pub fn write_run<W: Write>(w: &mut W, run: &Run, tag: &str) -> Result<()> {
    for (qid, list) in run.iter() {
        write_ranking(w, qid, list, tag)?;
    }
    Ok(())
}

pub fn write_ranking<W: Write>(
    w: &mut W,
    qid: &str,
    ranking: &[(String, f64)],
    tag: &str,
) -> Result<()> {
    for (rank, (doc, score)) in ranking.iter().enumerate() {
        writeln!(w, "{qid} Q0 {doc} {} {score:.6} {tag}", rank + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn label() -> PathBuf {
        PathBuf::from("mem")
    }

    #[test]
    fn vector_lines_parse() {
        let text = "{\"id\":\"qA\",\"vector\":{\"birds\":1.0,\"colombia\":1.0}}\n\n{\"id\":\"d0\",\"vector\":{}}\n";
        let mut v = Vocabulary::new();
        let recs: Vec<_> = VectorReader::new(Cursor::new(text), label(), &mut v, OnUnknown::Extend)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].1.nnz(), 2);
        assert!(recs[1].1.is_empty());
    }

    #[test]
    fn bad_vector_lines_report_line_numbers() {
        let text = "{\"id\":\"a\",\"vector\":{}}\n{\"id\":\"b\",\"vector\":{\"x\":\"heavy\"}}\n";
        let mut v = Vocabulary::new();
        let err = VectorReader::new(Cursor::new(text), label(), &mut v, OnUnknown::Extend)
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let dup = "{\"id\":\"a\",\"vector\":{}}\n{\"id\":\"a\",\"vector\":{}}\n";
        let err = VectorReader::new(Cursor::new(dup), label(), &mut v, OnUnknown::Extend)
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn repeated_terms_in_a_record_are_summed() {
        let text = "{\"id\":\"a\",\"vector\":{\"x\":1.0,\"x\":2.5}}\n";
        let mut v = Vocabulary::new();
        let recs: Vec<_> = VectorReader::new(Cursor::new(text), label(), &mut v, OnUnknown::Extend)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(recs[0].1.weights(), &[3.5]);
    }

    #[test]
    fn vectors_write_in_term_order() {
        let mut v = Vocabulary::new();
        let x =
            SparseVector::from_pairs([("zeta", -1.5), ("alpha", 0.1)], &mut v, OnUnknown::Extend)
                .unwrap();
        let mut out = Vec::new();
        write_vector(&mut out, "q\"1", &x, &v).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"id\":\"q\\\"1\",\"vector\":{\"zeta\":-1.5,\"alpha\":0.1}}\n"
        );
    }

    #[test]
    fn qrels_parse_with_last_wins() {
        let q = parse_qrels(Cursor::new("q1 0 d7 1\nq1 0 d8 0\nq1 0 d7 2\n"), &label()).unwrap();
        assert_eq!(q.grade("q1", "d7"), 2);
        assert_eq!(q.grade("q1", "d8"), 0);
        assert!(parse_qrels(Cursor::new("q1 0 d7\n"), &label()).is_err());
        assert!(parse_qrels(Cursor::new("q1 0 d7 -1\n"), &label()).is_err());
    }

    #[test]
    fn run_round_trip_at_six_decimals() {
        let mut run = Run::new();
        run.insert(
            "q1",
            vec![
                ("d1".into(), 1.23456789),
                ("d2".into(), -0.5),
                ("d3".into(), -2.0000004),
            ],
        );
        run.insert("q2", vec![("x".into(), 0.0)]);
        let mut a = Vec::new();
        write_run(&mut a, &run, "t").unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("q1 Q0 d1 1 1.234568 t\nq1 Q0 d2 2 -0.500000 t\n"));
        let back = parse_run(Cursor::new(&a), &label()).unwrap();
        assert_eq!(back.get("q1").unwrap()[0], ("d1".to_string(), 1.234568));
        let mut b = Vec::new();
        write_run(&mut b, &back, "t").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn run_rejects_nonmonotonic_ranks() {
        let text = "q1 Q0 d1 1 2.0 t\nq1 Q0 d2 1 1.0 t\n";
        let err = parse_run(Cursor::new(text), &label()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_run(Cursor::new("q1 Q0 d1 1 x t\n"), &label()).is_err());
    }

    #[test]
    fn logit_grid_parses() {
        let mut v = Vocabulary::new();
        let m = parse_logits(
            Cursor::new("birds\tfly\n0.5\t-1\n2\t0\n"),
            &label(),
            &mut v,
            OnUnknown::Extend,
        )
        .unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.column(0).collect::<Vec<_>>(), [0.5, 2.0]);
        let err = parse_logits(
            Cursor::new("a\tb\n1\n"),
            &label(),
            &mut v,
            OnUnknown::Extend,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_logits(Cursor::new("a\n"), &label(), &mut v, OnUnknown::Extend).is_err());
    }

    #[test]
    fn query_records_resolve_refs_and_inline_vectors() {
        let text = r#"{"qid":"q1","operator":"difference","a":"qA","b":{"venezuela":1.0}}"#;
        let rec: QueryRecord = serde_json::from_str(text).unwrap();
        let mut v = Vocabulary::new();
        let a = SparseVector::from_pairs([("colombia", 1.0)], &mut v, OnUnknown::Extend).unwrap();
        let vecs: HashMap<_, _> = [("qA".to_string(), a)].into_iter().collect();
        let q = rec
            .resolve(&vecs, &mut v, OnUnknown::Extend, QueryDefaults::default())
            .unwrap();
        assert_eq!(q.method, Method::Disentangled);
        assert_eq!(q.b.as_ref().unwrap().nnz(), 1);

        let bad: QueryRecord =
            serde_json::from_str(r#"{"qid":"q2","operator":"union","a":"missing","b":"qA"}"#)
                .unwrap();
        assert!(bad
            .resolve(&vecs, &mut v, OnUnknown::Extend, QueryDefaults::default())
            .is_err());
    }
}
