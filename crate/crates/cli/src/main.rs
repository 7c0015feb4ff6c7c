//! `setsparse` command-line pipeline. Every stage reads and writes plain
//! files; see `setsparse <command> --help` for formats.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use setsparse::activations::{self, ActivationConfig, Aggregation, NegFormula};
use setsparse::compose::{self, CompositionParams, DEFAULT_LAMBDA};
use setsparse::cpt::DEFAULT_TOP_M;
use setsparse::eval::{self, EvalReport, Metric};
use setsparse::fusion::{self, FuseOp, ScoredRun};
use setsparse::index::PairIndex;
use setsparse::io::{self as sio, QueryDefaults};
use setsparse::lexical::{self, Bm25Params};
use setsparse::{
    ComposedQuery, Error, ErrorKind, Execution, InvertedIndex, Method, OnUnknown, Vocabulary,
};

const FORMATS: &str = "\
File formats (UTF-8, one record per line):
  vectors   {\"id\": \"d0\", \"vector\": {\"term\": 1.5, ...}}
  texts     {\"id\": \"d0\", \"text\": \"raw text\"}
  queries   {\"qid\": \"q1\", \"operator\": \"difference|union|intersection|atomic\",
             \"method\": \"...\", \"a\": \"vector id\" | {inline}, \"b\": ..., \"params\": {\"lambda\": 0.5, \"m\": 5}}
  composed  vector records, or {\"id\": \"q1\", \"cpt\": {\"m\": 5, \"a\": {...}, \"b\": {...}, \"pseudo_terms\": {...}}}
  pairs     {\"query_a\": \"q1\", \"doc_a\": \"d1\", \"query_b\": \"q2\", \"doc_b\": \"d2\"}
  logits    tab-separated, first row terms, one row per input position
  qrels     qid 0 docid grade
  run       qid Q0 docid rank score tag

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Log verbosity: RUST_LOG=warn|info|debug.";

#[derive(Parser, Debug)]
#[command(name = "setsparse", version, about = "Set-compositional queries over learned sparse vectors", after_help = FORMATS)]
struct Cli {
    /// Worker threads; defaults to the available parallelism. Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run every batch on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode text records into TF (queries) or BM25 (documents) vectors.
    Encode(EncodeArgs),
    /// Turn logit grids into sparse vectors with Splade or SNReLU pooling.
    Activate(ActivateArgs),
    /// Build and save an inverted index over document vectors.
    Index(IndexArgs),
    /// Compose set-operator queries into query vectors.
    Compose(ComposeArgs),
    /// Retrieve top-k documents for plain or composed query vectors.
    Search(SearchArgs),
    /// Fuse two runs score by score.
    Fuse(FuseArgs),
    /// Compute NDCG@k / Recall@k for a run.
    Eval(EvalArgs),
    /// Pairwise accuracy of run scores over counterfactual query pairs.
    Pairwise(PairwiseArgs),
    /// Mean metric per bin of positive/negative query similarity.
    AnalyzeInterference(InterferenceArgs),
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// Text JSONL.
    #[arg(long)]
    input: PathBuf,
    /// Output vector JSONL (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw term frequencies.
    #[arg(long, conflicts_with = "bm25", required_unless_present = "bm25")]
    tf: bool,
    /// BM25 weights using statistics of the input corpus.
    #[arg(long)]
    bm25: bool,
    #[arg(long, default_value_t = 0.9)]
    k1: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    /// Drop common English stopwords.
    #[arg(long)]
    stopwords: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ActivationKind {
    Splade,
    Snrelu,
}

#[derive(Args, Debug)]
struct ActivateArgs {
    /// Logit grids; each file becomes one vector whose id is the file stem.
    #[arg(long, required = true, num_args = 1..)]
    logits: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "splade")]
    activation: ActivationKind,
    /// Dead-zone half width.
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Negative branch: `corrected` (odd function) or `literal`.
    #[arg(long, default_value = "corrected")]
    neg_formula: NegFormula,
    /// SNReLU pooling: `absmax` or `sum`.
    #[arg(long, default_value = "absmax")]
    aggregation: Aggregation,
}

#[derive(Args, Debug)]
struct IndexArgs {
    /// Document vector JSONL.
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    /// Compositional query JSONL.
    #[arg(long)]
    queries: PathBuf,
    /// Vector JSONL that query references point into.
    #[arg(long)]
    vectors: PathBuf,
    /// Overrides every record's method: subtract, ignore, disentangled,
    /// orthogonal, nrf, add, maxpool, cpt. Without it, records choose and
    /// fall back to disentangled / maxpool / cpt.
    #[arg(long)]
    method: Option<Method>,
    /// NRF penalty weight, used when a record has none.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// CPT per-side truncation, used when a record has none.
    #[arg(long, default_value_t = DEFAULT_TOP_M)]
    m: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CptMode {
    /// Maxpool candidates rescored with the CPT score.
    TwoStage,
    /// Exhaustive scoring through a pair index. Quadratic memory.
    Full,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    /// Vector or composed JSONL. Terms missing from the index are ignored.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Candidates rescored per CPT query in two-stage mode.
    #[arg(long, default_value_t = 1000)]
    candidate_pool: usize,
    #[arg(long, value_enum, default_value = "two-stage")]
    cpt_mode: CptMode,
    /// Score every document, including those sharing no term with the query.
    #[arg(long)]
    full_corpus: bool,
    #[arg(long, default_value = "setsparse")]
    tag: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    /// plus (union), times (intersection) or minus (difference).
    #[arg(long)]
    op: FuseOp,
    /// Min-max scale each run per query before combining.
    #[arg(long)]
    scaled: bool,
    /// Keep the top k fused documents per query (all if omitted).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "fused")]
    tag: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Comma-separated list such as ndcg@10,recall@100 (no default cutoff).
    #[arg(long)]
    metrics: String,
    /// JSON report; the table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PairwiseArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// Run whose scores are looked up per (query, document).
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Args, Debug)]
struct InterferenceArgs {
    /// Difference-query JSONL.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    vectors: PathBuf,
    /// JSON report written by `eval --out`.
    #[arg(long)]
    per_query_metrics: PathBuf,
    /// Metric column to average; required if the report has several.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn encode(args: EncodeArgs, exec: Execution) -> Result<(), Error> {
    let records = sio::read_texts(&args.input)?;
    let mut seen = HashSet::new();
    if let Some(r) = records.iter().find(|r| !seen.insert(r.id.as_str())) {
        return Err(Error::DuplicateId(r.id.clone()));
    }
    let tokens: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let t = lexical::tokenize(&r.text);
            if args.stopwords {
                lexical::remove_stopwords(t)
            } else {
                t
            }
        })
        .collect();
    let mut vocab = Vocabulary::new();
    let vectors = if args.bm25 {
        lexical::encode_bm25_corpus(
            &tokens,
            &mut vocab,
            Bm25Params {
                k1: args.k1,
                b: args.b,
            },
            exec,
        )?
        .1
    } else {
        tokens
            .iter()
            .map(|t| lexical::encode_tf(t, &mut vocab, OnUnknown::Extend))
            .collect::<Result<_, _>>()?
    };
    let mut out = output(args.out.as_deref())?;
    sio::write_vectors(
        &mut out,
        records.iter().map(|r| r.id.as_str()).zip(&vectors),
        &vocab,
    )?;
    out.flush()?;
    Ok(())
}

fn activate(args: ActivateArgs, exec: Execution) -> Result<(), Error> {
    let aggregation = match args.activation {
        ActivationKind::Splade => Aggregation::SpladeMax,
        ActivationKind::Snrelu if args.aggregation == Aggregation::SpladeMax => {
            return Err(Error::InvalidArgument(
                "snrelu needs --aggregation absmax or sum".into(),
            ))
        }
        ActivationKind::Snrelu => args.aggregation,
    };
    let cfg = ActivationConfig {
        epsilon: args.epsilon,
        neg_formula: args.neg_formula,
        aggregation,
    };
    cfg.validate()?;
    let mut vocab = Vocabulary::new();
    let mut ids = HashSet::new();
    let mut rows = Vec::new();
    for path in &args.logits {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let m = sio::read_logits(path, &mut vocab, OnUnknown::Extend)?;
        rows.push((id, activations::activate(&m, &cfg, exec)?));
    }
    let mut out = output(args.out.as_deref())?;
    sio::write_vectors(
        &mut out,
        rows.iter().map(|(id, v)| (id.as_str(), v)),
        &vocab,
    )?;
    out.flush()?;
    Ok(())
}

fn index(args: IndexArgs) -> Result<(), Error> {
    let mut vocab = Vocabulary::new();
    let docs = sio::read_vectors(&args.vectors, &mut vocab, OnUnknown::Extend)?;
    let n = docs.len();
    let idx = InvertedIndex::build(vocab, docs)?;
    idx.save(&args.out)?;
    log::info!("indexed {n} documents over {} terms", idx.vocab().len());
    Ok(())
}

fn compose_cmd(args: ComposeArgs, exec: Execution) -> Result<(), Error> {
    let defaults = QueryDefaults {
        method: args.method,
        params: CompositionParams {
            lambda: args.lambda,
            m: args.m,
        },
    };
    let mut vocab = Vocabulary::new();
    let queries = sio::read_queries(&args.queries, &args.vectors, &mut vocab, defaults)?;
    let composed = compose::compose_batch(&queries, exec)?;
    let mut out = output(args.out.as_deref())?;
    for (q, c) in queries.iter().zip(&composed) {
        sio::write_composed(&mut out, &q.qid, c, &vocab)?;
    }
    out.flush()?;
    Ok(())
}

fn search(args: SearchArgs, exec: Execution) -> Result<(), Error> {
    if args.k == 0 {
        return Err(Error::InvalidArgument("--k must be at least 1".into()));
    }
    let idx = InvertedIndex::load(&args.index)?;
    let queries = sio::read_composed(&args.queries, idx.vocab(), OnUnknown::Skip)?;
    let pairs = match args.cpt_mode {
        CptMode::Full
            if queries
                .iter()
                .any(|(_, q)| matches!(q, ComposedQuery::Cpt(_))) =>
        {
            Some(PairIndex::build(&idx)?)
        }
        _ => None,
    };
    let results = exec.try_map(&queries, |(_, q)| match (q, &pairs) {
        (ComposedQuery::Sparse(v), _) if args.full_corpus => idx.search_full_corpus(v, args.k),
        (ComposedQuery::Cpt(c), Some(p)) => p.search(&c.expand(), args.k),
        _ => idx.search_composed(q, args.k, args.candidate_pool),
    })?;
    let mut out = output(args.out.as_deref())?;
    for ((qid, _), r) in queries.iter().zip(&results) {
        sio::write_ranking(&mut out, qid, &r.to_ranking(), &args.tag)?;
    }
    out.flush()?;
    Ok(())
}

fn fuse(args: FuseArgs) -> Result<(), Error> {
    let a = sio::read_run(&args.run_a)?;
    let b = sio::read_run(&args.run_b)?;
    let mut qids: Vec<&str> = a.iter().map(|(q, _)| q).collect();
    qids.extend(b.iter().map(|(q, _)| q).filter(|q| a.get(q).is_none()));
    qids.sort_unstable();
    let mut out = output(args.out.as_deref())?;
    for q in qids {
        let side = |run: &eval::Run| {
            ScoredRun::from_pairs(q, run.get(q).unwrap_or_default().iter().cloned())
        };
        let mut ranked = fusion::fuse(&side(&a)?, &side(&b)?, args.op, args.scaled).ranked();
        if let Some(k) = args.k {
            ranked.truncate(k);
        }
        sio::write_ranking(&mut out, q, &ranked, &args.tag)?;
    }
    out.flush()?;
    Ok(())
}

fn eval_cmd(args: EvalArgs, exec: Execution) -> Result<(), Error> {
    let metrics = Metric::parse_list(&args.metrics)?;
    let run = sio::read_run(&args.run)?;
    let qrels = sio::read_qrels(&args.qrels)?;
    let report = eval::evaluate(&run, &qrels, &metrics, exec)?;
    let mut stdout = io::stdout().lock();
    stdout.write_all(report.to_table().as_bytes())?;
    if let Some(path) = &args.out {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &report).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

fn pairwise(args: PairwiseArgs) -> Result<(), Error> {
    let pairs = sio::read_pairs(&args.pairs)?;
    let run = sio::read_run(&args.scores)?;
    let scores: HashMap<(&str, &str), f64> = run
        .iter()
        .flat_map(|(q, list)| list.iter().map(move |(d, s)| ((q, d.as_str()), *s)))
        .collect();
    let acc = eval::pairwise_accuracy(&pairs, |q, d| {
        scores
            .get(&(q, d))
            .copied()
            .ok_or_else(|| Error::InvalidQuery {
                qid: q.to_owned(),
                reason: format!("run has no score for document {d:?}"),
            })
    })?;
    println!("pairwise_accuracy\t{acc:.4}\tpairs\t{}", pairs.len());
    Ok(())
}

fn interference(args: InterferenceArgs) -> Result<(), Error> {
    let mut vocab = Vocabulary::new();
    let queries = sio::read_queries(
        &args.queries,
        &args.vectors,
        &mut vocab,
        QueryDefaults::default(),
    )?;
    let text = std::fs::read_to_string(&args.per_query_metrics)?;
    let report: EvalReport = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&args.per_query_metrics, e.line(), e.to_string()))?;
    let metric = match (&args.metric, report.metrics.as_slice()) {
        (Some(m), _) => m.clone(),
        (None, [only]) => only.clone(),
        (None, _) => {
            return Err(Error::InvalidArgument(
                "report has several metrics; pick one with --metric".into(),
            ))
        }
    };
    let bins = eval::interference_bins(&queries, &report.column(&metric)?, args.bins)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "bin\tcos_lo\tcos_hi\tcount\tmean_{metric}")?;
    for (i, b) in bins.iter().enumerate() {
        writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{}\t{:.4}",
            i + 1,
            b.lo,
            b.hi,
            b.count,
            b.mean_metric
        )?;
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "--threads must be at least 1".into(),
            ));
        }
        setsparse::configure_threads(n);
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Encode(a) => encode(a, exec),
        Command::Activate(a) => activate(a, exec),
        Command::Index(a) => index(a),
        Command::Compose(a) => compose_cmd(a, exec),
        Command::Search(a) => search(a, exec),
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval_cmd(a, exec),
        Command::Pairwise(a) => pairwise(a),
        Command::AnalyzeInterference(a) => interference(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Internal => 3,
            })
        }
    }
}
