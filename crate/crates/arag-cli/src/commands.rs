//! Subcommands: `run`, `filter`, `report`, `index`.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 backend failure,
//! 3 partial run written.

use crate::config::{self, BackendSpec, FileConfig, RetrieverSpec, RunSettings, ThresholdValue};
use anyhow::{anyhow, Context};
use arag_core::corpus::{self, DemoExample, DemoPool, Document, QuestionRecord, Source};
use arag_core::decision::{EmbeddingProvider, TfEmbedder};
use arag_core::modelio::{GenerationParams, ModelClient, RemoteClient, ResponseCache};
use arag_core::pipeline::{
    self, read_run_summary, report, FilterOutcome, JudgeContext, PipelineError, RunContext,
    RunOptions,
};
use arag_core::retrieval::{self, LexicalIndex, Retriever};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "arag",
    version,
    about = "Adaptive retrieval-augmented generation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a dataset under a retrieval-decision policy
    Run(Box<RunArgs>),
    /// Partition candidate questions with a closed-book judge
    Filter(FilterArgs),
    /// Render comparison tables and flow data from run artifacts
    Report(ReportArgs),
    /// Build a lexical index from a document corpus
    Index(IndexArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (TOML); flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file (JSONL of question records)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// always | never | threshold | vanilla | ta-are
    #[arg(long)]
    policy: Option<String>,
    /// Threshold in [0,1], or "none" to let the backend decide
    #[arg(long)]
    t: Option<String>,
    /// Backend: scripted:<script.jsonl> or remote:<model-id>
    #[arg(long)]
    model: Option<String>,
    /// Base URL for the remote backend (credential via ARAG_API_KEY)
    #[arg(long)]
    base_url: Option<String>,
    /// static | lexical:<index.json> (fallback when a record has no docs)
    #[arg(long)]
    retriever: Option<String>,
    /// Response cache file (JSONL, append-only)
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Bounded worker count
    #[arg(long)]
    workers: Option<usize>,
    /// Documents per retrieval
    #[arg(long)]
    k_docs: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Demonstration pool (JSONL), required for ta-are
    #[arg(long)]
    demo_pool: Option<PathBuf>,
    /// Date for the time-aware prompt, YYYY-MM-DD (defaults to today)
    #[arg(long)]
    date: Option<String>,
    #[arg(long)]
    k_yes: Option<usize>,
    #[arg(long)]
    k_no: Option<usize>,
    #[arg(long)]
    include_date: Option<bool>,
    /// Cap on total paragraph characters in answer prompts
    #[arg(long)]
    max_doc_chars: Option<usize>,
    /// Artifact timestamp override, for byte-reproducible artifacts
    #[arg(long)]
    timestamp: Option<String>,
    /// Artifact output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Candidate questions (JSONL)
    #[arg(long)]
    candidates: PathBuf,
    /// Judge backend: scripted:<file> or remote:<model-id>
    #[arg(long)]
    judge: String,
    /// Base URL for a remote judge
    #[arg(long)]
    base_url: Option<String>,
    /// Optional weak judge for the answerable partition of the discarded set
    #[arg(long)]
    weak_judge: Option<String>,
    /// Response cache file
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Output directory for kept/discarded/unjudged files and stats
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run artifact directories (or summary.json paths)
    #[arg(required = true)]
    artifacts: Vec<PathBuf>,
    /// Skip the per-run flow tables
    #[arg(long)]
    no_flow: bool,
}

#[derive(Args)]
struct IndexArgs {
    /// Document corpus (JSONL of documents)
    #[arg(long)]
    corpus: PathBuf,
    /// Output index file
    #[arg(long)]
    out: PathBuf,
}

/// An error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CmdResult = Result<(), Failure>;

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 1, error }
}

fn backend_failure(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; keep its output but use exit 1
            // for usage errors.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(*args),
        Command::Filter(args) => cmd_filter(args),
        Command::Report(args) => cmd_report(args),
        Command::Index(args) => cmd_index(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn merge_run_config(args: &RunArgs) -> Result<FileConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => FileConfig::load(path).map_err(|e| usage(anyhow!(e)))?,
        None => FileConfig::default(),
    };
    let t = match &args.t {
        None => None,
        Some(word) if word.eq_ignore_ascii_case("none") => {
            Some(ThresholdValue::Word("none".into()))
        }
        Some(number) => match number.parse::<f64>() {
            Ok(value) => Some(ThresholdValue::Number(value)),
            Err(_) => Some(ThresholdValue::Word(number.clone())),
        },
    };
    macro_rules! overlay {
        ($($field:ident),* $(,)?) => {
            $(if args.$field.is_some() { config.$field = args.$field.clone(); })*
        };
    }
    overlay!(
        dataset,
        policy,
        model,
        base_url,
        retriever,
        cache,
        workers,
        k_docs,
        temperature,
        top_p,
        max_tokens,
        demo_pool,
        date,
        k_yes,
        k_no,
        include_date,
        max_doc_chars,
        timestamp,
        out,
    );
    if t.is_some() {
        config.t = t;
    }
    Ok(config)
}

fn build_client(backend: &BackendSpec) -> Result<Box<dyn ModelClient>, Failure> {
    match backend {
        BackendSpec::Scripted { path } => {
            let client = config::load_script(path).map_err(|e| usage(anyhow!(e)))?;
            Ok(Box::new(client))
        }
        BackendSpec::Remote { base_url, .. } => Ok(Box::new(RemoteClient::new(base_url))),
    }
}

fn read_demo_examples(path: &Path) -> anyhow::Result<Vec<DemoExample>> {
    let content = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read demo pool {}", path.display()))?;
    let mut examples = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let example: DemoExample = serde_json::from_str(line)
            .with_context(|| format!("demo pool {} line {}", path.display(), idx + 1))?;
        examples.push(example);
    }
    Ok(examples)
}

fn load_pool_with_embedder(path: &Path) -> anyhow::Result<(DemoPool, TfEmbedder)> {
    let raw = read_demo_examples(path)?;
    let embedder = TfEmbedder::from_texts(raw.iter().map(|e| e.question.as_str()));
    let pool = corpus::load_demo_pool(path, &embedder)?;
    Ok((pool, embedder))
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let merged = merge_run_config(&args)?;
    let settings: RunSettings = config::resolve_run(&merged).map_err(|e| usage(anyhow!(e)))?;

    let dataset = corpus::load_dataset(&settings.dataset)
        .with_context(|| format!("loading dataset {}", settings.dataset.display()))
        .map_err(usage)?;

    let client = build_client(&settings.backend)?;
    if matches!(
        settings.policy,
        arag_core::decision::DecisionPolicy::Threshold { t: Some(_) }
    ) && !client.supports_retrieval_score()
    {
        return Err(backend_failure(anyhow!(
            "the threshold policy requires a retrieval-score-capable backend; {} reports none",
            settings.backend.model_id()
        )));
    }
    let cache = match &settings.cache {
        Some(path) => Some(ResponseCache::open(path).map_err(|e| usage(anyhow!(e)))?),
        None => None,
    };
    let fallback: Option<Box<dyn Retriever>> = match &settings.retriever {
        RetrieverSpec::Static => None,
        RetrieverSpec::Lexical(path) => Some(Box::new(
            LexicalIndex::load(path).map_err(|e| usage(anyhow!(e)))?,
        )),
    };
    let pool_and_embedder = match &settings.demo_pool {
        Some(path) => Some(load_pool_with_embedder(path).map_err(usage)?),
        None => None,
    };

    let ctx = RunContext {
        client: client.as_ref(),
        cache: cache.as_ref(),
        model_id: settings.backend.model_id(),
        params: settings.params,
        pool: pool_and_embedder.as_ref().map(|(pool, _)| pool),
        embedder: pool_and_embedder
            .as_ref()
            .map(|(_, embedder)| embedder as &dyn EmbeddingProvider),
        fallback_retriever: fallback.as_deref(),
        options: RunOptions {
            k_docs: settings.k_docs,
            workers: settings.workers,
            max_doc_chars: settings.max_doc_chars,
            timestamp: settings.timestamp.clone(),
        },
    };

    match pipeline::run_evaluation(&dataset, &settings.policy, &ctx) {
        Ok(result) => {
            pipeline::write_run_artifact(&result, &settings.out, Some(settings.echo()))
                .map_err(|e| backend_failure(anyhow!(e)))?;
            let summary = result.summary(None);
            print!("{}", report::render_run_table(&summary));
            println!("artifact: {}", settings.out.display());
            Ok(())
        }
        Err(PipelineError::Aborted {
            question_id,
            cause,
            completed,
            partial,
        }) => {
            pipeline::write_partial_artifact(&partial, &question_id, &cause, &settings.out)
                .map_err(|e| backend_failure(anyhow!(e)))?;
            Err(Failure {
                code: 3,
                error: anyhow!(
                    "run aborted at {question_id:?} after {completed} records: {cause} \
                     (partial artifact written to {})",
                    settings.out.display()
                ),
            })
        }
        Err(e) => Err(backend_failure(anyhow!(e))),
    }
}

#[derive(Serialize)]
struct SourceStats {
    category: String,
    source: String,
    original: usize,
    kept: usize,
    avg_question_tokens: f64,
    avg_answer_tokens: f64,
    avg_doc_tokens: Option<f64>,
}

fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

fn mean(values: &[usize]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<usize>() as f64 / values.len() as f64
    }
}

fn source_name(source: Source) -> &'static str {
    match source {
        Source::Realtimeqa => "realtimeqa",
        Source::Freshqa => "freshqa",
        Source::Toolqa => "toolqa",
        Source::Popqa => "popqa",
        Source::Triviaqa => "triviaqa",
        Source::Custom => "custom",
    }
}

/// Per-source counts and token averages for the kept set, in the layout of
/// the dataset-statistics table (token counts are whitespace-based).
fn filter_stats(candidates: &[QuestionRecord], outcome: &FilterOutcome) -> Vec<SourceStats> {
    let sources = [
        Source::Realtimeqa,
        Source::Freshqa,
        Source::Toolqa,
        Source::Popqa,
        Source::Triviaqa,
        Source::Custom,
    ];
    sources
        .iter()
        .filter_map(|&source| {
            let original = candidates.iter().filter(|r| r.source == source).count();
            if original == 0 {
                return None;
            }
            let kept: Vec<&QuestionRecord> = outcome
                .kept
                .iter()
                .filter(|r| r.source == source)
                .collect();
            let question_tokens: Vec<usize> = kept
                .iter()
                .map(|r| whitespace_tokens(&r.question))
                .collect();
            let answer_tokens: Vec<usize> = kept
                .iter()
                .map(|r| whitespace_tokens(&r.gold_answers[0]))
                .collect();
            let doc_tokens: Vec<usize> = kept
                .iter()
                .filter_map(|r| r.documents.as_ref())
                .map(|docs| docs.iter().map(|d| whitespace_tokens(&d.text)).sum())
                .collect();
            let category = kept
                .first()
                .map(|r| r.category)
                .or_else(|| {
                    candidates
                        .iter()
                        .find(|r| r.source == source)
                        .map(|r| r.category)
                })
                .expect("source has records");
            Some(SourceStats {
                category: match category {
                    corpus::Category::NewWorld => "new_world".into(),
                    corpus::Category::LongTail => "long_tail".into(),
                },
                source: source_name(source).into(),
                original,
                kept: kept.len(),
                avg_question_tokens: mean(&question_tokens),
                avg_answer_tokens: mean(&answer_tokens),
                avg_doc_tokens: if doc_tokens.is_empty() {
                    None
                } else {
                    Some(mean(&doc_tokens))
                },
            })
        })
        .collect()
}

fn render_stats_table(stats: &[SourceStats]) -> String {
    let mut out = format!(
        "{:<12}  {:<12}  {:>9}  {:>6}  {:>12}  {:>14}  {:>14}\n",
        "category", "source", "original", "kept", "avg_q_tokens", "avg_ans_tokens", "avg_doc_tokens"
    );
    for s in stats {
        out.push_str(&format!(
            "{:<12}  {:<12}  {:>9}  {:>6}  {:>12.1}  {:>14.1}  {:>14}\n",
            s.category,
            s.source,
            s.original,
            s.kept,
            s.avg_question_tokens,
            s.avg_answer_tokens,
            s.avg_doc_tokens
                .map(|v| format!("{v:.1}"))
                .unwrap_or_else(|| "-".into()),
        ));
    }
    out
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn judge_context<'a>(
    client: &'a dyn ModelClient,
    cache: Option<&'a ResponseCache>,
    model_id: String,
) -> JudgeContext<'a> {
    JudgeContext {
        client,
        cache,
        model_id,
        params: GenerationParams::default(),
    }
}

fn parse_backend_spec(spec: &str, base_url: Option<&str>) -> Result<BackendSpec, Failure> {
    let mut violations = Vec::new();
    match config::parse_model_spec(spec, base_url, &mut violations) {
        Some(backend) => Ok(backend),
        None => Err(usage(anyhow!(config::ConfigError { violations }))),
    }
}

fn cmd_filter(args: FilterArgs) -> CmdResult {
    let candidates = corpus::load_dataset(&args.candidates)
        .with_context(|| format!("loading candidates {}", args.candidates.display()))
        .map_err(usage)?;

    let backend = parse_backend_spec(&args.judge, args.base_url.as_deref())?;
    let judge_client = build_client(&backend)?;
    let cache = match &args.cache {
        Some(path) => Some(ResponseCache::open(path).map_err(|e| usage(anyhow!(e)))?),
        None => None,
    };
    let judge = judge_context(judge_client.as_ref(), cache.as_ref(), backend.model_id());

    let outcome = pipeline::filter_needs_retrieval(&candidates, &judge);

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .map_err(usage)?;
    let kept: Vec<QuestionRecord> = outcome
        .kept
        .iter()
        .cloned()
        .map(|mut r| {
            r.needs_retrieval = true;
            r
        })
        .collect();
    corpus::write_dataset(args.out_dir.join("kept.jsonl"), &kept)
        .map_err(|e| usage(anyhow!(e)))?;
    write_jsonl(&args.out_dir.join("discarded.jsonl"), &outcome.discarded).map_err(usage)?;
    write_jsonl(&args.out_dir.join("unjudged.jsonl"), &outcome.unjudged).map_err(usage)?;

    let stats = filter_stats(&candidates, &outcome);
    let table = render_stats_table(&stats);
    std::fs::write(args.out_dir.join("stats.txt"), &table)
        .context("writing stats.txt")
        .map_err(usage)?;
    std::fs::write(
        args.out_dir.join("stats.json"),
        serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n",
    )
    .context("writing stats.json")
    .map_err(usage)?;

    if let Some(weak_spec) = &args.weak_judge {
        let weak_backend = parse_backend_spec(weak_spec, args.base_url.as_deref())?;
        let weak_client = build_client(&weak_backend)?;
        let weak = judge_context(weak_client.as_ref(), cache.as_ref(), weak_backend.model_id());
        let discarded_records: Vec<QuestionRecord> =
            outcome.discarded.iter().map(|d| d.record.clone()).collect();
        let partition = pipeline::partition_answerable(&discarded_records, &weak);
        corpus::write_dataset(
            args.out_dir.join("answerable.jsonl"),
            &partition.answerable,
        )
        .map_err(|e| usage(anyhow!(e)))?;
        write_jsonl(
            &args.out_dir.join("answerable_unjudged.jsonl"),
            &partition.unjudged,
        )
        .map_err(usage)?;
        println!(
            "kept {} / discarded {} / unjudged {} / answerable {}",
            kept.len(),
            outcome.discarded.len(),
            outcome.unjudged.len(),
            partition.answerable.len()
        );
    } else {
        println!(
            "kept {} / discarded {} / unjudged {}",
            kept.len(),
            outcome.discarded.len(),
            outcome.unjudged.len()
        );
    }
    print!("{table}");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CmdResult {
    let mut summaries = Vec::new();
    for path in &args.artifacts {
        let summary = read_run_summary(path)
            .with_context(|| format!("reading artifact {}", path.display()))
            .map_err(usage)?;
        summaries.push(summary);
    }
    print!("{}", report::render_comparison(&summaries));
    if !args.no_flow {
        for summary in &summaries {
            println!();
            println!("# flow: {} {}", summary.policy.label(), summary.model_id);
            print!("{}", report::render_flow_csv(&summary.flow));
        }
    }
    Ok(())
}

fn cmd_index(args: IndexArgs) -> CmdResult {
    let content = std::fs::read_to_string(&args.corpus)
        .with_context(|| format!("reading corpus {}", args.corpus.display()))
        .map_err(usage)?;
    let mut documents = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line)
            .with_context(|| format!("corpus {} line {}", args.corpus.display(), idx + 1))
            .map_err(usage)?;
        documents.push(doc);
    }
    let index = retrieval::build_index(&documents).map_err(|e| usage(anyhow!(e)))?;
    index.save(&args.out).map_err(|e| usage(anyhow!(e)))?;
    println!(
        "indexed {} documents, {} terms -> {}",
        index.len(),
        index.vocabulary_size(),
        args.out.display()
    );
    Ok(())
}
