//! Command-line front end. Exit codes: 0 success, 1 data or runtime failure, 2 usage.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cot;
use crate::eval::{self, EvalOptions};
use crate::exemplar::{ExemplarPool, SelectionConfig};
use crate::llm::{CacheMode, ChatBackend, Gateway, GenerationParams, HttpBackend, ReplayCache, DEFAULT_MODEL, ENV_API_BASE, ENV_API_KEY};
use crate::pipeline::{DbRootRows, Mode, NoRows, Pipeline, PipelineConfig, RewriteError, RewriteResources, RowsProvider};
use crate::schema::{database_path, load_examples, load_interactions, load_schema_catalog, sample_all, Example, SchemaCatalog};
use crate::similarity::{EmbeddingSimilarity, LexicalSimilarity, SimilarityProvider};
use crate::style::{render_schema, DbStyle};

pub const DEFAULT_EMBED_MODEL: &str = "text-embedding-3-small";

#[derive(Parser, Debug)]
#[command(name = "actsql", version, about = "Text-to-SQL prompting with automatic chain-of-thought exemplars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the schema prompt for one database.
    Render(RenderArgs),
    /// Generate chain-of-thought annotations for a training file.
    Annotate(AnnotateArgs),
    /// Predict SQL for a test file.
    Predict(PredictArgs),
    /// Score predictions against gold SQL.
    Eval(EvalArgs),
    /// Rewrite multi-turn interactions into single-turn questions.
    Rewrite(RewriteArgs),
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    db_root: Option<PathBuf>,
    #[arg(long)]
    db_id: String,
    #[arg(long, default_value = "create-eot")]
    style: DbStyle,
    #[arg(long, default_value_t = 3)]
    rows: usize,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    train: PathBuf,
    /// Output file, one JSON record per annotated example.
    #[arg(long)]
    out: PathBuf,
    /// `lexical` or `embedding:<url>`.
    #[arg(long, default_value = "lexical")]
    sim: String,
    #[arg(long, default_value = DEFAULT_EMBED_MODEL)]
    embed_model: String,
    #[arg(long, default_value_t = cot::DEFAULT_MAX_LEN)]
    max_len: usize,
}

#[derive(Args, Debug)]
struct GatewayArgs {
    /// Replay cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// live, record or replay-strict; defaults to record with --cache and live without.
    #[arg(long)]
    cache_mode: Option<CacheMode>,
    #[arg(long, default_value = DEFAULT_MODEL)]
    model: String,
    /// Overrides ACTSQL_API_BASE.
    #[arg(long)]
    api_base: Option<String>,
    /// Base delay of the retry backoff, in seconds.
    #[arg(long, default_value_t = 1.0)]
    retry_base_secs: f64,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long, default_value = "act-sql")]
    mode: Mode,
    #[arg(long, default_value = "create-eot")]
    style: DbStyle,
    #[arg(long, default_value_t = 3)]
    rows: usize,
    #[arg(long)]
    ns: Option<usize>,
    #[arg(long)]
    nd: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    db_root: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    gateway: GatewayArgs,
    #[arg(long, default_value = "lexical")]
    sim: String,
    #[arg(long, default_value = DEFAULT_EMBED_MODEL)]
    embed_model: String,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Output directory for predictions.jsonl, predictions.sql and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// NDJSON predictions or plain text with one SQL per line.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    db_root: Option<PathBuf>,
    #[arg(long)]
    variants_root: Option<PathBuf>,
    /// Gold file holds multi-turn interactions; adds QM and IM.
    #[arg(long)]
    multiturn: bool,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    timeout_secs: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct RewriteArgs {
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    interactions: PathBuf,
    /// `sparc`, `cosql`, or a JSON file of {original, rewritten} pairs.
    #[arg(long)]
    exemplars: String,
    /// File replacing the bundled rewriting instruction.
    #[arg(long)]
    instruction: Option<PathBuf>,
    #[command(flatten)]
    gateway: GatewayArgs,
    #[arg(long, default_value_t = GenerationParams::COT_MAX_TOKENS)]
    max_tokens: u32,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Render(a) => cmd_render(a),
        Command::Annotate(a) => cmd_annotate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Rewrite(a) => cmd_rewrite(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn load_catalog(path: &Path) -> anyhow::Result<SchemaCatalog> {
    load_schema_catalog(path).with_context(|| format!("loading {}", path.display()))
}

fn similarity(choice: &str, embed_model: &str) -> Result<Box<dyn SimilarityProvider>, Failure> {
    if choice == "lexical" {
        return Ok(Box::new(LexicalSimilarity));
    }
    match choice.strip_prefix("embedding:") {
        Some(url) if !url.is_empty() => {
            let p = EmbeddingSimilarity::new(url, embed_model, std::env::var(ENV_API_KEY).ok()).map_err(|e| anyhow!(e))?;
            Ok(Box::new(p))
        }
        _ => Err(Failure::Usage(format!("--sim must be `lexical` or `embedding:<url>`, got {choice:?}"))),
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_render(a: RenderArgs) -> CmdResult {
    let catalog = load_catalog(&a.tables)?;
    let schema = catalog.get(&a.db_id).ok_or_else(|| anyhow!("database {:?} not in {}", a.db_id, a.tables.display()))?;
    let rows = if a.rows == 0 {
        None
    } else {
        let root = a.db_root.as_ref().ok_or_else(|| Failure::Usage("--rows > 0 needs --db-root".into()))?;
        Some(sample_all(&database_path(root, &a.db_id), schema, a.rows).map_err(|e| anyhow!(e))?)
    };
    let prompt = render_schema(schema, a.style, rows.as_ref()).map_err(|e| anyhow!(e))?;
    let mut out = std::io::stdout().lock();
    out.write_all(prompt.text.as_bytes()).and_then(|_| out.flush()).map_err(|e| anyhow!(e))?;
    Ok(())
}

fn cmd_annotate(a: AnnotateArgs) -> CmdResult {
    let sim = similarity(&a.sim, &a.embed_model)?;
    let catalog = load_catalog(&a.tables)?;
    let train = load_examples(&a.train, &catalog).map_err(|e| anyhow!(e))?;
    let mut lines = Vec::new();
    let mut skipped = 0;
    for ex in &train {
        let schema = catalog.get(&ex.db_id).expect("loader checks db ids");
        match cot::annotate_with(ex, schema, sim.as_ref(), a.max_len) {
            Ok(ann) => {
                let rec = serde_json::json!({
                    "source_id": ex.source_id,
                    "db_id": ex.db_id,
                    "question": ex.question,
                    "query": ex.gold_sql,
                    "links": ann.links,
                    "values": ann.values,
                    "cot": ann.text,
                });
                lines.push(rec.to_string());
            }
            Err(cot::CotError::Similarity(e)) => return Err(Failure::Data(anyhow!(e))),
            Err(e) => {
                skipped += 1;
                eprintln!("skip {}: {e}", ex.source_id);
            }
        }
    }
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    write_file(&a.out, &body)?;
    eprintln!("annotated {} of {} examples, skipped {}", lines.len(), train.len(), skipped);
    if lines.is_empty() {
        return Err(Failure::Data(anyhow!("no example could be annotated")));
    }
    Ok(())
}

fn build_gateway(g: &GatewayArgs, jobs: usize) -> Result<Gateway, Failure> {
    let mode = g.cache_mode.unwrap_or(if g.cache.is_some() { CacheMode::Record } else { CacheMode::Live });
    if mode != CacheMode::Live && g.cache.is_none() {
        return Err(Failure::Usage(format!("--cache-mode {mode} needs --cache")));
    }
    if !(g.retry_base_secs >= 0.0 && g.retry_base_secs.is_finite()) {
        return Err(Failure::Usage("--retry-base-secs must be a non-negative number".into()));
    }
    let cache = match (&g.cache, mode) {
        (Some(p), m) if m != CacheMode::Live => Some(ReplayCache::open(p).map_err(|e| anyhow!(e))?),
        _ => None,
    };
    let backend: Option<Arc<dyn ChatBackend>> = if mode == CacheMode::ReplayStrict {
        None
    } else {
        let base = match &g.api_base {
            Some(b) => b.clone(),
            None => std::env::var(ENV_API_BASE).map_err(|_| anyhow!("{ENV_API_BASE} is not set (or pass --api-base)"))?,
        };
        let http = HttpBackend::new(&base, std::env::var(ENV_API_KEY).ok(), Duration::from_secs(120)).map_err(|e| anyhow!(e))?;
        Some(Arc::new(http))
    };
    let retry = crate::llm::RetryPolicy { base: Duration::from_secs_f64(g.retry_base_secs), ..Default::default() };
    Ok(Gateway::new(mode, backend, cache, jobs).map_err(|e| anyhow!(e))?.with_retry(retry))
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'a str,
    config: &'a PipelineConfig,
    cache_mode: CacheMode,
    cache: Option<&'a Path>,
    similarity: String,
    tables: &'a Path,
    db_root: Option<&'a Path>,
    train: Option<&'a Path>,
    test: &'a Path,
    pool_size: usize,
    pool_sha256: String,
}

/// Hex SHA-256 over the pool's records in order.
pub fn pool_hash(pool: &[Example]) -> String {
    let mut h = Sha256::new();
    for ex in pool {
        h.update(ex.to_record().to_string().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let mut config = PipelineConfig::for_mode(a.mode);
    config.style = a.style;
    config.content_rows = a.rows;
    config.selection.seed = a.seed;
    if a.mode == Mode::ZeroShot {
        if a.ns.is_some_and(|n| n > 0) || a.nd.is_some_and(|n| n > 0) {
            eprintln!("warning: zero-shot mode ignores --ns/--nd");
        }
    } else {
        config.selection =
            SelectionConfig { n_s: a.ns.unwrap_or(config.selection.n_s), n_d: a.nd.unwrap_or(config.selection.n_d), seed: a.seed };
    }
    config.params.model = a.gateway.model.clone();
    if let Some(t) = a.temperature {
        config.params.temperature = t;
    }
    if let Some(m) = a.max_tokens {
        config.params.max_tokens = m;
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if config.exemplar_count() > 0 && a.train.is_none() {
        return Err(Failure::Usage(format!("{} mode needs --train", a.mode)));
    }
    if a.rows > 0 && a.db_root.is_none() {
        return Err(Failure::Usage("--rows > 0 needs --db-root".into()));
    }
    let sim = similarity(&a.sim, &a.embed_model)?;
    let catalog = load_catalog(&a.tables)?;
    let test = load_examples(&a.test, &catalog).map_err(|e| anyhow!(e))?;
    let train = match &a.train {
        Some(p) => load_examples(p, &catalog).map_err(|e| anyhow!(e))?,
        None => Vec::new(),
    };
    let gateway = build_gateway(&a.gateway, a.jobs.max(1))?;
    let pool_sha256 = pool_hash(&train);
    let pool = ExemplarPool::new(train, sim.as_ref()).map_err(|e| anyhow!(e))?;
    let rows: Box<dyn RowsProvider> = match &a.db_root {
        Some(root) => Box::new(DbRootRows::new(root)),
        None => Box::new(NoRows),
    };
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config: &config,
        cache_mode: gateway.mode(),
        cache: a.gateway.cache.as_deref(),
        similarity: sim.name(),
        tables: &a.tables,
        db_root: a.db_root.as_deref(),
        train: a.train.as_deref(),
        test: &a.test,
        pool_size: pool.len(),
        pool_sha256,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).map_err(|e| anyhow!(e))?;
    write_file(&a.out.join("manifest.json"), &(manifest_json + "\n"))?;

    let pipeline = Pipeline::new(config, &catalog, rows.as_ref(), &pool, sim.as_ref(), &gateway).map_err(|e| anyhow!(e))?;
    let results = pipeline.predict_batch(&test, a.jobs.max(1));
    let mut jsonl = String::new();
    let mut plain = String::new();
    let mut failed = 0;
    for (ex, r) in test.iter().zip(results) {
        let p = r.with_context(|| format!("predicting {}", ex.source_id))?;
        failed += usize::from(p.sql.is_empty());
        jsonl.push_str(&p.to_record().to_string());
        jsonl.push('\n');
        plain.push_str(&p.sql.split_whitespace().collect::<Vec<_>>().join(" "));
        plain.push('\n');
    }
    write_file(&a.out.join("predictions.jsonl"), &jsonl)?;
    write_file(&a.out.join("predictions.sql"), &plain)?;
    eprintln!("predicted {} examples, {} without extractable SQL", test.len(), failed);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    if !(a.timeout_secs > 0.0 && a.timeout_secs.is_finite()) {
        return Err(Failure::Usage("--timeout-secs must be positive".into()));
    }
    let catalog = load_catalog(&a.tables)?;
    let opts = EvalOptions {
        db_root: a.db_root.clone(),
        variants_root: a.variants_root.clone(),
        timeout: Duration::from_secs_f64(a.timeout_secs),
        jobs: a.jobs.max(1),
    };
    let (json, table) = if a.multiturn {
        let golds = load_interactions(&a.gold, &catalog).map_err(|e| anyhow!(e))?;
        let ids: Vec<String> = golds.iter().flat_map(|it| (0..it.turns.len()).map(|t| it.turn_id(t))).collect();
        let preds = eval::read_predictions(&a.pred, &ids).map_err(|e| anyhow!(e))?;
        let (report, multi) = eval::score_interaction_set(&preds, &golds, &catalog, &opts).map_err(|e| anyhow!(e))?;
        let json = serde_json::json!({ "single_turn": report, "multi_turn": multi });
        (json, format!("{}\n{}", report.to_table(), multi.to_table()))
    } else {
        let golds = load_examples(&a.gold, &catalog).map_err(|e| anyhow!(e))?;
        let ids: Vec<String> = golds.iter().map(|g| g.source_id.clone()).collect();
        let preds = eval::read_predictions(&a.pred, &ids).map_err(|e| anyhow!(e))?;
        let report = eval::score_dataset(&preds, &golds, &catalog, &opts).map_err(|e| anyhow!(e))?;
        let table = report.to_table();
        (serde_json::to_value(&report).map_err(|e| anyhow!(e))?, table)
    };
    if let Some(dir) = &a.out {
        let pretty = serde_json::to_string_pretty(&json).map_err(|e| anyhow!(e))?;
        write_file(&dir.join("report.json"), &(pretty + "\n"))?;
        write_file(&dir.join("report.txt"), &table)?;
    }
    print!("{table}");
    Ok(())
}

fn cmd_rewrite(a: RewriteArgs) -> CmdResult {
    let instruction = match &a.instruction {
        Some(p) => Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?.trim_end().to_string()),
        None => None,
    };
    let resources = match RewriteResources::bundled(&a.exemplars) {
        Some(mut r) => {
            if let Some(i) = instruction {
                r.instruction = i;
            }
            r
        }
        None => match RewriteResources::load(Path::new(&a.exemplars), instruction) {
            Ok(r) => r,
            Err(e @ (RewriteError::NoExemplars | RewriteError::MismatchedPair(_))) => return Err(Failure::Usage(e.to_string())),
            Err(e) => return Err(Failure::Data(anyhow!(e))),
        },
    };
    let catalog = load_catalog(&a.tables)?;
    let interactions = load_interactions(&a.interactions, &catalog).map_err(|e| anyhow!(e))?;
    let gateway = build_gateway(&a.gateway, 1)?;
    let params = GenerationParams { model: a.gateway.model.clone(), temperature: 0.0, max_tokens: a.max_tokens };
    let mut records = Vec::new();
    let (mut flagged_turns, mut parse_failures) = (0, 0);
    for it in &interactions {
        let outcome = crate::pipeline::rewrite_interaction(it, &resources, &gateway, &params)
            .with_context(|| format!("rewriting interaction {}", it.source_id))?;
        flagged_turns += outcome.fallback_turns.len();
        parse_failures += usize::from(outcome.parse_failed);
        records.extend(outcome.examples.iter().map(Example::to_record));
    }
    let body = serde_json::to_string_pretty(&records).map_err(|e| anyhow!(e))?;
    write_file(&a.out, &(body + "\n"))?;
    eprintln!(
        "rewrote {} interactions into {} examples; {} turns kept their original question; {} replies unparseable",
        interactions.len(),
        records.len(),
        flagged_turns,
        parse_failures
    );
    Ok(())
}
