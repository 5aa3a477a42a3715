//! `scentrec` command implementations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::error::{ContextKind, ErrorKind};
use clap::{Args, Parser, Subcommand};
use scentrec_core::corpus::FeatureConfig;
use scentrec_core::features::load_embeddings;
use scentrec_core::forage::{run_batch, ForageConfig, ForageTask, PolicyKind, DEFAULT_MAX_ITERS, DEFAULT_PAGE_SIZE};
use scentrec_core::ingest::{
    derive_labels, load_category_dir, load_manifest, load_store, save_store, InterestRule, Store, StoreConfig,
    DEFAULT_SUBCLASSES,
};
use scentrec_core::learn::{
    default_grid, grid_search, split_dataset, Dataset, EvalReport, GridPreset, TrainerKind,
};
use scentrec_core::scent::ScentConfig;
use scentrec_service::{AppState, ServiceOptions};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "scentrec", version, about = "Scent-ranked content-based image recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a store from a corpus manifest.
    Ingest(IngestArgs),
    /// Build a store from a directory of category subdirectories.
    IngestWikiart(IngestWikiartArgs),
    /// Train and evaluate an interest classifier.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Run simulated foragers.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Store directory.
    #[arg(long, env = "IFT_STORE")]
    pub store: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Override a setting, e.g. `scent.gamma=0.9` or `features.top_k_terms=16`.
    #[arg(long = "config", value_name = "KEY=VALUE")]
    pub config: Vec<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub store: StoreArg,
    /// Optional embeddings sidecar (TSV: id, then vector components).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct IngestWikiartArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[command(flatten)]
    pub store: StoreArg,
    /// Comma-separated subclass directories to import.
    #[arg(long, value_delimiter = ',')]
    pub subclasses: Option<Vec<String>>,
    /// Comma-separated subclasses labelled interested.
    #[arg(long, value_delimiter = ',')]
    pub interested: Option<Vec<String>>,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long, value_parser = parse_model)]
    pub model: TrainerKind,
    #[arg(long, default_value_t = 0.67)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "default", value_parser = parse_grid)]
    pub grid: GridPreset,
    /// Cross-validation folds for the grid search.
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Directory served for non-API paths.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    /// Directory for per-session event logs.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long, default_value = "scent", value_parser = parse_policy)]
    pub policy: PolicyKind,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_PAGE_SIZE)]
    pub page_size: usize,
    /// Target category; every category when absent.
    #[arg(long)]
    pub target: Option<String>,
    /// Query text; defaults to the target with underscores as spaces.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

fn parse_model(s: &str) -> Result<TrainerKind, String> {
    s.parse().map_err(|e: scentrec_core::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridPreset, String> {
    s.parse().map_err(|e: scentrec_core::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: scentrec_core::Error| e.to_string())
}

/// Failure classes, mapped to exit codes 1 and 2.
#[derive(Debug)]
pub enum CliError {
    Usage { message: String, field: Option<String> },
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } | CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    /// Single-line JSON error body.
    pub fn to_json(&self) -> String {
        let (code, message, field) = match self {
            CliError::Usage { message, field } => ("usage", message.as_str(), field.as_deref()),
            CliError::Validation(m) => ("validation_error", m.as_str(), None),
            CliError::Runtime(m) => ("runtime_error", m.as_str(), None),
        };
        json!({ "error": { "code": code, "message": message, "field": field } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

impl From<scentrec_core::Error> for CliError {
    fn from(e: scentrec_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<clap::Error> for CliError {
    fn from(e: clap::Error) -> Self {
        let field = match e.get(ContextKind::InvalidArg) {
            Some(clap::error::ContextValue::String(s)) => Some(s.clone()),
            _ => None,
        };
        let rendered = e.to_string();
        let message = rendered
            .lines()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("invalid arguments")
            .trim_start_matches("error: ")
            .to_string();
        CliError::Usage { message, field }
    }
}

fn write_io(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Settings adjustable with `--config`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub features: FeatureConfig,
    pub scent: ScentConfig,
}

pub fn apply_config(mut settings: Settings, pairs: &[String], allow_features: bool) -> Result<Settings, CliError> {
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage { message: format!("--config expects KEY=VALUE, got {pair:?}"), field: Some("--config".into()) })?;
        let bad_value = || CliError::Validation(format!("config {key}: cannot parse {value:?}"));
        match key {
            "features.bins_per_channel" | "features.top_k_terms" if allow_features => {
                let v: usize = value.parse().map_err(|_| bad_value())?;
                if key == "features.bins_per_channel" {
                    if !(1..=256).contains(&v) {
                        return Err(CliError::Validation(format!("config {key}: {v} outside 1..=256")));
                    }
                    settings.features.bins_per_channel = v;
                } else {
                    settings.features.top_k_terms = v;
                }
            }
            k if k.starts_with("scent.") => {
                let v: f64 = value.parse().map_err(|_| bad_value())?;
                settings.scent.set(k, v)?;
            }
            _ => return Err(CliError::Usage { message: format!("unknown config key {key}"), field: Some(key.to_string()) }),
        }
    }
    Ok(settings)
}

/// Output of a completed command: a JSON summary for stdout.
pub type Summary = Value;

pub fn ingest(args: &IngestArgs) -> Result<Summary, CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let root = args.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    build_and_save(manifest, root, &args.config.config, args.seed, args.embeddings.as_deref(), &args.store.store, Vec::new())
}

pub fn ingest_wikiart(args: &IngestWikiartArgs) -> Result<Summary, CliError> {
    let subclasses: Vec<String> = match &args.subclasses {
        Some(s) => s.clone(),
        None => DEFAULT_SUBCLASSES.iter().map(|s| s.to_string()).collect(),
    };
    let (manifest, warnings) = load_category_dir(&args.dir, &subclasses)?;
    let rule = match &args.interested {
        Some(set) => InterestRule::Categories(set.iter().cloned().collect()),
        None => InterestRule::default(),
    };
    let manifest = derive_labels(&manifest, &rule)?;
    build_and_save(manifest, args.dir.clone(), &args.config.config, args.seed, None, &args.store.store, warnings)
}

fn build_and_save(
    manifest: scentrec_core::ingest::CorpusManifest,
    root: PathBuf,
    config: &[String],
    seed: u64,
    embeddings: Option<&Path>,
    store_dir: &Path,
    mut warnings: Vec<String>,
) -> Result<Summary, CliError> {
    let settings = apply_config(Settings { features: FeatureConfig::default(), scent: ScentConfig::default() }, config, true)?;
    let root = fs::canonicalize(if root.as_os_str().is_empty() { Path::new(".") } else { &root })
        .map_err(|e| CliError::Runtime(format!("{}: {e}", root.display())))?;
    let store_config = StoreConfig { features: settings.features, scent: settings.scent, seed, image_root: root };
    let mut store = Store::build(manifest, store_config)?;
    if let Some(path) = embeddings {
        let (emb, _) = load_embeddings(path, None)?;
        store = store.with_embeddings(emb);
    }
    warnings.extend(store.warnings().iter().cloned());
    save_store(&store, store_dir)?;
    let corpus = store.corpus();
    Ok(json!({
        "store": store_dir.display().to_string(),
        "corpus": corpus.name(),
        "images": corpus.len(),
        "vocabulary": corpus.tfidf().vocabulary().len(),
        "dim": corpus.features().first().map(|f| f.dim()).unwrap_or(0),
        "embeddings": corpus.embeddings().is_some(),
        "warnings": warnings,
    }))
}

/// Splits, grid-searches on the training part, and evaluates on the rest.
pub fn evaluate(store: &Store, kind: TrainerKind, train_frac: f64, seed: u64, grid: GridPreset, folds: usize) -> Result<EvalReport, CliError> {
    let data = Dataset::from_corpus(store.corpus())?;
    let (train, test) = split_dataset(&data, train_frac, seed)?;
    let result = grid_search(kind, &train, &default_grid(kind, grid), folds, seed)?;
    let report = result.model.evaluate(&test)?;
    let grid_name = match grid {
        GridPreset::Default => "default",
        GridPreset::Reference => "reference",
    };
    Ok(EvalReport::new(kind, &report, seed, result.best, train_frac, folds, grid_name, train.len(), test.len(), result.table))
}

pub fn eval(args: &EvalArgs) -> Result<Summary, CliError> {
    let store = load_store(&args.store.store)?;
    let report = evaluate(&store, args.model, args.train_frac, args.seed, args.grid, args.folds)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    let macro_f1 = report.classes.values().map(|c| c.f1).sum::<f64>() / report.classes.len() as f64;
    match &args.report {
        Some(path) => {
            write_io(path, &text)?;
            Ok(json!({ "model": report.model, "macro_f1": macro_f1, "auc": report.auc, "report": path.display().to_string() }))
        }
        None => Ok(serde_json::from_str(&text).expect("report is valid JSON")),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<Summary, CliError> {
    let store = load_store(&args.store.store)?;
    let settings = apply_config(Settings { features: store.config().features, scent: store.config().scent }, &args.config.config, false)?;
    let corpus = store.corpus();
    let tasks: Vec<ForageTask> = match &args.target {
        Some(t) => vec![ForageTask::new(args.query.clone().unwrap_or_else(|| t.replace('_', " ")), t.clone())],
        None => {
            if args.query.is_some() {
                return Err(CliError::Usage { message: "--query requires --target".into(), field: Some("--query".into()) });
            }
            corpus.categories().into_iter().map(|c| ForageTask::new(c.replace('_', " "), c)).collect()
        }
    };
    let config = ForageConfig { max_iters: args.max_iters, page_size: args.page_size, scent: settings.scent };
    let batch = run_batch(args.policy, corpus, &tasks, args.runs, args.seed, &config)?;
    let text = serde_json::to_string_pretty(&batch.report).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    match &args.report {
        Some(path) => {
            write_io(path, &text)?;
            let tasks: BTreeMap<&str, f64> = batch.report.tasks.iter().map(|t| (t.target.as_str(), t.success_rate)).collect();
            Ok(json!({ "policy": args.policy.as_str(), "success_rate": tasks, "report": path.display().to_string() }))
        }
        None => Ok(serde_json::from_str(&text).expect("report is valid JSON")),
    }
}

pub fn serve(args: &ServeArgs) -> Result<Summary, CliError> {
    let store = load_store(&args.store.store)?;
    let settings = apply_config(Settings { features: store.config().features, scent: store.config().scent }, &args.config.config, false)?;
    let mut options = ServiceOptions::for_store(&store);
    options.scent = settings.scent;
    options.log_dir = args.log_dir.clone();
    options.static_dir = args.static_dir.clone();
    if let Some(dir) = &options.static_dir {
        if !dir.is_dir() {
            return Err(CliError::Validation(format!("static directory not found: {}", dir.display())));
        }
    }
    let state = AppState::new(store, options)?;
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("{}", json!({ "listening": addr.to_string() }));
    runtime
        .block_on(scentrec_service::serve(addr, state))
        .map_err(|e| CliError::Runtime(format!("serve on {addr}: {e}")))?;
    Ok(json!({ "stopped": addr.to_string() }))
}

/// Parses `argv` and runs the command. `Ok(None)` means help or version
/// text was printed.
pub fn run<I, T>(argv: I) -> Result<Option<Summary>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let summary = match &cli.command {
        Command::Ingest(a) => ingest(a)?,
        Command::IngestWikiart(a) => ingest_wikiart(a)?,
        Command::Eval(a) => eval(a)?,
        Command::Serve(a) => serve(a)?,
        Command::Simulate(a) => simulate(a)?,
    };
    Ok(Some(summary))
}
