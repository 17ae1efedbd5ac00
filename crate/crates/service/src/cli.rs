//! `sparktune` command line: `serve`, `benchmark`, `lint-rules`, `replay`
//! and `train-similarity`. Every subcommand except `serve` is a plain
//! function returning its report, so it can be driven from tests.

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use sparktune::benchmark::{parse_strategies, run_benchmark, train_similarity, training_tasks, BenchmarkManifest};
use sparktune::rules::lint_ruleset;
use sparktune::space::SearchSpace;
use sparktune::store::Store;
use sparktune::tuner::Tuner;
use thiserror::Error;

use crate::service::{Settings, TuningService, ENV_STORE};

const DEFAULT_STORE: &str = "sparktune-store";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Service(#[from] crate::service::ServiceError),
    #[error(transparent)]
    Store(#[from] sparktune::store::StoreError),
    #[error(transparent)]
    Bench(#[from] sparktune::benchmark::BenchError),
    #[error(transparent)]
    Tuner(#[from] sparktune::tuner::TunerError),
    /// The command ran but its findings are a failure (lint errors, a
    /// diverging replay); the report is still printed.
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Parser)]
#[command(name = "sparktune", version, about = "Spark SQL configuration tuner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the suggest/observe HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Knowledge store root [env: SPARKTUNE_STORE].
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run strategies over a synthetic suite and write the curves table.
    Benchmark {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated subset of rover, vanilla_bo, rules_only,
        /// transfer_all, transfer_one.
        #[arg(long, value_delimiter = ',', required = true)]
        strategies: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Search-space document; the bundled Spark space by default.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Validate a rule document and report every problem.
    LintRules {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Re-run a stored task's logged observations and check that the tuner
    /// reproduces its suggestions.
    Replay {
        #[arg(long)]
        task_id: String,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Train the task-similarity model on synthetic tasks and store it.
    TrainSimilarity {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, default_value_t = 120)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn store_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(ENV_STORE).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_space(path: Option<&Path>) -> Result<SearchSpace, CliError> {
    match path {
        None => Ok(SearchSpace::spark_default()),
        Some(p) => SearchSpace::lint_json(&read(p)?).map_err(|errs| {
            let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
            CliError::Usage(format!("{}: invalid space document\n  {}", p.display(), lines.join("\n  ")))
        }),
    }
}

pub fn lint_rules(file: &Path, space: Option<&Path>) -> Result<String, CliError> {
    let space = load_space(space)?;
    match lint_ruleset(&read(file)?, &space) {
        Ok(rules) => Ok(format!("{}: {} rules OK", file.display(), rules.len())),
        Err(errs) => {
            let mut out = format!("{}: {} problem(s)", file.display(), errs.len());
            for e in errs {
                write!(out, "\n  {e}").unwrap();
            }
            Err(CliError::Failed(out))
        }
    }
}

pub fn benchmark(manifest: &Path, strategies: &[String], seeds: &[u64], out: &Path, space: Option<&Path>) -> Result<String, CliError> {
    // reject unknown names before reading anything else
    parse_strategies(strategies)?;
    let space = load_space(space)?;
    let manifest: BenchmarkManifest =
        serde_json::from_str(&read(manifest)?).map_err(|e| CliError::Usage(format!("{}: {e}", manifest.display())))?;
    let result = run_benchmark(&space, &manifest, strategies, seeds)?;
    std::fs::write(out, result.to_csv()).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    let mut report = format!("{} curves written to {}\n", result.curves.len(), out.display());
    writeln!(report, "{:<14} {:>5} {:>14} {:>14}", "strategy", "runs", "best@5", "best@final").unwrap();
    for s in result.summary() {
        let at = |k: usize| s.mean_best.get(k.min(s.mean_best.len().saturating_sub(1))).copied().unwrap_or(f64::NAN);
        writeln!(report, "{:<14} {:>5} {:>14.6} {:>14.6}", s.strategy, s.runs, at(5), at(usize::MAX)).unwrap();
    }
    Ok(report)
}

/// Rebuilds the task from its spec and feeds it the logged observations;
/// the ensemble sees exactly the history tasks the original run selected.
pub fn replay(store_root: &Path, task_id: &str) -> Result<String, CliError> {
    let store = Store::open(store_root)?;
    let (spec, state) = store.load_session(task_id)?;
    let log: crate::service::SessionLog = store.load_session_extra(task_id, "log")?;
    let (history, _) = store.load_history()?;
    let history = history.into_iter().filter(|r| state.members.iter().any(|m| m == r.task_id())).collect();
    let mut tuner = Tuner::with_history(spec, history, store.load_similarity()?)?;

    let mut out = format!("task {task_id}: {} logged evaluations, status {:?}\n", log.entries.len(), state.status);
    writeln!(out, "{:>5} {:<8} {:<14} {:>16} {:>16}", "index", "phase", "rationale", "objective", "best").unwrap();
    let mut best = f64::INFINITY;
    for (entry, obs) in log.entries.iter().zip(&state.observations) {
        let s = tuner.suggest()?;
        if s.config != entry.suggestion.config || s.rationale != entry.suggestion.rationale {
            return Err(CliError::Failed(format!(
                "{out}replay diverged at suggestion {}: logged {:?}, replayed {:?}",
                entry.suggestion.index, entry.suggestion.rationale, s.rationale
            )));
        }
        tuner.observe(obs.clone())?;
        best = best.min(obs.objective);
        let phase = serde_json::to_value(s.phase).unwrap();
        let rationale = serde_json::to_value(s.rationale).unwrap();
        writeln!(
            out,
            "{:>5} {:<8} {:<14} {:>16.6} {:>16.6}",
            s.index,
            phase.as_str().unwrap_or("?"),
            rationale.as_str().unwrap_or("?"),
            entry.objective,
            log.orientation.to_external(best)
        )
        .unwrap();
    }
    write!(out, "replay reproduced all {} suggestions", log.entries.len()).unwrap();
    Ok(out)
}

pub fn train_similarity_cmd(store_root: &Path, tasks: usize, seed: u64) -> Result<String, CliError> {
    if tasks < 2 {
        return Err(CliError::Usage("--tasks must be at least 2".into()));
    }
    let store = Store::open(store_root)?;
    let space = SearchSpace::spark_default();
    let train = training_tasks(&space, tasks, 0.05, seed)?;
    let model = train_similarity(&train, seed)?;
    store.save_similarity(&model)?;
    Ok(format!("similarity model trained on {tasks} synthetic tasks, stored in {}", store_root.display()))
}

fn serve(port: u16, host: &str, store: Option<PathBuf>) -> Result<String, CliError> {
    let settings = Settings::from_env().map_err(CliError::Usage)?;
    let root = store_root(store);
    let (service, skipped) = TuningService::open(Store::open(&root)?, settings)?;
    for (id, why) in skipped {
        tracing::warn!("skipping {id}: {why}");
    }
    let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    tracing::info!("store at {}", root.display());
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: root.clone(), source })?;
    runtime
        .block_on(crate::http::serve(Arc::new(service), addr))
        .map_err(|source| CliError::Io { path: root, source })?;
    Ok(String::new())
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Serve { port, host, store } => serve(port, &host, store),
        Command::Benchmark { manifest, strategies, seeds, out, space } => {
            benchmark(&manifest, &strategies, &seeds, &out, space.as_deref())
        }
        Command::LintRules { file, space } => lint_rules(&file, space.as_deref()),
        Command::Replay { task_id, store } => replay(&store_root(store), &task_id),
        Command::TrainSimilarity { store, tasks, seed } => train_similarity_cmd(&store_root(store), tasks, seed),
    }
}

pub fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match run(Cli::parse()) {
        Ok(report) => {
            if !report.is_empty() {
                println!("{report}");
            }
            ExitCode::SUCCESS
        }
        Err(CliError::Failed(report)) => {
            println!("{report}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
