use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use madacc::agents::{BaselineKind, TemplateSet};
use madacc::backend::{CachedBackend, ChatBackend, LiveBackend, MockBackend, MockScript, ResponseCache, Usage};
use madacc::corpus::{load_split, make_instances_with, CorpusSummary, Instance};
use madacc::jsonl::{read_jsonl, write_jsonl};
use madacc::metrics::{evaluate, format_report, EvalReport, MetricsError, Prediction};
use madacc::protocol::{run_baseline, run_pipeline_with_progress, DebateRecord};

use crate::config::{BackendConfig, RunConfig};
use crate::inspect::format_trace;
use crate::CliError;

pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Madacc,
    Vanilla,
    Cot,
    Smart,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Madacc => "madacc",
            Method::Vanilla => "vanilla",
            Method::Cot => "cot",
            Method::Smart => "smart",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self.baseline() {
            None => "madacc",
            Some(kind) => kind.display_name(),
        }
    }

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::Madacc => None,
            Method::Vanilla => Some(BaselineKind::Vanilla),
            Method::Cot => Some(BaselineKind::Cot),
            Method::Smart => Some(BaselineKind::Smart),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn instances_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join(INSTANCES_FILE)
}

#[derive(Debug)]
pub struct PrepareOutcome {
    pub path: PathBuf,
    pub summary: CorpusSummary,
}

/// Loads the split, masks every component and writes the instances file.
pub fn cmd_prepare(config: &RunConfig, out: Option<&Path>) -> Result<PrepareOutcome, CliError> {
    let essays = load_split(&config.corpus_dir, &config.split_file)?;
    let instances: Vec<Instance> = essays
        .iter()
        .flat_map(|e| make_instances_with(e, config.context))
        .collect();
    let path = out.map_or_else(|| instances_path(config), Path::to_path_buf);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    write_jsonl(&path, &instances)?;
    Ok(PrepareOutcome {
        path,
        summary: CorpusSummary::from_essays(&essays),
    })
}

pub fn load_templates(config: &RunConfig) -> Result<TemplateSet, CliError> {
    Ok(match &config.templates_dir {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::builtin(),
    })
}

/// Builds the configured backend, wrapped in the response cache when one is
/// set. A live backend without credentials fails here, before any work.
pub fn build_backend(config: &RunConfig) -> Result<Box<dyn ChatBackend>, CliError> {
    let inner: Box<dyn ChatBackend> = match &config.backend {
        BackendConfig::Mock { mock_script_path } => {
            let script = MockScript::from_json_file(mock_script_path).map_err(|e| CliError::Config {
                path: mock_script_path.clone(),
                message: e.to_string(),
            })?;
            Box::new(MockBackend::new(script))
        }
        BackendConfig::Live { .. } => {
            let live = config.live_config().expect("live backend config");
            Box::new(LiveBackend::from_env(live)?)
        }
    };
    Ok(match &config.cache_dir {
        Some(dir) => Box::new(CachedBackend::new(inner, ResponseCache::open(dir.clone())?)),
        None => inner,
    })
}

#[derive(Debug, Default, Clone)]
pub struct RunOptions {
    /// Instances file; defaults to the one `prepare` writes.
    pub instances: Option<PathBuf>,
    /// Exact run directory; defaults to a fresh timestamped one.
    pub run_dir: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub report: Option<EvalReport>,
    pub report_text: String,
    pub usage: Usage,
    pub total: usize,
    pub failed: usize,
}

fn fresh_run_dir(config: &RunConfig, method: Method) -> PathBuf {
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
    let base = config.output_dir.join("runs");
    let first = base.join(format!("{}-{stamp}", method.as_str()));
    if !first.exists() {
        return first;
    }
    (1..)
        .map(|n| base.join(format!("{}-{stamp}-{n}", method.as_str())))
        .find(|p| !p.exists())
        .expect("some suffix is free")
}

/// Runs one method over the prepared instances and writes the config
/// snapshot, records (debates only), predictions and report.
pub async fn cmd_run(config: &RunConfig, method: Method, options: RunOptions) -> Result<RunOutcome, CliError> {
    let instances_file = options.instances.clone().unwrap_or_else(|| instances_path(config));
    if !instances_file.is_file() {
        return Err(CliError::NotPrepared(instances_file));
    }
    let instances: Vec<Instance> = read_jsonl(&instances_file)?;
    let templates = load_templates(config)?;
    let backend = build_backend(config)?;

    let run_dir = options.run_dir.clone().unwrap_or_else(|| fresh_run_dir(config, method));
    fs::create_dir_all(&run_dir).map_err(io_err(&run_dir))?;
    let snapshot = run_dir.join(CONFIG_SNAPSHOT_FILE);
    fs::write(&snapshot, config.to_toml()).map_err(io_err(&snapshot))?;

    let total = instances.len();
    let quiet = options.quiet;
    let (predictions, usage) = match method.baseline() {
        None => {
            let progress = |done: usize, r: &DebateRecord| {
                if !quiet {
                    let outcome = match (&r.verdict, r.failed) {
                        (Some(v), false) if r.skipped => format!("{} (skipped)", v.label),
                        (Some(v), false) => v.label.to_string(),
                        _ => "FAILED".to_string(),
                    };
                    eprintln!("[{done}/{total}] {} -> {outcome}", r.instance_id);
                }
            };
            let records = run_pipeline_with_progress(
                &instances,
                &config.debate,
                backend.as_ref(),
                &templates,
                config.parallelism,
                &progress,
            )
            .await?;
            write_jsonl(&run_dir.join(RECORDS_FILE), &records)?;
            let mut usage = Usage::default();
            for r in &records {
                usage += r.usage;
            }
            (records.iter().map(DebateRecord::prediction).collect::<Vec<_>>(), usage)
        }
        Some(kind) => {
            let outcomes = run_baseline(
                &instances,
                kind,
                &config.debate,
                backend.as_ref(),
                &templates,
                config.parallelism,
            )
            .await?;
            let mut usage = Usage::default();
            for o in &outcomes {
                usage += o.usage;
            }
            (outcomes.into_iter().map(|o| o.prediction).collect(), usage)
        }
    };
    write_jsonl(&run_dir.join(PREDICTIONS_FILE), &predictions)?;

    let failed = predictions.iter().filter(|p| p.failed).count();
    let (report, report_text) = match evaluate(&predictions) {
        Ok(report) => {
            let text = format_report(method.display_name(), &report);
            write_report(&run_dir, &report, &text)?;
            (Some(report), text)
        }
        Err(MetricsError::EmptyMatrix { failed }) => {
            let text = format!("no scorable predictions ({failed} failed)\n");
            let path = run_dir.join(REPORT_TEXT_FILE);
            fs::write(&path, &text).map_err(io_err(&path))?;
            (None, text)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(RunOutcome {
        run_dir,
        report,
        report_text,
        usage,
        total,
        failed,
    })
}

fn write_report(dir: &Path, report: &EvalReport, text: &str) -> Result<(), CliError> {
    let txt = dir.join(REPORT_TEXT_FILE);
    fs::write(&txt, text).map_err(io_err(&txt))?;
    let json = dir.join(REPORT_JSON_FILE);
    let body = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    fs::write(&json, body).map_err(io_err(&json))
}

/// A run directory stands for the predictions file inside it.
fn predictions_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(PREDICTIONS_FILE)
    } else {
        path.to_path_buf()
    }
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub report: EvalReport,
    pub text: String,
    pub json_path: PathBuf,
}

/// Scores a predictions file, returning the text table and writing the JSON
/// report (next to the predictions unless `json_out` is given).
pub fn cmd_evaluate(predictions: &Path, json_out: Option<&Path>) -> Result<EvaluateOutcome, CliError> {
    let file = predictions_file(predictions);
    let preds: Vec<Prediction> = read_jsonl(&file)?;
    let report = evaluate(&preds)?;
    let name = file
        .parent()
        .and_then(Path::file_name)
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('-').next())
        .and_then(|prefix| Method::from_str(prefix, true).ok())
        .map_or("predictions", Method::display_name);
    let text = format_report(name, &report);
    let json_path = json_out.map_or_else(
        || file.with_file_name(REPORT_JSON_FILE),
        Path::to_path_buf,
    );
    let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    fs::write(&json_path, body).map_err(io_err(&json_path))?;
    Ok(EvaluateOutcome { report, text, json_path })
}

/// Most recent debate run under the output directory that has records.
pub fn latest_records(config: &RunConfig) -> Option<PathBuf> {
    let runs = config.output_dir.join("runs");
    let mut dirs: Vec<PathBuf> = fs::read_dir(&runs)
        .ok()?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("madacc-"))
                && p.join(RECORDS_FILE).is_file()
        })
        .collect();
    dirs.sort();
    dirs.pop().map(|d| d.join(RECORDS_FILE))
}

/// Formats the trace for one instance from a records file or run directory.
pub fn cmd_inspect(records: &Path, instance_id: &str) -> Result<String, CliError> {
    let file = if records.is_dir() {
        records.join(RECORDS_FILE)
    } else {
        records.to_path_buf()
    };
    let all: Vec<DebateRecord> = read_jsonl(&file)?;
    all.iter()
        .find(|r| r.instance_id == instance_id)
        .map(format_trace)
        .ok_or_else(|| CliError::UnknownInstanceId {
            id: instance_id.to_string(),
            path: file,
        })
}
