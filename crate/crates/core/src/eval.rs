//! Task-file evaluation: retrieval per task, golden-context coverage,
//! completion metrics against predictions, and summaries.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, PipelineConfig};
use crate::corpus::{scan_repo, RepoSnapshot};
use crate::error::{Error, Result};
use crate::metrics::{coverage, CoverageReport, EvalMetrics, FailureClass, GoldSpan, LatencyRecord};
use crate::pipeline::Pipeline;
use crate::querygen::{CompletionTask, QueryGenerator};

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))?;
        out.push(item);
    }
    Ok(out)
}

/// Tasks with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskFile {
    pub tasks: Vec<CompletionTask>,
}

impl TaskFile {
    pub fn new(tasks: Vec<CompletionTask>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &tasks {
            if !seen.insert(t.task_id.as_str()) {
                return Err(Error::Config(format!("duplicate task_id `{}`", t.task_id)));
            }
        }
        Ok(Self { tasks })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(read_jsonl(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub task_id: String,
    pub gold: Vec<GoldSpan>,
}

pub fn load_gold(path: &Path) -> Result<BTreeMap<String, Vec<GoldSpan>>> {
    let records: Vec<GoldRecord> = read_jsonl(path)?;
    Ok(records.into_iter().map(|r| (r.task_id, r.gold)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub task_id: String,
    pub prediction: String,
}

pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, String>> {
    let records: Vec<PredictionRecord> = read_jsonl(path)?;
    Ok(records.into_iter().map(|r| (r.task_id, r.prediction)).collect())
}

#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub repo_root: PathBuf,
    pub tasks: TaskFile,
    pub gold: Option<BTreeMap<String, Vec<GoldSpan>>>,
    pub predictions: Option<BTreeMap<String, String>>,
}

impl EvalInputs {
    fn validate(&self) -> Result<()> {
        if let Some(gold) = &self.gold {
            let ids: HashSet<&str> = self.tasks.tasks.iter().map(|t| t.task_id.as_str()).collect();
            if let Some(unknown) = gold.keys().find(|k| !ids.contains(k.as_str())) {
                return Err(Error::Config(format!("gold task_id `{unknown}` is not in the task file")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRef {
    pub file: String,
    pub start: usize,
    pub end: usize,
}

/// One line of the results JSONL. Holds no timings, so identical runs
/// serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskResult {
    pub task_id: String,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub retrieval_empty: bool,
    pub queries: Vec<String>,
    pub pool_size: usize,
    pub context: Vec<BlockRef>,
    pub context_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EvalMetrics>,
}

impl TaskResult {
    fn errored(task_id: &str, error: String) -> Self {
        Self {
            task_id: task_id.to_owned(),
            status: TaskStatus::Error,
            error: Some(error),
            retrieval_empty: true,
            queries: Vec::new(),
            pool_size: 0,
            context: Vec::new(),
            context_tokens: 0,
            pool_coverage: None,
            coverage: None,
            coverage_error: None,
            metrics: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub mode: Mode,
    #[serde(rename = "N")]
    pub top_percent: f64,
    #[serde(rename = "K")]
    pub top_k: usize,
    pub tau: f64,
    pub tasks: usize,
    pub errored: usize,
    pub retrieval_empty: usize,
    pub with_gold: usize,
    pub covered: usize,
    pub recall_failures: usize,
    pub rerank_failures: usize,
    pub mean_pool_coverage: Option<f64>,
    pub mean_topk_coverage: Option<f64>,
    pub metrics: Option<EvalMetrics>,
    pub mean_retrieval_seconds: Option<f64>,
    pub mean_generation_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub results: Vec<TaskResult>,
    /// Same order as `results`; `None` for tasks that errored before timing.
    pub latency: Vec<Option<LatencyRecord>>,
    pub summary: EvalSummary,
}

impl EvalRun {
    pub fn results_jsonl(&self) -> String {
        to_jsonl(&self.results)
    }

    pub fn latency_jsonl(&self) -> String {
        to_jsonl(&self.latency.iter().flatten().collect::<Vec<_>>())
    }

    /// Writes `results.jsonl`, `latency.jsonl` and `summary.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            fs::File::create(&path)
                .and_then(|mut f| f.write_all(body.as_bytes()))
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))
        };
        write("results.jsonl", self.results_jsonl())?;
        write("latency.jsonl", self.latency_jsonl())?;
        let summary = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        write("summary.json", summary + "\n")
    }
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn evaluate_task(
    pipeline: &Pipeline,
    snapshot: &RepoSnapshot,
    task: &CompletionTask,
    inputs: &EvalInputs,
) -> (TaskResult, Option<LatencyRecord>) {
    let cfg = pipeline.config();
    let outcome = match pipeline.retrieve(snapshot, task) {
        Ok(o) => o,
        Err(e) => return (TaskResult::errored(&task.task_id, e.to_string()), None),
    };
    let mut result = TaskResult {
        task_id: task.task_id.clone(),
        status: TaskStatus::Ok,
        error: None,
        retrieval_empty: outcome.retrieval_empty,
        queries: outcome.queries.queries.iter().map(|q| q.pattern().to_owned()).collect(),
        pool_size: outcome.pool.len(),
        context: outcome
            .pack
            .blocks
            .iter()
            .map(|b| BlockRef {
                file: b.file.clone(),
                start: b.interval.start,
                end: b.interval.end,
            })
            .collect(),
        context_tokens: outcome.pack.token_count,
        pool_coverage: None,
        coverage: None,
        coverage_error: None,
        metrics: None,
    };

    if let Some(gold) = inputs.gold.as_ref().and_then(|g| g.get(&task.task_id)) {
        match (coverage(&outcome.pool, gold), coverage(&outcome.pack.blocks, gold)) {
            (Some(pool), Some(topk)) => {
                result.pool_coverage = Some(pool.ratio());
                result.coverage = Some(CoverageReport::new(pool.ratio(), topk.ratio(), cfg.tau));
            }
            _ => result.coverage_error = Some(Error::EmptyGold(task.task_id.clone()).to_string()),
        }
    }

    let prediction = inputs.predictions.as_ref().and_then(|p| p.get(&task.task_id));
    if let (Some(prediction), Some(reference)) = (prediction, task.ground_truth.as_ref()) {
        result.metrics = Some(EvalMetrics::compute(
            prediction,
            reference,
            task.language(),
            cfg.em_normalization,
        ));
    }
    (result, Some(outcome.latency))
}

pub fn summarize(cfg: &PipelineConfig, results: &[TaskResult], latency: &[Option<LatencyRecord>]) -> EvalSummary {
    let reports: Vec<&CoverageReport> = results.iter().filter_map(|r| r.coverage.as_ref()).collect();
    let failures = |class: FailureClass| reports.iter().filter(|r| r.failure_class == Some(class)).count();
    let metrics: Vec<EvalMetrics> = results.iter().filter_map(|r| r.metrics).collect();
    EvalSummary {
        mode: cfg.mode,
        top_percent: cfg.top_percent,
        top_k: cfg.top_k,
        tau: cfg.tau,
        tasks: results.len(),
        errored: results.iter().filter(|r| r.status == TaskStatus::Error).count(),
        retrieval_empty: results
            .iter()
            .filter(|r| r.status == TaskStatus::Ok && r.retrieval_empty)
            .count(),
        with_gold: reports.len(),
        covered: reports.iter().filter(|r| r.covered).count(),
        recall_failures: failures(FailureClass::RecallFailure),
        rerank_failures: failures(FailureClass::RerankFailure),
        mean_pool_coverage: mean(results.iter().filter_map(|r| r.pool_coverage)),
        mean_topk_coverage: mean(reports.iter().map(|r| r.ratio)),
        metrics: EvalMetrics::mean(&metrics),
        mean_retrieval_seconds: mean(latency.iter().flatten().map(|l| l.retrieval_seconds)),
        mean_generation_seconds: mean(latency.iter().flatten().filter_map(|l| l.generation_seconds)),
    }
}

/// Scans each distinct repository once and evaluates every task. Per-task
/// failures are recorded and never abort the run; results keep task order.
pub fn run_eval(inputs: &EvalInputs, cfg: &PipelineConfig, generator: QueryGenerator) -> Result<EvalRun> {
    inputs.validate()?;
    let pipeline = Pipeline::new(cfg.clone(), generator)?;

    let repo_of = |t: &CompletionTask| inputs.repo_root.join(t.repo.as_deref().unwrap_or(""));
    let mut repos: Vec<PathBuf> = inputs.tasks.tasks.iter().map(repo_of).collect();
    repos.sort();
    repos.dedup();
    let snapshots: HashMap<PathBuf, std::result::Result<RepoSnapshot, String>> = repos
        .into_par_iter()
        .map(|p| {
            let snap = scan_repo(&p, &cfg.scan_options()).map_err(|e| e.to_string());
            (p, snap)
        })
        .collect();

    let evaluated: Vec<(TaskResult, Option<LatencyRecord>)> = inputs
        .tasks
        .tasks
        .par_iter()
        .map(|task| match &snapshots[&repo_of(task)] {
            Ok(snap) => evaluate_task(&pipeline, snap, task, inputs),
            Err(e) => (TaskResult::errored(&task.task_id, e.clone()), None),
        })
        .collect();
    let (results, latency): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();
    let summary = summarize(cfg, &results, &latency);
    Ok(EvalRun {
        results,
        latency,
        summary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "N")]
    TopPercent,
    #[serde(rename = "tau")]
    Tau,
    #[serde(rename = "K")]
    TopK,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "N" => Ok(SweepParam::TopPercent),
            "tau" => Ok(SweepParam::Tau),
            "K" => Ok(SweepParam::TopK),
            other => Err(format!("unknown sweep parameter `{other}` (expected N, tau or K)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub summary: EvalSummary,
}

impl SweepParam {
    fn apply(self, cfg: &PipelineConfig, value: f64) -> Result<PipelineConfig> {
        let mut cfg = cfg.clone();
        match self {
            SweepParam::TopPercent => cfg.top_percent = value,
            SweepParam::Tau => cfg.tau = value,
            SweepParam::TopK => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "K",
                        reason: format!("must be a positive integer, got {value}"),
                    });
                }
                cfg.top_k = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Re-runs the evaluation once per value. All values are validated before
/// any run starts.
pub fn run_sweep(
    inputs: &EvalInputs,
    cfg: &PipelineConfig,
    generator: QueryGenerator,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    let configs: Vec<PipelineConfig> = values
        .iter()
        .map(|&v| param.apply(cfg, v))
        .collect::<Result<_>>()?;
    configs
        .iter()
        .zip(values)
        .map(|(c, &value)| {
            let run = run_eval(inputs, c, generator.clone())?;
            Ok(SweepRow {
                param,
                value,
                summary: run.summary,
            })
        })
        .collect()
}
