//! Synthetic-repository latency benchmark.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, PHASE_QUERY_GENERATION};
use crate::querygen::CompletionTask;

pub const DEFAULT_BENCH_SEED: u64 = 7;
pub const LINES_PER_FILE: usize = 400;

const NOUNS: &[&str] = &[
    "account", "buffer", "cache", "channel", "client", "config", "cursor", "dataset", "device", "event",
    "frame", "graph", "handler", "image", "index", "job", "layer", "loader", "matrix", "model", "node",
    "order", "packet", "pipeline", "queue", "record", "report", "request", "sample", "schema", "session",
    "signal", "socket", "stream", "table", "task", "tensor", "token", "user", "vector", "worker",
];
const VERBS: &[&str] = &[
    "build", "check", "compute", "convert", "create", "decode", "encode", "fetch", "filter", "flush",
    "load", "merge", "parse", "process", "read", "render", "reset", "resolve", "save", "scale", "send",
    "split", "update", "validate", "write",
];

const DECK_MODULE: &str = "import random


class Deck:
    \"\"\"A shuffled stack of cards.\"\"\"

    def __init__(self, cards):
        self.cards = list(cards)

    def shuffle(self, seed=None):
        random.Random(seed).shuffle(self.cards)

    def draw(self):
        return self.cards.pop()

    def remaining(self):
        return len(self.cards)
";

fn camel(word: &str) -> String {
    let mut c = word.chars();
    c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).copied().unwrap_or("x")
}

/// One module of roughly `lines` lines of plausible Python.
fn synthetic_module(rng: &mut ChaCha8Rng, lines: usize) -> String {
    let mut out = vec!["import os".to_owned(), "import json".to_owned(), String::new()];
    while out.len() < lines {
        let (noun, other) = (pick(rng, NOUNS), pick(rng, NOUNS));
        out.push(format!("class {}{}:", camel(noun), camel(other)));
        out.push(format!("    def __init__(self, {noun}, {other}=None):"));
        out.push(format!("        self.{noun} = {noun}"));
        out.push(format!("        self.{other} = {other} or {{}}"));
        out.push(String::new());
        for _ in 0..rng.gen_range(2..5) {
            let verb = pick(rng, VERBS);
            let arg = pick(rng, NOUNS);
            out.push(format!("    def {verb}_{arg}(self, {arg}):"));
            for _ in 0..rng.gen_range(3..8) {
                let (a, b, v) = (pick(rng, NOUNS), pick(rng, NOUNS), pick(rng, VERBS));
                out.push(match rng.gen_range(0..4) {
                    0 => format!("        {a} = self.{v}_{b}({arg})"),
                    1 => format!("        if {a} is None:\n            return {}", rng.gen_range(0..100)),
                    2 => format!("        self.{a}[\"{b}\"] = {arg}"),
                    _ => format!("        {a}_{b} = os.path.join(str({a}), {:?})", format!("{b}.json")),
                });
            }
            out.push(format!("        return {arg}"));
            out.push(String::new());
        }
    }
    let mut text = out.join("\n");
    text.push('\n');
    text
}

/// Writes a deterministic Python repository of about `total_lines` lines
/// under `dir`, with a `cards/deck.py` module defining `class Deck`.
/// Returns the number of lines written; 0 writes nothing.
pub fn generate_synthetic_repo(dir: &Path, total_lines: usize, seed: u64) -> Result<usize> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    if total_lines == 0 {
        return Ok(0);
    }
    let write = |rel: &str, text: &str| -> Result<usize> {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(text.lines().count())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut written = write("cards/deck.py", DECK_MODULE)?;
    let mut i = 0;
    while written < total_lines {
        let lines = (total_lines - written).min(LINES_PER_FILE);
        let text = synthetic_module(&mut rng, lines);
        let package = pick(&mut rng, NOUNS);
        written += write(&format!("pkg_{}/{package}_{i}.py", i % 50), &text)?;
        i += 1;
    }
    Ok(written)
}

/// Fixed completion sites used by every benchmark size.
pub fn bench_tasks() -> Vec<CompletionTask> {
    let contexts = [
        "from cards.deck import Deck\n\nclass Game:\n    def __init__(self, deck: Deck):\n        self.deck = deck\n\n    def turn(self):\n        card = self.deck.draw(",
        "class SessionWorker:\n    def __init__(self, session, queue=None):\n        self.session = session\n\n    def flush_queue(self, queue):\n        record = self.load_record(queue)\n        return self.",
        "import os\n\ndef build_report(dataset, schema):\n    loader = DatasetLoader(dataset)\n    tensor_matrix = os.path.join(str(tensor), \"matrix.json\")\n    result = loader.",
        "from pkg_1 import ModelLayer\n\nlayer = ModelLayer(model)\nlayer.update_",
    ];
    contexts
        .iter()
        .enumerate()
        .map(|(i, ctx)| CompletionTask::new(format!("bench-{}", i + 1), "main.py", *ctx))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub requested_lines: usize,
    pub lines: usize,
    pub tasks: usize,
    /// Mean end-to-end retrieval seconds per task, repository scan included.
    pub mean_retrieval_seconds: f64,
    pub mean_generation_seconds: f64,
    pub median_generation_seconds: f64,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Times every task in `tasks` against the repository at `repo`, `rounds`
/// times each. Each retrieval rescans the repository.
pub fn bench_repo(repo: &Path, lines: usize, requested: usize, tasks: &[CompletionTask], rounds: usize, cfg: &PipelineConfig) -> Result<BenchRow> {
    let pipeline = Pipeline::heuristic(cfg.clone())?;
    let mut retrieval = Vec::new();
    let mut generation = Vec::new();
    for _ in 0..rounds.max(1) {
        for task in tasks {
            let (_, outcome) = pipeline.retrieve_from_disk(repo, task)?;
            retrieval.push(outcome.latency.retrieval_seconds + outcome.latency.generation_seconds.unwrap_or(0.0));
            let gen = outcome.latency.phase_breakdown.get(PHASE_QUERY_GENERATION).copied().unwrap_or(0.0);
            generation.push(gen);
        }
    }
    let n = retrieval.len().max(1) as f64;
    Ok(BenchRow {
        requested_lines: requested,
        lines,
        tasks: tasks.len(),
        mean_retrieval_seconds: retrieval.iter().sum::<f64>() / n,
        mean_generation_seconds: generation.iter().sum::<f64>() / n,
        median_generation_seconds: median(&mut generation),
    })
}

/// Generates one synthetic repository per size in a temporary directory and
/// benchmarks the fixed tasks against it.
pub fn run_bench(sizes: &[usize], cfg: &PipelineConfig, seed: u64, rounds: usize) -> Result<Vec<BenchRow>> {
    let tasks = bench_tasks();
    sizes
        .iter()
        .map(|&size| {
            let dir = tempfile::tempdir().map_err(|e| Error::io("creating benchmark directory", e))?;
            let lines = generate_synthetic_repo(dir.path(), size, seed)?;
            bench_repo(dir.path(), lines, size, &tasks, rounds, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{scan_repo, ScanOptions};

    #[test]
    fn deterministic_and_sized() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let na = generate_synthetic_repo(a.path(), 5_000, 3).unwrap();
        let nb = generate_synthetic_repo(b.path(), 5_000, 3).unwrap();
        assert_eq!(na, nb);
        assert!((5_000..5_000 + LINES_PER_FILE).contains(&na));
        let sa = scan_repo(a.path(), &ScanOptions::default()).unwrap();
        let sb = scan_repo(b.path(), &ScanOptions::default()).unwrap();
        assert_eq!(sa.files(), sb.files());
        assert_eq!(sa.total_lines(), na);
        assert!(sa.file("cards/deck.py").unwrap().text().contains("class Deck:"));
    }

    #[test]
    fn size_zero() {
        let rows = run_bench(&[0], &PipelineConfig::default(), 1, 1).unwrap();
        assert_eq!(rows[0].lines, 0);
        assert!(rows[0].mean_retrieval_seconds < 0.1);
    }

    #[test]
    fn tasks_find_the_deck() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_repo(dir.path(), 2_000, 1).unwrap();
        let p = Pipeline::heuristic(PipelineConfig::default()).unwrap();
        let (_, out) = p.retrieve_from_disk(dir.path(), &bench_tasks()[0]).unwrap();
        assert_eq!(out.pack.blocks[0].file, "cards/deck.py");
        for task in bench_tasks() {
            assert!(!p.retrieve_from_disk(dir.path(), &task).unwrap().1.retrieval_empty);
        }
    }
}
