//! Evaluation metrics: code and identifier match scores, line-level coverage
//! of golden context with failure classification, and phase timing.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::LineInterval;
use crate::fuse::FusedBlock;
use crate::lang::Language;
use crate::rank::{token_strs, RankedChunk};
use crate::search::Chunk;

pub const DEFAULT_TAU: f64 = 0.8;

/// How predictions and references are compared for exact match.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmNormalization {
    /// Compare whitespace-separated token sequences.
    #[default]
    Whitespace,
    /// Compare raw strings.
    Raw,
}

pub fn exact_match(prediction: &str, reference: &str) -> f64 {
    exact_match_with(prediction, reference, EmNormalization::Whitespace)
}

pub fn exact_match_with(prediction: &str, reference: &str, norm: EmNormalization) -> f64 {
    let equal = match norm {
        EmNormalization::Whitespace => prediction.split_whitespace().eq(reference.split_whitespace()),
        EmNormalization::Raw => prediction == reference,
    };
    if equal {
        100.0
    } else {
        0.0
    }
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ca == cb {
                diag
            } else {
                1 + diag.min(up).min(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// `100 * (1 - lev(p, r) / max(|p|, |r|))` over characters; 100 when both
/// are empty.
pub fn edit_similarity(prediction: &str, reference: &str) -> f64 {
    let longest = prediction.chars().count().max(reference.chars().count());
    if longest == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(prediction, reference) as f64 / longest as f64)
}

/// Code tokens for match metrics: identifier/number runs plus single
/// punctuation characters.
pub fn code_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() || c == '_' {
            start.get_or_insert(i);
            continue;
        }
        if let Some(s) = start.take() {
            out.push(&text[s..i]);
        }
        if !c.is_whitespace() {
            out.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

fn harmonic(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn multiset(tokens: &[&str]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry((*t).to_owned()).or_insert(0) += 1;
    }
    m
}

/// Returns `(precision, recall, f1)` in percent from overlap and sizes.
fn overlap_scores(overlap: usize, predicted: usize, reference: usize) -> (f64, f64, f64) {
    let recall = if reference == 0 {
        100.0
    } else {
        100.0 * overlap as f64 / reference as f64
    };
    let precision = if predicted == 0 {
        if reference == 0 {
            100.0
        } else {
            0.0
        }
    } else {
        100.0 * overlap as f64 / predicted as f64
    };
    (precision, recall, harmonic(precision, recall))
}

/// Multiset token recall and F1 in percent.
pub fn token_recall_f1(prediction: &str, reference: &str) -> (f64, f64) {
    let p = multiset(&code_tokens(prediction));
    let r = multiset(&code_tokens(reference));
    let overlap: usize = p
        .iter()
        .map(|(t, n)| (*n).min(r.get(t).copied().unwrap_or(0)))
        .sum();
    let (_, recall, f1) = overlap_scores(overlap, p.values().sum(), r.values().sum());
    (recall, f1)
}

/// Identifier set of a code fragment: lexical tokens minus keywords and
/// numeric literals.
pub fn identifier_set(text: &str, language: Language) -> BTreeSet<String> {
    token_strs(text)
        .filter(|t| !t.chars().next().is_some_and(|c| c.is_numeric()))
        .filter(|t| !language.is_keyword(t))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentifierScores {
    pub em: f64,
    pub es: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn identifier_metrics(prediction: &str, reference: &str, language: Language) -> IdentifierScores {
    let p = identifier_set(prediction, language);
    let r = identifier_set(reference, language);
    let overlap = p.intersection(&r).count();
    let (_, recall, f1) = overlap_scores(overlap, p.len(), r.len());
    let joined = |s: &BTreeSet<String>| s.iter().map(String::as_str).collect::<Vec<_>>().join(" ");
    IdentifierScores {
        em: if p == r { 100.0 } else { 0.0 },
        es: edit_similarity(&joined(&p), &joined(&r)),
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub code_em: f64,
    pub code_es: f64,
    pub code_recall: f64,
    pub code_f1: f64,
    pub id_em: f64,
    pub id_es: f64,
    pub id_recall: f64,
    pub id_f1: f64,
}

impl EvalMetrics {
    pub fn compute(prediction: &str, reference: &str, language: Language, norm: EmNormalization) -> Self {
        let code_em = exact_match_with(prediction, reference, norm);
        let (code_recall, code_f1) = token_recall_f1(prediction, reference);
        let ids = identifier_metrics(prediction, reference, language);
        let mut m = Self {
            code_em,
            code_es: edit_similarity(prediction, reference),
            code_recall,
            code_f1,
            id_em: ids.em,
            id_es: ids.es,
            id_recall: ids.recall,
            id_f1: ids.f1,
        };
        // Whitespace-equal strings can differ by characters; an exact match
        // scores full marks everywhere.
        if code_em == 100.0 {
            m.code_es = 100.0;
            m.code_recall = 100.0;
            m.code_f1 = 100.0;
        }
        m
    }

    pub fn mean(items: &[EvalMetrics]) -> Option<EvalMetrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: fn(&EvalMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(EvalMetrics {
            code_em: avg(|m| m.code_em),
            code_es: avg(|m| m.code_es),
            code_recall: avg(|m| m.code_recall),
            code_f1: avg(|m| m.code_f1),
            id_em: avg(|m| m.id_em),
            id_es: avg(|m| m.id_es),
            id_recall: avg(|m| m.id_recall),
            id_f1: avg(|m| m.id_f1),
        })
    }
}

/// Anything that covers a line interval of one file.
pub trait LineSpan {
    fn span_file(&self) -> &str;
    fn span_interval(&self) -> LineInterval;
}

impl LineSpan for Chunk {
    fn span_file(&self) -> &str {
        &self.file
    }
    fn span_interval(&self) -> LineInterval {
        self.interval
    }
}

impl LineSpan for RankedChunk {
    fn span_file(&self) -> &str {
        &self.chunk.file
    }
    fn span_interval(&self) -> LineInterval {
        self.chunk.interval
    }
}

impl LineSpan for FusedBlock {
    fn span_file(&self) -> &str {
        &self.file
    }
    fn span_interval(&self) -> LineInterval {
        self.interval
    }
}

/// One golden-context fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub file: String,
    pub start: usize,
    pub end: usize,
}

impl LineSpan for GoldSpan {
    fn span_file(&self) -> &str {
        &self.file
    }
    fn span_interval(&self) -> LineInterval {
        LineInterval {
            start: self.start,
            end: self.end,
        }
    }
}

fn line_set<S: LineSpan>(spans: &[S]) -> HashSet<(&str, usize)> {
    spans
        .iter()
        .flat_map(|s| s.span_interval().lines().map(move |l| (s.span_file(), l)))
        .collect()
}

/// Exact coverage counts: `covered` of `total` gold lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coverage {
    pub covered: usize,
    pub total: usize,
}

impl Coverage {
    pub fn ratio(&self) -> f64 {
        self.covered as f64 / self.total as f64
    }
}

/// `|Lines(retrieved) ∩ Lines(gold)| / |Lines(gold)|` over (file, line)
/// pairs. `None` when the gold set covers no lines.
pub fn coverage<R: LineSpan, G: LineSpan>(retrieved: &[R], gold: &[G]) -> Option<Coverage> {
    let gold_lines = line_set(gold);
    if gold_lines.is_empty() {
        return None;
    }
    let retrieved_lines = line_set(retrieved);
    Some(Coverage {
        covered: gold_lines.intersection(&retrieved_lines).count(),
        total: gold_lines.len(),
    })
}

pub fn coverage_ratio<R: LineSpan, G: LineSpan>(retrieved: &[R], gold: &[G]) -> Option<f64> {
    coverage(retrieved, gold).map(|c| c.ratio())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    /// The gold context never reached the candidate pool.
    RecallFailure,
    /// The gold context was in the pool but not in the final Top-K.
    RerankFailure,
}

pub fn classify_failure(pool_coverage: f64, topk_coverage: f64, tau: f64) -> Option<FailureClass> {
    if pool_coverage < tau {
        Some(FailureClass::RecallFailure)
    } else if topk_coverage < tau {
        Some(FailureClass::RerankFailure)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageReport {
    pub ratio: f64,
    pub tau: f64,
    pub covered: bool,
    pub failure_class: Option<FailureClass>,
}

impl CoverageReport {
    /// Report for the final context, classified against the pool coverage.
    pub fn new(pool_ratio: f64, topk_ratio: f64, tau: f64) -> Self {
        Self {
            ratio: topk_ratio,
            tau,
            covered: topk_ratio >= tau,
            failure_class: classify_failure(pool_ratio, topk_ratio, tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTiming {
    pub wall_seconds: f64,
    /// Process CPU time, where the platform exposes it.
    pub cpu_seconds: Option<f64>,
}

#[cfg(unix)]
fn process_cpu_seconds() -> Option<f64> {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    (rc == 0).then_some(ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9)
}

#[cfg(not(unix))]
fn process_cpu_seconds() -> Option<f64> {
    None
}

/// Runs `work` and measures it.
pub fn time_phase<T>(work: impl FnOnce() -> T) -> (T, PhaseTiming) {
    let cpu_start = process_cpu_seconds();
    let start = Instant::now();
    let out = work();
    let wall_seconds = start.elapsed().as_secs_f64();
    let cpu_seconds = match (cpu_start, process_cpu_seconds()) {
        (Some(a), Some(b)) => Some((b - a).max(0.0)),
        _ => None,
    };
    (out, PhaseTiming { wall_seconds, cpu_seconds })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LatencyRecord {
    pub task_id: String,
    /// Everything except query generation.
    pub retrieval_seconds: f64,
    /// Query generation.
    pub generation_seconds: Option<f64>,
    pub phase_breakdown: BTreeMap<String, f64>,
}

impl LatencyRecord {
    pub fn new(task_id: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            ..Self::default()
        }
    }

    pub fn record(&mut self, phase: &str, timing: PhaseTiming) {
        *self.phase_breakdown.entry(phase.to_owned()).or_insert(0.0) += timing.wall_seconds;
    }

    pub fn total_seconds(&self) -> f64 {
        self.retrieval_seconds + self.generation_seconds.unwrap_or(0.0)
    }
}
