//! End-to-end retrieval for one completion site.
//!
//! `naive`: queries → search → Jaccard ranking → Top-K → pack.
//! `full`:  queries → search → BM25 ranking → Top-N% fusion → Top-K → pack.

use std::path::Path;

use serde::Serialize;

use crate::assemble::{assemble_context, ContextPack};
use crate::config::{Mode, PipelineConfig};
use crate::corpus::{scan_repo, RepoSnapshot};
use crate::error::{Error, Result};
use crate::fuse::{dedup_pipeline, FusedBlock};
use crate::metrics::{time_phase, LatencyRecord};
use crate::querygen::{trailing_window, CompletionTask, GeneratorSource, QueryGenerator, QuerySet};
use crate::rank::{bm25_rank, jaccard_rank, multiset_jaccard_rank, tokenize, RankedChunk};
use crate::search::{execute_query_set, Chunk};

pub const PHASE_SCAN: &str = "scan";
pub const PHASE_QUERY_GENERATION: &str = "query_generation";
pub const PHASE_SEARCH: &str = "search";
pub const PHASE_RANK: &str = "rank";
pub const PHASE_FUSE: &str = "fuse";
pub const PHASE_ASSEMBLE: &str = "assemble";

#[derive(Debug, Clone, Serialize)]
pub struct RetrievalOutcome {
    pub queries: QuerySet,
    #[serde(skip)]
    pub pool: Vec<Chunk>,
    #[serde(skip)]
    pub ranked: Vec<RankedChunk>,
    pub pack: ContextPack,
    pub latency: LatencyRecord,
    /// No queries or no hits; callers fall back to completion without
    /// retrieved context.
    pub retrieval_empty: bool,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    generator: QueryGenerator,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, generator: QueryGenerator) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, generator })
    }

    /// Heuristic generator, no environment lookup.
    pub fn heuristic(cfg: PipelineConfig) -> Result<Self> {
        let generator = cfg.query_generator(None)?;
        Self::new(cfg, generator)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn generator(&self) -> &QueryGenerator {
        &self.generator
    }

    fn check_task(&self, snapshot: &RepoSnapshot, task: &CompletionTask) -> Result<()> {
        if let Some(file) = snapshot.file(&task.file) {
            let lines = file.line_count();
            if task.line == 0 || task.line > lines + 1 {
                return Err(Error::InvalidTask {
                    task_id: task.task_id.clone(),
                    reason: format!("cursor line {} outside `{}` ({lines} lines)", task.line, task.file),
                });
            }
        }
        Ok(())
    }

    pub fn generate_queries(&self, task: &CompletionTask) -> Result<QuerySet> {
        if task.local_context.trim().is_empty() {
            let source = match self.generator {
                QueryGenerator::Heuristic(_) => GeneratorSource::Heuristic,
                QueryGenerator::External(_) => GeneratorSource::External,
            };
            return Ok(QuerySet::empty(&task.task_id, source));
        }
        self.generator.generate(task, self.cfg.m)
    }

    /// Ranks, fuses (full mode) and assembles an already executed pool.
    pub fn post_process(
        &self,
        snapshot: &RepoSnapshot,
        task: &CompletionTask,
        pool: &[Chunk],
        latency: &mut LatencyRecord,
    ) -> Result<(Vec<RankedChunk>, ContextPack)> {
        let cfg = &self.cfg;
        let query_tokens = tokenize(trailing_window(&task.local_context, cfg.window_lines));
        let (ranked, t) = time_phase(|| match cfg.mode {
            Mode::Naive if cfg.jaccard_multiset => multiset_jaccard_rank(pool, &query_tokens),
            Mode::Naive => jaccard_rank(pool, &query_tokens),
            Mode::Full => bm25_rank(pool, &query_tokens),
        });
        latency.record(PHASE_RANK, t);

        let (blocks, t) = time_phase(|| -> Result<Vec<FusedBlock>> {
            match cfg.mode {
                Mode::Naive => Ok(ranked.iter().map(FusedBlock::from_ranked).collect()),
                Mode::Full => dedup_pipeline(&ranked, snapshot, &cfg.fusion()),
            }
        });
        let blocks = blocks?;
        latency.record(PHASE_FUSE, t);

        let (pack, t) = time_phase(|| {
            assemble_context(&task.task_id, &blocks, cfg.top_k, cfg.budget, cfg.prompt_order)
        });
        latency.record(PHASE_ASSEMBLE, t);
        Ok((ranked, pack))
    }

    /// Runs retrieval for one task over an existing snapshot.
    pub fn retrieve(&self, snapshot: &RepoSnapshot, task: &CompletionTask) -> Result<RetrievalOutcome> {
        self.check_task(snapshot, task)?;
        let mut latency = LatencyRecord::new(&task.task_id);

        let (queries, t) = time_phase(|| self.generate_queries(task));
        let queries = queries?;
        latency.record(PHASE_QUERY_GENERATION, t);
        latency.generation_seconds = Some(t.wall_seconds);

        let (pool, t) = time_phase(|| execute_query_set(snapshot, &queries, &self.cfg.search_options()));
        latency.record(PHASE_SEARCH, t);

        let (ranked, pack) = self.post_process(snapshot, task, &pool, &mut latency)?;
        latency.retrieval_seconds = latency
            .phase_breakdown
            .iter()
            .filter(|(k, _)| k.as_str() != PHASE_QUERY_GENERATION)
            .map(|(_, v)| v)
            .sum();

        Ok(RetrievalOutcome {
            retrieval_empty: queries.is_empty() || pool.is_empty(),
            queries,
            pool,
            ranked,
            pack,
            latency,
        })
    }

    /// Scans `repo` and retrieves for `task`; scan time is part of the
    /// reported retrieval latency.
    pub fn retrieve_from_disk(&self, repo: &Path, task: &CompletionTask) -> Result<(RepoSnapshot, RetrievalOutcome)> {
        let (snapshot, scan) = time_phase(|| scan_repo(repo, &self.cfg.scan_options()));
        let snapshot = snapshot?;
        let mut outcome = self.retrieve(&snapshot, task)?;
        outcome.latency.record(PHASE_SCAN, scan);
        outcome.latency.retrieval_seconds += scan.wall_seconds;
        Ok((snapshot, outcome))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceFile;

    fn deck_repo() -> RepoSnapshot {
        RepoSnapshot::from_files(
            "/repo",
            vec![
                SourceFile::new(
                    "cards/deck.py",
                    "import random\n\nclass Deck:\n    def __init__(self, cards):\n        self.cards = list(cards)\n\n    def draw(self):\n        return self.cards.pop()\n\n    def shuffle(self):\n        random.shuffle(self.cards)\n",
                ),
                SourceFile::new("util.py", "def helper():\n    return 1\n"),
            ],
        )
        .unwrap()
    }

    fn game_task() -> CompletionTask {
        CompletionTask::new(
            "fig2",
            "game.py",
            "from cards.deck import Deck\n\nclass Game:\n    def __init__(self, deck: Deck):\n        self.deck = deck\n\n    def turn(self):\n        card = self.deck.draw(",
        )
    }

    #[test]
    fn top_block_holds_class_definition() {
        let snap = deck_repo();
        for mode in [Mode::Full, Mode::Naive] {
            let p = Pipeline::heuristic(PipelineConfig { mode, ..Default::default() }).unwrap();
            let out = p.retrieve(&snap, &game_task()).unwrap();
            assert!(!out.retrieval_empty);
            let top = &out.pack.blocks[0];
            assert_eq!(top.file, "cards/deck.py");
            assert!(top.text.contains("class Deck:"), "{mode:?}: {}", top.text);
            assert!(out.pack.token_count <= 4096);
        }
    }

    #[test]
    fn empty_query_yield() {
        let snap = deck_repo();
        let p = Pipeline::heuristic(PipelineConfig::default()).unwrap();
        let task = CompletionTask::new("t", "x.py", "1 + 2");
        let out = p.retrieve(&snap, &task).unwrap();
        assert!(out.retrieval_empty);
        assert!(out.pack.blocks.is_empty());
        assert_eq!(out.pack.token_count, 0);

        let blank = CompletionTask::new("t", "x.py", "   \n");
        assert!(p.retrieve(&snap, &blank).unwrap().retrieval_empty);
    }

    #[test]
    fn no_hits_is_empty() {
        let snap = deck_repo();
        let p = Pipeline::heuristic(PipelineConfig::default()).unwrap();
        let task = CompletionTask::new("t", "x.py", "zzqq_unmatched = 1");
        let out = p.retrieve(&snap, &task).unwrap();
        assert!(out.retrieval_empty);
        assert!(!out.queries.is_empty());
    }

    #[test]
    fn cursor_outside_file_rejected() {
        let snap = deck_repo();
        let p = Pipeline::heuristic(PipelineConfig::default()).unwrap();
        let mut task = game_task();
        task.file = "util.py".into();
        task.line = 40;
        assert!(matches!(p.retrieve(&snap, &task), Err(Error::InvalidTask { .. })));
    }

    #[test]
    fn latency_phases_recorded() {
        let snap = deck_repo();
        let p = Pipeline::heuristic(PipelineConfig::default()).unwrap();
        let out = p.retrieve(&snap, &game_task()).unwrap();
        let phases: Vec<&str> = out.latency.phase_breakdown.keys().map(String::as_str).collect();
        assert_eq!(phases, vec!["assemble", "fuse", "query_generation", "rank", "search"]);
        let sum: f64 = out.latency.phase_breakdown.values().sum();
        assert!((sum - out.latency.total_seconds()).abs() < 1e-9);
    }
}
