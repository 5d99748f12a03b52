//! Structure-aware de-duplication: overlapping or adjacent chunks of the same
//! file inside the top slice of a ranked list are merged into contiguous
//! blocks re-sliced from the source.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{LineInterval, RepoSnapshot};
use crate::error::{Error, Result};
use crate::rank::RankedChunk;

pub const DEFAULT_TOP_PERCENT: f64 = 50.0;
pub const DEFAULT_ADJACENCY_GAP: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Percentage of the ranked list admitted to fusion, in `(0, 100]`.
    pub top_percent: f64,
    /// Two intervals of one file merge when `next.start - prev.end <= gap`.
    /// With the default of 1, touching intervals merge.
    pub adjacency_gap: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            top_percent: DEFAULT_TOP_PERCENT,
            adjacency_gap: DEFAULT_ADJACENCY_GAP,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        validate_percent(self.top_percent)
    }
}

fn validate_percent(n: f64) -> Result<()> {
    if n > 0.0 && n <= 100.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "N",
            reason: format!("top percent must be in (0, 100], got {n}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedBlock {
    pub file: String,
    pub interval: LineInterval,
    pub text: String,
    pub merged_from: Vec<String>,
    pub best_rank: usize,
    pub score: f64,
}

impl FusedBlock {
    /// Wraps a single ranked chunk unchanged.
    pub fn from_ranked(r: &RankedChunk) -> Self {
        Self {
            file: r.chunk.file.clone(),
            interval: r.chunk.interval,
            text: r.chunk.text.clone(),
            merged_from: vec![r.chunk.chunk_id.clone()],
            best_rank: r.rank,
            score: r.score,
        }
    }
}

/// First `ceil(len * n / 100)` entries, order preserved.
pub fn select_top_percent(ranked: &[RankedChunk], n: f64) -> Result<Vec<RankedChunk>> {
    validate_percent(n)?;
    Ok(ranked[..top_percent_count(ranked.len(), n)].to_vec())
}

pub(crate) fn top_percent_count(len: usize, n: f64) -> usize {
    // The epsilon absorbs representation error in `n` (e.g. 70.0000000001)
    // so exact products like 10 * 70% do not round up.
    let raw = len as f64 * n / 100.0;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(len)
}

/// Merges chunks of the same file whose intervals overlap or lie within
/// `gap` lines (`next.start - prev.end <= gap`), transitively. Blocks are
/// re-sliced from the snapshot and ordered by best constituent rank.
pub fn merge_intervals(
    chunks: &[RankedChunk],
    snapshot: &RepoSnapshot,
    gap: usize,
) -> Result<Vec<FusedBlock>> {
    let mut by_file: BTreeMap<&str, Vec<&RankedChunk>> = BTreeMap::new();
    for c in chunks {
        by_file.entry(c.chunk.file.as_str()).or_default().push(c);
    }

    let mut blocks = Vec::new();
    for (file, mut members) in by_file {
        members.sort_by_key(|c| (c.chunk.interval.start, c.chunk.interval.end, c.rank));
        let mut groups: Vec<(LineInterval, Vec<&RankedChunk>)> = Vec::new();
        for c in members {
            let iv = c.chunk.interval;
            match groups.last_mut() {
                Some((hull, group)) if iv.start <= hull.end + gap => {
                    *hull = hull.hull(&iv);
                    group.push(c);
                }
                _ => groups.push((iv, vec![c])),
            }
        }
        for (interval, mut group) in groups {
            group.sort_by_key(|c| c.rank);
            blocks.push(FusedBlock {
                file: file.to_owned(),
                interval,
                text: snapshot.slice(file, interval)?,
                merged_from: group.iter().map(|c| c.chunk.chunk_id.clone()).collect(),
                best_rank: group[0].rank,
                score: group.iter().map(|c| c.score).fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    blocks.sort_by(|a, b| {
        a.best_rank
            .cmp(&b.best_rank)
            .then_with(|| a.file.cmp(&b.file))
            .then(a.interval.cmp(&b.interval))
    });
    Ok(blocks)
}

/// `merge_intervals(select_top_percent(ranked, N), snapshot, G)`.
pub fn dedup_pipeline(
    ranked: &[RankedChunk],
    snapshot: &RepoSnapshot,
    cfg: &FusionConfig,
) -> Result<Vec<FusedBlock>> {
    let selected = select_top_percent(ranked, cfg.top_percent)?;
    merge_intervals(&selected, snapshot, cfg.adjacency_gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceFile;
    use crate::rank::RankMethod;
    use crate::search::Chunk;
    use proptest::prelude::*;
    use std::collections::{BTreeSet, HashSet};

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("L{i}\n")).collect()
    }

    fn snapshot(files: &[(&str, usize)]) -> RepoSnapshot {
        RepoSnapshot::from_files(
            "/r",
            files.iter().map(|(p, n)| SourceFile::new(*p, numbered(*n))).collect(),
        )
        .unwrap()
    }

    fn ranked(snap: &RepoSnapshot, items: &[(&str, usize, usize)]) -> Vec<RankedChunk> {
        items
            .iter()
            .enumerate()
            .map(|(i, (file, s, e))| {
                let interval = LineInterval::new(*s, *e);
                RankedChunk {
                    chunk: Chunk {
                        chunk_id: format!("c{i}"),
                        file: file.to_string(),
                        interval,
                        text: snap.slice(file, interval).unwrap(),
                        provenance: BTreeSet::from(["q".to_owned()]),
                        hit_line: *s,
                    },
                    score: 1.0 / (i + 1) as f64,
                    method: RankMethod::Bm25,
                    rank: i + 1,
                }
            })
            .collect()
    }

    fn intervals(blocks: &[FusedBlock]) -> Vec<(&str, usize, usize)> {
        blocks.iter().map(|b| (b.file.as_str(), b.interval.start, b.interval.end)).collect()
    }

    #[test]
    fn top_percent_examples() {
        let snap = snapshot(&[("a.py", 100)]);
        let items: Vec<(&str, usize, usize)> = (0..10).map(|i| ("a.py", i * 10 + 1, i * 10 + 2)).collect();
        let r = ranked(&snap, &items);
        assert_eq!(select_top_percent(&r, 50.0).unwrap().len(), 5);
        assert_eq!(select_top_percent(&r, 100.0).unwrap().len(), 10);
        assert_eq!(select_top_percent(&r[..3], 50.0).unwrap().len(), 2);
        assert_eq!(select_top_percent(&r, 70.0).unwrap().len(), 7);
        assert!(select_top_percent(&[], 50.0).unwrap().is_empty());
        assert!(select_top_percent(&r, 0.0).is_err());
        assert!(select_top_percent(&r, 100.5).is_err());
        let top = select_top_percent(&r, 30.0).unwrap();
        assert_eq!(top.iter().map(|c| c.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn overlapping_chunks_fuse_once() {
        let snap = snapshot(&[("main.py", 30)]);
        let r = ranked(&snap, &[("main.py", 6, 12), ("main.py", 5, 8)]);
        let blocks = merge_intervals(&r, &snap, 1).unwrap();
        assert_eq!(intervals(&blocks), vec![("main.py", 5, 12)]);
        assert_eq!(blocks[0].text, snap.slice("main.py", LineInterval::new(5, 12)).unwrap());
        assert_eq!(blocks[0].text.matches("L6\n").count(), 1);
        assert_eq!(blocks[0].merged_from, vec!["c0", "c1"]);
        assert_eq!(blocks[0].best_rank, 1);
        assert_eq!(blocks[0].score, 1.0);
    }

    #[test]
    fn adjacency_rule() {
        let snap = snapshot(&[("a.py", 40)]);
        let r = ranked(&snap, &[("a.py", 10, 20), ("a.py", 21, 25)]);
        assert_eq!(intervals(&merge_intervals(&r, &snap, 1).unwrap()), vec![("a.py", 10, 25)]);
        assert_eq!(intervals(&merge_intervals(&r, &snap, 0).unwrap()), vec![("a.py", 10, 20), ("a.py", 21, 25)]);
        let r = ranked(&snap, &[("a.py", 10, 20), ("a.py", 22, 25)]);
        assert_eq!(merge_intervals(&r, &snap, 1).unwrap().len(), 2);
        assert_eq!(intervals(&merge_intervals(&r, &snap, 2).unwrap()), vec![("a.py", 10, 25)]);
    }

    #[test]
    fn files_never_merge() {
        let snap = snapshot(&[("a.py", 30), ("b.py", 30)]);
        let r = ranked(&snap, &[("a.py", 10, 20), ("b.py", 10, 20)]);
        assert_eq!(merge_intervals(&r, &snap, 1).unwrap().len(), 2);
    }

    #[test]
    fn definition_absorbed_into_usage_block() {
        // Usage chunk outranks the overlapping definition chunk.
        let snap = snapshot(&[("main.py", 30)]);
        let r = ranked(&snap, &[("main.py", 9, 16), ("main.py", 1, 10)]);
        let blocks = dedup_pipeline(&r, &snap, &FusionConfig { top_percent: 100.0, adjacency_gap: 1 }).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].interval, LineInterval::new(1, 16));
        let def = blocks[0].text.find("L1\n").unwrap();
        let usage = blocks[0].text.find("L12\n").unwrap();
        assert!(def < usage);
        assert_eq!(blocks[0].best_rank, 1);
    }

    #[test]
    fn no_overlap_is_identity() {
        let snap = snapshot(&[("a.py", 100), ("b.py", 100)]);
        let r = ranked(&snap, &[("b.py", 50, 60), ("a.py", 1, 5), ("a.py", 40, 45)]);
        let blocks = dedup_pipeline(&r, &snap, &FusionConfig { top_percent: 100.0, adjacency_gap: 1 }).unwrap();
        let wrapped: Vec<FusedBlock> = r.iter().map(FusedBlock::from_ranked).collect();
        assert_eq!(blocks, wrapped);
    }

    #[test]
    fn small_n_keeps_one_block() {
        let snap = snapshot(&[("a.py", 100)]);
        let r = ranked(&snap, &[("a.py", 1, 5), ("a.py", 40, 45), ("a.py", 70, 75)]);
        let blocks = dedup_pipeline(&r, &snap, &FusionConfig { top_percent: 10.0, adjacency_gap: 1 }).unwrap();
        assert_eq!(intervals(&blocks), vec![("a.py", 1, 5)]);
    }

    #[test]
    fn blocks_ordered_by_best_rank() {
        let snap = snapshot(&[("a.py", 100), ("b.py", 100)]);
        let r = ranked(&snap, &[("b.py", 50, 60), ("a.py", 1, 5), ("b.py", 55, 70), ("a.py", 3, 9)]);
        let blocks = merge_intervals(&r, &snap, 1).unwrap();
        assert_eq!(intervals(&blocks), vec![("b.py", 50, 70), ("a.py", 1, 9)]);
        assert_eq!(blocks[1].best_rank, 2);
    }

    /// Per-line union, then gap-filling and segmentation.
    fn oracle(items: &[(usize, usize, usize)], gap: usize) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        let files: HashSet<usize> = items.iter().map(|i| i.0).collect();
        for f in files {
            let mut covered = vec![false; 600];
            for &(g, s, e) in items {
                if g == f {
                    for l in s..=e {
                        covered[l] = true;
                    }
                }
            }
            let lines: Vec<usize> = (1..600).filter(|&l| covered[l]).collect();
            let mut start = lines[0];
            let mut prev = lines[0];
            for &l in &lines[1..] {
                if l - prev > gap {
                    out.insert((f, start, prev));
                    start = l;
                }
                prev = l;
            }
            out.insert((f, start, prev));
        }
        out
    }

    proptest! {
        #[test]
        fn matches_union_oracle(
            raw in proptest::collection::vec((0usize..3, 1usize..500, 0usize..40), 1..50),
            gap in 1usize..4,
        ) {
            let snap = snapshot(&[("f0.py", 540), ("f1.py", 540), ("f2.py", 540)]);
            let items: Vec<(usize, usize, usize)> = raw.iter().map(|&(f, s, len)| (f, s, (s + len).min(540))).collect();
            let names: Vec<String> = items.iter().map(|i| format!("f{}.py", i.0)).collect();
            let spec: Vec<(&str, usize, usize)> = items.iter().zip(&names).map(|(i, n)| (n.as_str(), i.1, i.2)).collect();
            let r = ranked(&snap, &spec);
            let blocks = merge_intervals(&r, &snap, gap).unwrap();
            let got: BTreeSet<(usize, usize, usize)> = blocks
                .iter()
                .map(|b| (b.file[1..2].parse().unwrap(), b.interval.start, b.interval.end))
                .collect();
            prop_assert_eq!(got.len(), blocks.len());
            prop_assert_eq!(got, oracle(&items, gap));
            for b in &blocks {
                prop_assert_eq!(&b.text, &snap.slice(&b.file, b.interval).unwrap());
                prop_assert!(!b.merged_from.is_empty());
            }
            // Idempotence.
            let again: Vec<RankedChunk> = blocks.iter().enumerate().map(|(i, b)| RankedChunk {
                chunk: Chunk { chunk_id: format!("b{i}"), file: b.file.clone(), interval: b.interval, text: b.text.clone(), provenance: BTreeSet::from(["q".to_owned()]), hit_line: b.interval.start },
                score: b.score,
                method: RankMethod::Bm25,
                rank: i + 1,
            }).collect();
            let twice = dedup_pipeline(&again, &snap, &FusionConfig { top_percent: 100.0, adjacency_gap: gap }).unwrap();
            prop_assert_eq!(intervals(&twice), intervals(&blocks));
        }
    }
}
