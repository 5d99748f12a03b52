//! Index-free, line-oriented execution of a query set over a snapshot.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{LineInterval, RepoSnapshot, SourceFile};
use crate::querygen::{LexicalQuery, QuerySet};

pub const DEFAULT_BEFORE: usize = 3;
pub const DEFAULT_AFTER: usize = 10;
pub const DEFAULT_HIT_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchHit {
    pub query_id: String,
    pub file: String,
    pub line: usize,
    pub text: String,
}

/// A contiguous line interval of one file, with the queries that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub file: String,
    pub interval: LineInterval,
    pub text: String,
    pub provenance: BTreeSet<String>,
    pub hit_line: usize,
}

impl Chunk {
    pub fn chunk_id_for(file: &str, interval: LineInterval) -> String {
        format!("{file}:{interval}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub before: usize,
    pub after: usize,
    /// Maximum hits kept per query, in (path, line) order.
    pub hit_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            before: DEFAULT_BEFORE,
            after: DEFAULT_AFTER,
            hit_cap: DEFAULT_HIT_CAP,
        }
    }
}

/// Lines of `file` matched by `query`, ascending, at most `limit`.
fn matching_lines(file: &SourceFile, query: &LexicalQuery, limit: usize) -> Vec<usize> {
    let regex = query.regex();
    let text = file.text();
    let mut lines = Vec::new();
    let mut pos = 0;
    // A whole-text search finds candidate lines quickly; each candidate is
    // confirmed against its own line so matches never span lines.
    while pos <= text.len() && lines.len() < limit {
        let Some(m) = regex.find_at(text, pos) else {
            break;
        };
        let line = file.line_of_offset(m.start());
        if line > file.line_count() {
            break;
        }
        if regex.is_match(file.line(line).unwrap_or("")) {
            lines.push(line);
        }
        let next = file.next_line_start(line);
        if next <= pos || next >= text.len() {
            break;
        }
        pos = next;
    }
    lines
}

/// Every line of every file matching the query, ordered by (path, line),
/// truncated to `hit_cap` hits.
pub fn execute_query(snapshot: &RepoSnapshot, query: &LexicalQuery, hit_cap: usize) -> Vec<MatchHit> {
    let mut hits = Vec::new();
    for file in snapshot.files() {
        if hits.len() >= hit_cap {
            break;
        }
        for line in matching_lines(file, query, hit_cap - hits.len()) {
            hits.push(MatchHit {
                query_id: query.query_id().to_owned(),
                file: file.path().to_owned(),
                line,
                text: file.line(line).unwrap_or_default().to_owned(),
            });
        }
    }
    hits
}

/// Expands a hit into `[line - before, line + after]`, clipped to the file.
pub fn expand_hit(snapshot: &RepoSnapshot, hit: &MatchHit, before: usize, after: usize) -> Chunk {
    let file = snapshot
        .file(&hit.file)
        .unwrap_or_else(|| panic!("hit refers to unknown file {}", hit.file));
    let interval = LineInterval::new(
        hit.line.saturating_sub(before).max(1),
        (hit.line + after).min(file.line_count()),
    );
    Chunk {
        chunk_id: Chunk::chunk_id_for(&hit.file, interval),
        file: hit.file.clone(),
        interval,
        text: file.slice(interval).expect("interval clipped to file"),
        provenance: BTreeSet::from([hit.query_id.clone()]),
        hit_line: hit.line,
    }
}

/// Runs every query and coalesces chunks with identical (file, interval).
/// The pool is ordered by (file, start, end).
pub fn execute_query_set(snapshot: &RepoSnapshot, queries: &QuerySet, opts: &SearchOptions) -> Vec<Chunk> {
    let per_query: Vec<Vec<Chunk>> = queries
        .queries
        .par_iter()
        .map(|q| {
            execute_query(snapshot, q, opts.hit_cap)
                .iter()
                .map(|hit| expand_hit(snapshot, hit, opts.before, opts.after))
                .collect()
        })
        .collect();

    let mut pool: BTreeMap<(String, LineInterval), Chunk> = BTreeMap::new();
    for chunk in per_query.into_iter().flatten() {
        match pool.entry((chunk.file.clone(), chunk.interval)) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let existing = e.get_mut();
                existing.provenance.extend(chunk.provenance);
                existing.hit_line = existing.hit_line.min(chunk.hit_line);
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(chunk);
            }
        }
    }
    pool.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceFile;
    use crate::querygen::{GeneratorSource, KeywordKind};
    use proptest::prelude::*;

    fn query(id: &str, pattern: &str) -> LexicalQuery {
        LexicalQuery::new(id, pattern, KeywordKind::Other, true).unwrap()
    }

    fn snapshot(files: &[(&str, &str)]) -> RepoSnapshot {
        RepoSnapshot::from_files(
            "/repo",
            files.iter().map(|(p, t)| SourceFile::new(*p, *t)).collect(),
        )
        .unwrap()
    }

    fn set(queries: Vec<LexicalQuery>) -> QuerySet {
        QuerySet {
            task_id: "t".into(),
            queries,
            source: GeneratorSource::Heuristic,
            warnings: vec![],
        }
    }

    fn numbered(n: usize) -> String {
        (1..=n).map(|i| format!("line {i}\n")).collect()
    }

    #[test]
    fn finds_class_definition() {
        let snap = snapshot(&[("deck.py", "import random\n\nclass Deck:\n    def draw(self):\n")]);
        let hits = execute_query(&snap, &query("q1", "Deck"), 200);
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].file.as_str(), hits[0].line), ("deck.py", 3));
        assert_eq!(hits[0].text, "class Deck:");
    }

    #[test]
    fn no_match() {
        let snap = snapshot(&[("a.py", "x\n")]);
        assert!(execute_query(&snap, &query("q", "zzz"), 200).is_empty());
    }

    #[test]
    fn hits_in_line_order() {
        let snap = snapshot(&[("a.py", "x\ny\nz\nx\n")]);
        let lines: Vec<usize> = execute_query(&snap, &query("q", "x"), 200)
            .iter()
            .map(|h| h.line)
            .collect();
        assert_eq!(lines, vec![1, 4]);
    }

    #[test]
    fn patterns_never_span_lines() {
        let snap = snapshot(&[("a.py", "class\nDeck\nclass  Deck\n")]);
        let hits = execute_query(&snap, &query("q", r"class\s+Deck"), 200);
        assert_eq!(hits.iter().map(|h| h.line).collect::<Vec<_>>(), vec![3]);
        let hits = execute_query(&snap, &query("q", r"^Deck$"), 200);
        assert_eq!(hits.iter().map(|h| h.line).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn empty_matching_pattern_hits_every_line() {
        let snap = snapshot(&[("a.py", "a\n\nb\n")]);
        assert_eq!(execute_query(&snap, &query("q", "x*"), 200).len(), 3);
    }

    #[test]
    fn hit_cap_truncates_in_path_order() {
        let snap = snapshot(&[("a.py", "x\nx\nx\n"), ("b.py", "x\nx\n")]);
        let hits = execute_query(&snap, &query("q", "x"), 4);
        let got: Vec<(&str, usize)> = hits.iter().map(|h| (h.file.as_str(), h.line)).collect();
        assert_eq!(got, vec![("a.py", 1), ("a.py", 2), ("a.py", 3), ("b.py", 1)]);
    }

    #[test]
    fn case_insensitive_queries() {
        let snap = snapshot(&[("a.py", "DECK\ndeck\n")]);
        let q = LexicalQuery::new("q", "deck", KeywordKind::Other, false).unwrap();
        assert_eq!(execute_query(&snap, &q, 200).len(), 2);
        assert_eq!(execute_query(&snap, &query("q", "deck"), 200).len(), 1);
    }

    #[test]
    fn expand_clips_to_file() {
        let snap = snapshot(&[("a.py", "1\n2\n3\n")]);
        let hit = MatchHit { query_id: "q".into(), file: "a.py".into(), line: 1, text: "1".into() };
        let chunk = expand_hit(&snap, &hit, 5, 5);
        assert_eq!(chunk.interval, LineInterval::new(1, 3));
        assert_eq!(chunk.text, "1\n2\n3");
    }

    #[test]
    fn expand_window_arithmetic() {
        let text = numbered(100);
        let snap = snapshot(&[("a.py", &text)]);
        let hit = MatchHit { query_id: "q".into(), file: "a.py".into(), line: 10, text: "line 10".into() };
        let chunk = expand_hit(&snap, &hit, 3, 10);
        assert_eq!(chunk.interval, LineInterval::new(7, 20));
        assert_eq!(chunk.hit_line, 10);
        assert_eq!(chunk.text, snap.slice("a.py", chunk.interval).unwrap());
        assert_eq!(chunk.provenance, BTreeSet::from(["q".to_owned()]));
    }

    #[test]
    fn same_line_two_queries() {
        let snap = snapshot(&[("deck.py", "import random\n\nclass Deck:\n    pass\n")]);
        let a = execute_query(&snap, &query("q1", "Deck"), 200);
        let b = execute_query(&snap, &query("q2", "class"), 200);
        let ca = expand_hit(&snap, &a[0], 3, 10);
        let cb = expand_hit(&snap, &b[0], 3, 10);
        assert_eq!(ca.interval, cb.interval);
        assert_ne!(ca.provenance, cb.provenance);

        let pool = execute_query_set(&snap, &set(vec![query("q1", "Deck"), query("q2", "class")]), &SearchOptions::default());
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].provenance.len(), 2);
    }

    #[test]
    fn disjoint_files_and_empty_set() {
        let snap = snapshot(&[("a.py", "foo\n"), ("b.py", "foo\n")]);
        let pool = execute_query_set(&snap, &set(vec![query("q1", "foo")]), &SearchOptions::default());
        assert_eq!(pool.len(), 2);
        assert!(execute_query_set(&snap, &set(vec![]), &SearchOptions::default()).is_empty());
    }

    #[test]
    fn pool_ordering() {
        let text = numbered(60);
        let snap = snapshot(&[("b.py", &text), ("a.py", &text)]);
        let pool = execute_query_set(
            &snap,
            &set(vec![query("q1", "line 50"), query("q2", "line 5$")]),
            &SearchOptions::default(),
        );
        let keys: Vec<(&str, usize)> = pool.iter().map(|c| (c.file.as_str(), c.interval.start)).collect();
        assert_eq!(keys, vec![("a.py", 2), ("a.py", 47), ("b.py", 2), ("b.py", 47)]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            lines in proptest::collection::vec("[abc \\.(]{0,6}", 0..40),
            pattern in prop::sample::select(vec!["a", "ab", "a.*c", "^b", "c$", r"\bab", "a|c", r"\(", "x", "b*"]),
            cap in 1usize..50,
        ) {
            let text = lines.join("\n");
            let snap = snapshot(&[("f.py", &text)]);
            let q = query("q", pattern);
            let got: Vec<usize> = execute_query(&snap, &q, cap).iter().map(|h| h.line).collect();
            let re = regex::Regex::new(pattern).unwrap();
            let expected: Vec<usize> = text
                .lines()
                .enumerate()
                .filter(|(_, l)| re.is_match(l))
                .map(|(i, _)| i + 1)
                .take(cap)
                .collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn chunk_text_is_slice(hit_line in 1usize..30, before in 0usize..8, after in 0usize..8) {
            let text = numbered(30);
            let snap = snapshot(&[("f.py", &text)]);
            let hit = MatchHit { query_id: "q".into(), file: "f.py".into(), line: hit_line, text: String::new() };
            let c = expand_hit(&snap, &hit, before, after);
            prop_assert!(c.interval.start <= hit_line && hit_line <= c.interval.end);
            prop_assert_eq!(c.text, snap.slice("f.py", c.interval).unwrap());
        }
    }
}
