//! Chunk scoring: Jaccard token-set similarity and pool-scoped BM25.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::search::Chunk;

/// Multiset of code tokens: maximal runs of alphanumerics and `_`, case
/// preserved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag {
    counts: BTreeMap<String, usize>,
    len: usize,
}

impl TokenBag {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self, token: &str) -> usize {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn distinct(&self) -> impl Iterator<Item = &str> + '_ {
        self.counts.keys().map(String::as_str)
    }

    pub fn distinct_len(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }
}

impl<'a> FromIterator<&'a str> for TokenBag {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        let mut bag = TokenBag::default();
        for tok in iter {
            *bag.counts.entry(tok.to_owned()).or_default() += 1;
            bag.len += 1;
        }
        bag
    }
}

/// Token strings of `text`, in order.
pub fn token_strs(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
}

pub fn tokenize(text: &str) -> TokenBag {
    token_strs(text).collect()
}

/// `|A ∩ B| / |A ∪ B|` over distinct tokens; 0 when both are empty.
pub fn jaccard_score(a: &TokenBag, b: &TokenBag) -> f64 {
    let inter = a.counts.keys().filter(|t| b.counts.contains_key(*t)).count();
    let union = a.distinct_len() + b.distinct_len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Multiset Jaccard `Σ min / Σ max`; 0 when both are empty.
pub fn multiset_jaccard_score(a: &TokenBag, b: &TokenBag) -> f64 {
    let mut min_sum = 0usize;
    let mut max_sum = 0usize;
    let keys: BTreeSet<&String> = a.counts.keys().chain(b.counts.keys()).collect();
    for k in keys {
        let x = a.count(k);
        let y = b.count(k);
        min_sum += x.min(y);
        max_sum += x.max(y);
    }
    if max_sum == 0 {
        0.0
    } else {
        min_sum as f64 / max_sum as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMethod {
    Jaccard,
    Bm25,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedChunk {
    pub chunk: Chunk,
    pub score: f64,
    pub method: RankMethod,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

fn tie_break(a: &Chunk, b: &Chunk) -> Ordering {
    a.file
        .cmp(&b.file)
        .then(a.interval.start.cmp(&b.interval.start))
        .then(a.interval.end.cmp(&b.interval.end))
}

fn into_ranked(pool: &[Chunk], scores: Vec<f64>, method: RankMethod) -> Vec<RankedChunk> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .total_cmp(&scores[i])
            .then_with(|| tie_break(&pool[i], &pool[j]))
    });
    order
        .into_iter()
        .enumerate()
        .map(|(pos, i)| RankedChunk {
            chunk: pool[i].clone(),
            score: scores[i],
            method,
            rank: pos + 1,
        })
        .collect()
}

/// Ranks the pool by Jaccard similarity against the context tokens.
pub fn jaccard_rank(pool: &[Chunk], context_tokens: &TokenBag) -> Vec<RankedChunk> {
    let scores = pool
        .iter()
        .map(|c| jaccard_score(&tokenize(&c.text), context_tokens))
        .collect();
    into_ranked(pool, scores, RankMethod::Jaccard)
}

/// Jaccard ranking over token multisets, for ablations.
pub fn multiset_jaccard_rank(pool: &[Chunk], context_tokens: &TokenBag) -> Vec<RankedChunk> {
    let scores = pool
        .iter()
        .map(|c| multiset_jaccard_score(&tokenize(&c.text), context_tokens))
        .collect();
    into_ranked(pool, scores, RankMethod::Jaccard)
}

/// Okapi BM25 where the candidate pool is the whole document collection.
///
/// Each distinct query term contributes
/// `idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))` with the
/// smoothed `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, so every score
/// is non-negative.
pub fn bm25_scores(docs: &[TokenBag], query: &TokenBag, params: Bm25Params) -> Vec<f64> {
    let n = docs.len() as f64;
    if docs.is_empty() {
        return Vec::new();
    }
    let avgdl = docs.iter().map(TokenBag::len).sum::<usize>() as f64 / n;

    let mut df: HashMap<&str, usize> = HashMap::new();
    for term in query.distinct() {
        df.insert(term, docs.iter().filter(|d| d.count(term) > 0).count());
    }
    let idf: Vec<(&str, f64)> = query
        .distinct()
        .map(|t| {
            let df = df[t] as f64;
            (t, (1.0 + (n - df + 0.5) / (df + 0.5)).ln())
        })
        .collect();

    docs.iter()
        .map(|doc| {
            let norm = if avgdl > 0.0 {
                1.0 - params.b + params.b * doc.len() as f64 / avgdl
            } else {
                1.0
            };
            idf.iter()
                .map(|&(term, idf)| {
                    let tf = doc.count(term) as f64;
                    if tf == 0.0 {
                        0.0
                    } else {
                        idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
                    }
                })
                .sum()
        })
        .collect()
}

pub fn bm25_rank_with(pool: &[Chunk], query_tokens: &TokenBag, params: Bm25Params) -> Vec<RankedChunk> {
    let docs: Vec<TokenBag> = pool.iter().map(|c| tokenize(&c.text)).collect();
    let scores = bm25_scores(&docs, query_tokens, params);
    into_ranked(pool, scores, RankMethod::Bm25)
}

/// BM25 ranking with `k1 = 1.2`, `b = 0.75`.
pub fn bm25_rank(pool: &[Chunk], query_tokens: &TokenBag) -> Vec<RankedChunk> {
    bm25_rank_with(pool, query_tokens, Bm25Params::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LineInterval;
    use proptest::prelude::*;

    fn chunk(file: &str, start: usize, text: &str) -> Chunk {
        let interval = LineInterval::new(start, start + text.lines().count().max(1) - 1);
        Chunk {
            chunk_id: Chunk::chunk_id_for(file, interval),
            file: file.into(),
            interval,
            text: text.into(),
            provenance: BTreeSet::from(["q1".to_owned()]),
            hit_line: start,
        }
    }

    fn bag(tokens: &[&str]) -> TokenBag {
        tokens.iter().copied().collect()
    }

    /// Straight transcription of the textbook formula, one term at a time.
    fn reference_bm25(docs: &[Vec<&str>], query: &[&str], k1: f64, b: f64) -> Vec<f64> {
        let n = docs.len() as f64;
        let avgdl: f64 = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
        let mut terms: Vec<&str> = query.to_vec();
        terms.sort();
        terms.dedup();
        docs.iter()
            .map(|d| {
                let mut s = 0.0;
                for t in &terms {
                    let nq = docs.iter().filter(|x| x.contains(t)).count() as f64;
                    let idf = ((n - nq + 0.5) / (nq + 0.5) + 1.0).ln();
                    let f = d.iter().filter(|x| *x == t).count() as f64;
                    let dl = d.len() as f64;
                    let denom = f + k1 * (1.0 - b + b * dl / avgdl);
                    if f > 0.0 {
                        s += idf * (f * (k1 + 1.0)) / denom;
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn tokenizer_examples() {
        let t = tokenize("self.deck.draw()");
        assert_eq!(t.distinct().collect::<Vec<_>>(), vec!["deck", "draw", "self"]);
        assert_eq!(t.len(), 3);
        assert!(tokenize("").is_empty());
        let t = tokenize("x = x + 1");
        assert_eq!(t.count("x"), 2);
        assert_eq!(t.count("1"), 1);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn tokenizer_preserves_case_and_does_not_split_identifiers() {
        let t = tokenize("loadConfig load_config LoadConfig");
        assert_eq!(t.distinct_len(), 3);
        assert_eq!(t.count("load"), 0);
    }

    #[test]
    fn jaccard_examples() {
        let a = bag(&["a", "b", "c"]);
        assert_eq!(jaccard_score(&a, &a), 1.0);
        assert_eq!(jaccard_score(&a, &bag(&["x", "y"])), 0.0);
        assert_eq!(jaccard_score(&a, &bag(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard_score(&TokenBag::default(), &TokenBag::default()), 0.0);
    }

    #[test]
    fn multiset_jaccard() {
        let a = bag(&["x", "x", "y"]);
        let b = bag(&["x", "y", "y"]);
        // min: x1 y1 = 2; max: x2 y2 = 4
        assert_eq!(multiset_jaccard_score(&a, &b), 0.5);
        assert_eq!(jaccard_score(&a, &b), 1.0);
    }

    #[test]
    fn bm25_three_document_oracle() {
        let docs = vec![
            vec!["deck", "draw", "card", "card"],
            vec!["deck", "shuffle", "random", "seed", "card"],
            vec!["config", "load", "path"],
        ];
        let query = vec!["deck", "draw", "card", "path"];
        let expected = reference_bm25(&docs, &query, 1.2, 0.75);
        let bags: Vec<TokenBag> = docs.iter().map(|d| bag(d)).collect();
        let got = bm25_scores(&bags, &bag(&query), Bm25Params::default());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0), "{g} vs {e}");
        }
        // Frozen from an offline evaluation of the same formula.
        let frozen = [2.0970878724703486, 0.8527900901778297, 1.0925692944940748];
        for (g, f) in got.iter().zip(frozen) {
            assert!((g - f).abs() < 1e-12, "{g} vs {f}");
        }
    }

    #[test]
    fn bm25_prefers_rare_identifier() {
        let pool = vec![
            chunk("a.py", 1, "config init run config init run"),
            chunk("b.py", 1, "config init run parse_manifest"),
        ];
        let query = tokenize("config init run parse_manifest");
        let ranked = bm25_rank(&pool, &query);
        assert_eq!(ranked[0].chunk.file, "b.py");
        assert_eq!(ranked[0].rank, 1);
        assert_eq!(ranked[0].method, RankMethod::Bm25);
    }

    #[test]
    fn zero_overlap_falls_back_to_tie_break() {
        let pool = vec![
            chunk("b.py", 1, "alpha"),
            chunk("a.py", 9, "beta"),
            chunk("a.py", 2, "gamma"),
        ];
        let ranked = bm25_rank(&pool, &tokenize("delta"));
        assert!(ranked.iter().all(|r| r.score == 0.0));
        let keys: Vec<(&str, usize)> = ranked.iter().map(|r| (r.chunk.file.as_str(), r.chunk.interval.start)).collect();
        assert_eq!(keys, vec![("a.py", 2), ("a.py", 9), ("b.py", 1)]);
        assert!(bm25_rank(&[], &tokenize("x")).is_empty());
    }

    #[test]
    fn jaccard_rank_examples() {
        let single = vec![chunk("a.py", 1, "nothing shared")];
        let ranked = jaccard_rank(&single, &tokenize("x"));
        assert_eq!(ranked[0].rank, 1);
        assert_eq!(ranked[0].method, RankMethod::Jaccard);

        let ctx = "self.deck.draw()";
        let pool = vec![chunk("a.py", 1, "unrelated words"), chunk("z.py", 1, ctx)];
        let ranked = jaccard_rank(&pool, &tokenize(ctx));
        assert_eq!(ranked[0].chunk.file, "z.py");
        assert_eq!(ranked[0].score, 1.0);

        let pool = vec![chunk("b.py", 3, "x"), chunk("a.py", 5, "x"), chunk("a.py", 1, "x")];
        let ranked = jaccard_rank(&pool, &tokenize("x"));
        let keys: Vec<(&str, usize)> = ranked.iter().map(|r| (r.chunk.file.as_str(), r.chunk.interval.start)).collect();
        assert_eq!(keys, vec![("a.py", 1), ("a.py", 5), ("b.py", 3)]);
    }

    #[test]
    fn argmax_sensitivity() {
        let generic = "config init run self data value result";
        let mut pool = vec![
            chunk("gold.py", 1, "def parse_manifest(path):"),
            chunk("noise.py", 1, generic),
        ];
        for i in 0..8 {
            pool.push(chunk(&format!("other{i}.py"), 1, generic));
        }
        let query = tokenize(&format!("{generic} parse_manifest"));
        assert_eq!(jaccard_rank(&pool, &query)[0].chunk.file, "noise.py");
        assert_eq!(bm25_rank(&pool, &query)[0].chunk.file, "gold.py");
    }

    fn token_vocab() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g", "h"]).prop_map(String::from), 0..12)
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_bounded(a in token_vocab(), b in token_vocab()) {
            let x: TokenBag = a.iter().map(String::as_str).collect();
            let y: TokenBag = b.iter().map(String::as_str).collect();
            let s = jaccard_score(&x, &y);
            prop_assert_eq!(s, jaccard_score(&y, &x));
            prop_assert!((0.0..=1.0).contains(&s));
            let same: BTreeSet<&str> = x.distinct().collect::<BTreeSet<_>>();
            let other: BTreeSet<&str> = y.distinct().collect::<BTreeSet<_>>();
            prop_assert_eq!(s == 1.0, same == other && !same.is_empty());
        }

        #[test]
        fn ranking_is_permutation(texts in proptest::collection::vec(token_vocab(), 0..15), q in token_vocab()) {
            let pool: Vec<Chunk> = texts.iter().enumerate().map(|(i, t)| chunk(&format!("f{i}.py"), 1, &t.join(" "))).collect();
            let query: TokenBag = q.iter().map(String::as_str).collect();
            for ranked in [bm25_rank(&pool, &query), jaccard_rank(&pool, &query)] {
                prop_assert_eq!(ranked.len(), pool.len());
                let mut ids: Vec<&str> = ranked.iter().map(|r| r.chunk.chunk_id.as_str()).collect();
                ids.sort();
                let mut expected: Vec<&str> = pool.iter().map(|c| c.chunk_id.as_str()).collect();
                expected.sort();
                prop_assert_eq!(ids, expected);
                for w in ranked.windows(2) {
                    prop_assert!(w[0].score >= w[1].score);
                    prop_assert!(w[0].score >= 0.0);
                }
                for (i, r) in ranked.iter().enumerate() {
                    prop_assert_eq!(r.rank, i + 1);
                }
            }
        }
    }
}
