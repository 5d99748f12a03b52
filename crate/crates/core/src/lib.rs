//! Index-free lexical retrieval for repository-level code completion.
//!
//! A repository is scanned into an in-memory [`RepoSnapshot`], a
//! [`QueryGenerator`] turns the code before the cursor into regex queries,
//! matches are expanded into chunks, ranked, fused and packed into a
//! token-budgeted [`ContextPack`]. The [`eval`] and [`bench`] modules drive
//! the pipeline over task files and synthetic repositories.

pub mod assemble;
pub mod bench;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fuse;
pub mod lang;
pub mod metrics;
pub mod pipeline;
pub mod querygen;
pub mod rank;
pub mod search;

pub use assemble::{assemble_context, ContextPack, PromptOrder};
pub use config::{Mode, PipelineConfig, GENERATOR_ENV};
pub use corpus::{scan_repo, LineInterval, RepoSnapshot, ScanOptions, SourceFile};
pub use error::{Error, Result};
pub use fuse::{dedup_pipeline, merge_intervals, select_top_percent, FusedBlock, FusionConfig};
pub use lang::Language;
pub use metrics::{coverage_ratio, CoverageReport, EvalMetrics, FailureClass, GoldSpan, LatencyRecord};
pub use pipeline::{Pipeline, RetrievalOutcome};
pub use querygen::{CompletionTask, LexicalQuery, QueryGenerator, QuerySet};
pub use rank::{bm25_rank, jaccard_rank, RankedChunk};
pub use search::{execute_query, execute_query_set, Chunk, MatchHit};
