//! Pipeline configuration. Keys in the TOML config file match the field
//! names below (`K`, `N`, `G` and `L` are upper-case).

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assemble::{PromptOrder, DEFAULT_TOKEN_BUDGET, DEFAULT_TOP_K};
use crate::corpus::{ScanOptions, DEFAULT_MAX_FILE_BYTES};
use crate::error::{Error, Result};
use crate::fuse::{FusionConfig, DEFAULT_ADJACENCY_GAP, DEFAULT_TOP_PERCENT};
use crate::lang::Language;
use crate::metrics::{EmNormalization, DEFAULT_TAU};
use crate::querygen::{
    Endpoint, ExternalGenerator, HeuristicGenerator, QueryGenerator, DEFAULT_QUERY_COUNT,
    DEFAULT_WINDOW_LINES,
};
use crate::search::{SearchOptions, DEFAULT_AFTER, DEFAULT_BEFORE, DEFAULT_HIT_CAP};

pub const GENERATOR_ENV: &str = "GREPCTX_GENERATOR_ENDPOINT";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Jaccard ranking, Top-K, no fusion.
    Naive,
    /// BM25 re-ranking, Top-N% fusion, Top-K.
    #[default]
    Full,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Mode::Naive),
            "full" => Ok(Mode::Full),
            other => Err(format!("unknown mode `{other}` (expected naive or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub m: usize,
    #[serde(rename = "K")]
    pub top_k: usize,
    pub budget: usize,
    #[serde(rename = "N")]
    pub top_percent: f64,
    #[serde(rename = "G")]
    pub adjacency_gap: usize,
    pub before: usize,
    pub after: usize,
    #[serde(rename = "L")]
    pub window_lines: usize,
    pub hit_cap: usize,
    /// `heuristic`, an `http(s)://` URL, or a command line.
    pub generator: String,
    pub tau: f64,
    pub ignore: Vec<String>,
    pub languages: BTreeSet<Language>,
    pub max_file_bytes: u64,
    pub prompt_order: PromptOrder,
    pub jaccard_multiset: bool,
    pub em_normalization: EmNormalization,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Full,
            m: DEFAULT_QUERY_COUNT,
            top_k: DEFAULT_TOP_K,
            budget: DEFAULT_TOKEN_BUDGET,
            top_percent: DEFAULT_TOP_PERCENT,
            adjacency_gap: DEFAULT_ADJACENCY_GAP,
            before: DEFAULT_BEFORE,
            after: DEFAULT_AFTER,
            window_lines: DEFAULT_WINDOW_LINES,
            hit_cap: DEFAULT_HIT_CAP,
            generator: "heuristic".into(),
            tau: DEFAULT_TAU,
            ignore: Vec::new(),
            languages: BTreeSet::new(),
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            prompt_order: PromptOrder::RelevanceFirst,
            jaccard_multiset: false,
            em_normalization: EmNormalization::Whitespace,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: usize| {
            if v == 0 {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be at least 1".into(),
                })
            } else {
                Ok(())
            }
        };
        positive("m", self.m)?;
        positive("K", self.top_k)?;
        positive("budget", self.budget)?;
        positive("L", self.window_lines)?;
        positive("hit_cap", self.hit_cap)?;
        self.fusion().validate()?;
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be in [0, 1], got {}", self.tau),
            });
        }
        Ok(())
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            ignore: self.ignore.clone(),
            languages: self.languages.clone(),
            max_file_bytes: self.max_file_bytes,
            default_ignores: true,
        }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            before: self.before,
            after: self.after,
            hit_cap: self.hit_cap,
        }
    }

    pub fn fusion(&self) -> FusionConfig {
        FusionConfig {
            top_percent: self.top_percent,
            adjacency_gap: self.adjacency_gap,
        }
    }

    /// Builds the query generator. A non-empty `env_endpoint` (normally the
    /// value of [`GENERATOR_ENV`]) takes precedence over the config.
    pub fn query_generator(&self, env_endpoint: Option<&str>) -> Result<QueryGenerator> {
        let spec = match env_endpoint.map(str::trim).filter(|s| !s.is_empty()) {
            Some(s) => s,
            None => self.generator.trim(),
        };
        if spec.is_empty() || spec == "heuristic" {
            return Ok(QueryGenerator::Heuristic(HeuristicGenerator::new(self.window_lines)));
        }
        Ok(QueryGenerator::External(ExternalGenerator::new(Endpoint::parse(spec)?)))
    }
}
