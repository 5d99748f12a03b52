//! Top-K, token-budgeted context packs.

use serde::{Deserialize, Serialize};

use crate::fuse::FusedBlock;
use crate::lang::Language;
use crate::rank::token_strs;

pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_TOKEN_BUDGET: usize = 4096;

/// Lexical token count, a stand-in for the model tokenizer.
pub fn count_tokens(text: &str) -> usize {
    token_strs(text).count()
}

/// Order of admitted blocks inside the rendered context.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptOrder {
    /// Rank 1 first.
    #[default]
    RelevanceFirst,
    /// Rank 1 last, closest to the completion site.
    RelevanceLast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextPack {
    pub task_id: String,
    pub blocks: Vec<FusedBlock>,
    pub token_count: usize,
    pub budget: usize,
    pub rendered: String,
}

impl ContextPack {
    pub fn empty(task_id: impl Into<String>, budget: usize) -> Self {
        Self {
            task_id: task_id.into(),
            blocks: Vec::new(),
            token_count: 0,
            budget,
            rendered: String::new(),
        }
    }
}

pub fn block_header(block: &FusedBlock) -> String {
    format!(
        "{} file: {} lines {}",
        Language::from_path(&block.file).comment_prefix(),
        block.file,
        block.interval
    )
}

fn render<'a>(blocks: impl Iterator<Item = &'a FusedBlock>) -> String {
    let mut out = String::new();
    for block in blocks {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&block_header(block));
        out.push('\n');
        out.push_str(&block.text);
        out.push('\n');
    }
    out
}

fn render_ordered(blocks: &[FusedBlock], order: PromptOrder) -> String {
    match order {
        PromptOrder::RelevanceFirst => render(blocks.iter()),
        PromptOrder::RelevanceLast => render(blocks.iter().rev()),
    }
}

/// Greedy admission in list order: a block whose addition would push the
/// rendered token count past `budget` is skipped whole, and admission stops
/// after `k` blocks.
pub fn assemble_context(
    task_id: &str,
    blocks: &[FusedBlock],
    k: usize,
    budget: usize,
    order: PromptOrder,
) -> ContextPack {
    let mut admitted: Vec<FusedBlock> = Vec::new();
    let mut rendered = String::new();
    let mut token_count = 0;
    for block in blocks {
        if admitted.len() >= k {
            break;
        }
        admitted.push(block.clone());
        let candidate = render_ordered(&admitted, order);
        let tokens = count_tokens(&candidate);
        if tokens <= budget {
            rendered = candidate;
            token_count = tokens;
        } else {
            admitted.pop();
        }
    }
    ContextPack {
        task_id: task_id.to_owned(),
        blocks: admitted,
        token_count,
        budget,
        rendered,
    }
}
