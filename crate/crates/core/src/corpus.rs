//! Immutable repository snapshots: file discovery, ignore rules, language
//! filtering and 1-based line slicing.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::lang::Language;

/// VCS metadata directories that are always skipped unless
/// [`ScanOptions::default_ignores`] is turned off.
pub const DEFAULT_IGNORED_DIRS: &[&str] = &[".git", ".hg", ".svn", ".bzr"];

pub const DEFAULT_MAX_FILE_BYTES: u64 = 4 * 1024 * 1024;

const BINARY_SNIFF_BYTES: usize = 8 * 1024;

/// A closed, 1-based line interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineInterval {
    pub start: usize,
    pub end: usize,
}

impl LineInterval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start >= 1 && start <= end, "bad interval [{start}, {end}]");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn lines(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn hull(&self, other: &LineInterval) -> LineInterval {
        LineInterval {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for LineInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    path: String,
    language: Language,
    text: String,
    /// Byte offset of the first byte of every line.
    line_starts: Vec<usize>,
}

impl SourceFile {
    /// `path` is relative to the snapshot root and uses `/` separators.
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let path = path.into();
        let text = text.into();
        let mut line_starts = Vec::new();
        if !text.is_empty() {
            line_starts.push(0);
            for (i, b) in text.bytes().enumerate() {
                if b == b'\n' && i + 1 < text.len() {
                    line_starts.push(i + 1);
                }
            }
        }
        Self {
            language: Language::from_path(&path),
            path,
            text,
            line_starts,
        }
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }

    /// Text of 1-based line `n` without its terminating newline.
    pub fn line(&self, n: usize) -> Option<&str> {
        if n == 0 || n > self.line_count() {
            return None;
        }
        Some(&self.text[self.line_span(n)])
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> + '_ {
        (1..=self.line_count()).map(move |n| &self.text[self.line_span(n)])
    }

    /// 1-based line containing byte `offset`.
    pub(crate) fn line_of_offset(&self, offset: usize) -> usize {
        self.line_starts.partition_point(|&s| s <= offset).max(1)
    }

    /// Byte offset where line `n + 1` starts, or the text length.
    pub(crate) fn next_line_start(&self, n: usize) -> usize {
        self.line_starts.get(n).copied().unwrap_or(self.text.len())
    }

    fn line_span(&self, n: usize) -> std::ops::Range<usize> {
        let start = self.line_starts[n - 1];
        let mut end = self.next_line_start(n);
        if end > start && self.text.as_bytes()[end - 1] == b'\n' {
            end -= 1;
        }
        start..end
    }

    pub fn slice(&self, interval: LineInterval) -> Result<String> {
        let len = self.line_count();
        if interval.start == 0 || interval.start > interval.end || interval.end > len {
            return Err(Error::Range {
                path: self.path.clone(),
                start: interval.start,
                end: interval.end,
                len,
            });
        }
        let start = self.line_starts[interval.start - 1];
        let end = self.line_span(interval.end).end;
        Ok(self.text[start..end].to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanWarning {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Glob patterns matched against the relative path and the file or
    /// directory name.
    pub ignore: Vec<String>,
    /// Languages to keep; an empty set keeps every language.
    pub languages: BTreeSet<Language>,
    pub max_file_bytes: u64,
    pub default_ignores: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            ignore: Vec::new(),
            languages: BTreeSet::new(),
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            default_ignores: true,
        }
    }
}

impl ScanOptions {
    pub fn with_languages(mut self, languages: impl IntoIterator<Item = Language>) -> Self {
        self.languages = languages.into_iter().collect();
        self
    }

    pub fn with_ignore(mut self, pattern: impl Into<String>) -> Self {
        self.ignore.push(pattern.into());
        self
    }

    fn accepts(&self, language: Language) -> bool {
        self.languages.is_empty() || self.languages.contains(&language)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoSnapshot {
    root: PathBuf,
    files: Vec<SourceFile>,
    total_lines: usize,
    language_filter: BTreeSet<Language>,
    warnings: Vec<ScanWarning>,
}

impl RepoSnapshot {
    /// Builds a snapshot from in-memory files. Files are sorted by path.
    pub fn from_files(root: impl Into<PathBuf>, mut files: Vec<SourceFile>) -> Result<Self> {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        if let Some(w) = files.windows(2).find(|w| w[0].path == w[1].path) {
            return Err(Error::DuplicateFile(w[0].path.clone()));
        }
        let total_lines = files.iter().map(SourceFile::line_count).sum();
        Ok(Self {
            root: root.into(),
            files,
            total_lines,
            language_filter: BTreeSet::new(),
            warnings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn total_lines(&self) -> usize {
        self.total_lines
    }

    pub fn language_filter(&self) -> &BTreeSet<Language> {
        &self.language_filter
    }

    pub fn warnings(&self) -> &[ScanWarning] {
        &self.warnings
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files
            .binary_search_by(|f| f.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.files[i])
    }

    pub fn slice(&self, path: &str, interval: LineInterval) -> Result<String> {
        self.file(path)
            .ok_or_else(|| Error::UnknownFile(path.to_owned()))?
            .slice(interval)
    }
}

struct IgnoreMatcher {
    globs: GlobSet,
    default_dirs: bool,
}

impl IgnoreMatcher {
    fn new(opts: &ScanOptions) -> Result<Self> {
        let mut builder = GlobSetBuilder::new();
        for pattern in &opts.ignore {
            let glob = Glob::new(pattern).map_err(|e| Error::IgnorePattern {
                pattern: pattern.clone(),
                reason: e.to_string(),
            })?;
            builder.add(glob);
        }
        let globs = builder.build().map_err(|e| Error::IgnorePattern {
            pattern: opts.ignore.join(","),
            reason: e.to_string(),
        })?;
        Ok(Self {
            globs,
            default_dirs: opts.default_ignores,
        })
    }

    fn is_ignored(&self, rel: &str, name: &str, is_dir: bool) -> bool {
        if is_dir && self.default_dirs && DEFAULT_IGNORED_DIRS.contains(&name) {
            return true;
        }
        self.globs.is_match(rel) || self.globs.is_match(name)
    }
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

enum Loaded {
    File(SourceFile),
    Binary,
    Skipped(ScanWarning),
}

fn load_file(abs: &Path, rel: String, max_bytes: u64) -> Loaded {
    let warn = |reason: String| {
        Loaded::Skipped(ScanWarning {
            path: rel.clone(),
            reason,
        })
    };
    match fs::metadata(abs) {
        Ok(meta) if meta.len() > max_bytes => {
            return warn(format!("{} bytes exceeds the {max_bytes}-byte cap", meta.len()))
        }
        Ok(_) => {}
        Err(e) => return warn(e.to_string()),
    }
    let bytes = match fs::read(abs) {
        Ok(b) => b,
        Err(e) => return warn(e.to_string()),
    };
    if bytes[..bytes.len().min(BINARY_SNIFF_BYTES)].contains(&0) {
        return Loaded::Binary;
    }
    let text = match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
    };
    Loaded::File(SourceFile::new(rel, text))
}

/// Walks `root` and loads every non-ignored, non-binary file accepted by the
/// language filter. Unreadable and oversized files are skipped and recorded
/// in [`RepoSnapshot::warnings`].
pub fn scan_repo(root: impl AsRef<Path>, opts: &ScanOptions) -> Result<RepoSnapshot> {
    let root = root.as_ref();
    let meta = fs::metadata(root).map_err(|_| Error::RootNotFound(root.to_path_buf()))?;
    if !meta.is_dir() {
        return Err(Error::NotADirectory(root.to_path_buf()));
    }
    let matcher = IgnoreMatcher::new(opts)?;

    let mut warnings = Vec::new();
    let mut candidates = Vec::new();
    let walker = WalkDir::new(root).follow_links(false).into_iter();
    let walker = walker.filter_entry(|entry| {
        if entry.depth() == 0 {
            return true;
        }
        let rel = relative_path(root, entry.path());
        let name = entry.file_name().to_string_lossy();
        !matcher.is_ignored(&rel, &name, entry.file_type().is_dir())
    });
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                let path = e
                    .path()
                    .map(|p| relative_path(root, p))
                    .unwrap_or_default();
                warnings.push(ScanWarning {
                    path,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative_path(root, entry.path());
        if !opts.accepts(Language::from_path(&rel)) {
            continue;
        }
        candidates.push((entry.into_path(), rel));
    }
    candidates.sort_by(|a, b| a.1.cmp(&b.1));

    let loaded: Vec<Loaded> = candidates
        .into_par_iter()
        .map(|(abs, rel)| load_file(&abs, rel, opts.max_file_bytes))
        .collect();

    let mut files = Vec::with_capacity(loaded.len());
    for item in loaded {
        match item {
            Loaded::File(f) => files.push(f),
            Loaded::Binary => {}
            Loaded::Skipped(w) => warnings.push(w),
        }
    }
    warnings.sort_by(|a, b| a.path.cmp(&b.path));

    let mut snapshot = RepoSnapshot::from_files(root, files)?;
    snapshot.language_filter = opts.languages.clone();
    snapshot.warnings = warnings;
    Ok(snapshot)
}
