//! Query-set generation for a completion site.
//!
//! Two generators produce a [`QuerySet`]: a deterministic lexical heuristic
//! that classifies identifiers near the cursor into class, method, variable
//! and other keywords, and a bridge to an external generator (typically an
//! LLM service) speaking a one-line JSON protocol.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lang::Language;

pub const DEFAULT_QUERY_COUNT: usize = 10;
pub const DEFAULT_WINDOW_LINES: usize = 20;

/// A completion site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionTask {
    pub task_id: String,
    /// Repository directory relative to the evaluation repo root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo: Option<String>,
    pub file: String,
    pub line: usize,
    pub column: usize,
    /// Text preceding the cursor.
    pub local_context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_identifiers: Option<BTreeSet<String>>,
}

impl CompletionTask {
    pub fn new(
        task_id: impl Into<String>,
        file: impl Into<String>,
        local_context: impl Into<String>,
    ) -> Self {
        let local_context = local_context.into();
        let line = local_context.matches('\n').count() + 1;
        let column = local_context.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Self {
            task_id: task_id.into(),
            repo: None,
            file: file.into(),
            line,
            column,
            local_context,
            ground_truth: None,
            ground_truth_identifiers: None,
        }
    }

    pub fn cursor(&self) -> (usize, usize) {
        (self.line, self.column)
    }

    pub fn language(&self) -> Language {
        Language::from_path(&self.file)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordKind {
    ClassName,
    MethodName,
    VariableName,
    Other,
}

impl KeywordKind {
    fn strength(self) -> u8 {
        match self {
            KeywordKind::ClassName => 3,
            KeywordKind::MethodName => 2,
            KeywordKind::VariableName => 1,
            KeywordKind::Other => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Identifier {
    pub name: String,
    pub kind: KeywordKind,
}

/// One grep-style pattern with its keyword tag.
#[derive(Debug, Clone, Serialize)]
pub struct LexicalQuery {
    query_id: String,
    pattern: String,
    kind: KeywordKind,
    uses_wildcard: bool,
    case_sensitive: bool,
    #[serde(skip)]
    regex: Regex,
}

impl PartialEq for LexicalQuery {
    fn eq(&self, other: &Self) -> bool {
        self.query_id == other.query_id
            && self.pattern == other.pattern
            && self.kind == other.kind
            && self.case_sensitive == other.case_sensitive
    }
}

impl LexicalQuery {
    /// Compiles `pattern`; fails if it is not a valid regular expression.
    pub fn new(
        query_id: impl Into<String>,
        pattern: impl Into<String>,
        kind: KeywordKind,
        case_sensitive: bool,
    ) -> Result<Self> {
        let pattern = pattern.into();
        let regex = RegexBuilder::new(&pattern)
            .case_insensitive(!case_sensitive)
            .multi_line(true)
            .build()
            .map_err(|e| Error::Pattern {
                pattern: pattern.clone(),
                reason: e.to_string(),
            })?;
        Ok(Self {
            query_id: query_id.into(),
            uses_wildcard: !is_literal_pattern(&pattern),
            pattern,
            kind,
            case_sensitive,
            regex,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn kind(&self) -> KeywordKind {
        self.kind
    }

    pub fn uses_wildcard(&self) -> bool {
        self.uses_wildcard
    }

    pub fn case_sensitive(&self) -> bool {
        self.case_sensitive
    }

    pub fn regex(&self) -> &Regex {
        &self.regex
    }
}

/// True when the pattern denotes a single literal string.
pub fn is_literal_pattern(pattern: &str) -> bool {
    use regex_syntax::hir::HirKind;
    match regex_syntax::Parser::new().parse(pattern) {
        Ok(hir) => matches!(hir.kind(), HirKind::Literal(_) | HirKind::Empty),
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorSource {
    Heuristic,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuerySet {
    pub task_id: String,
    pub queries: Vec<LexicalQuery>,
    pub source: GeneratorSource,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl QuerySet {
    pub fn empty(task_id: impl Into<String>, source: GeneratorSource) -> Self {
        Self {
            task_id: task_id.into(),
            queries: Vec::new(),
            source,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// The last `lines` lines of `text`.
pub fn trailing_window(text: &str, lines: usize) -> &str {
    if lines == 0 {
        return "";
    }
    match text.rmatch_indices('\n').nth(lines - 1) {
        Some((i, _)) => &text[i + 1..],
        None => text,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    /// Word inside a string literal or comment.
    Quoted(&'a str),
    Punct(char),
    Newline,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn lex(text: &str, language: Language) -> Vec<Tok<'_>> {
    let hash_comments = matches!(language, Language::Python | Language::Other);
    let slash_comments = matches!(language, Language::Java | Language::Other);
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;

    fn quoted_words<'a>(toks: &mut Vec<Tok<'a>>, s: &'a str) {
        for w in s.split(|c: char| !is_word_char(c)) {
            if !w.is_empty() {
                toks.push(Tok::Quoted(w));
            }
        }
        for _ in s.matches('\n') {
            toks.push(Tok::Newline);
        }
    }

    while i < bytes.len() {
        let rest = &text[i..];
        let c = rest.chars().next().unwrap();
        if c == '\n' {
            toks.push(Tok::Newline);
            i += 1;
        } else if c.is_whitespace() {
            i += c.len_utf8();
        } else if (hash_comments && c == '#') || (slash_comments && rest.starts_with("//")) {
            let end = rest.find('\n').unwrap_or(rest.len());
            quoted_words(&mut toks, &rest[..end]);
            i += end;
        } else if slash_comments && rest.starts_with("/*") {
            let end = rest[2..].find("*/").map_or(rest.len(), |e| e + 4);
            quoted_words(&mut toks, &rest[..end]);
            i += end;
        } else if rest.starts_with("\"\"\"") || rest.starts_with("'''") {
            let delim = &rest[..3];
            let end = rest[3..].find(delim).map_or(rest.len(), |e| e + 6);
            quoted_words(&mut toks, &rest[..end]);
            i += end;
        } else if c == '"' || c == '\'' {
            let mut end = rest.len();
            let mut escaped = false;
            for (j, ch) in rest.char_indices().skip(1) {
                if ch == '\n' {
                    end = j;
                    break;
                }
                if escaped {
                    escaped = false;
                } else if ch == '\\' {
                    escaped = true;
                } else if ch == c {
                    end = j + 1;
                    break;
                }
            }
            quoted_words(&mut toks, &rest[..end]);
            i += end;
        } else if is_word_char(c) {
            let end = rest.find(|ch: char| !is_word_char(ch)).unwrap_or(rest.len());
            toks.push(Tok::Word(&rest[..end]));
            i += end;
        } else {
            toks.push(Tok::Punct(c));
            i += c.len_utf8();
        }
    }
    toks
}

fn is_capitalized_camel(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_uppercase()) && word.chars().any(char::is_lowercase)
}

fn starts_identifier(word: &str) -> bool {
    word.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
}

/// Lexical identifier extraction over the trailing window of the context.
#[derive(Debug, Clone)]
pub struct HeuristicGenerator {
    pub window_lines: usize,
}

impl Default for HeuristicGenerator {
    fn default() -> Self {
        Self {
            window_lines: DEFAULT_WINDOW_LINES,
        }
    }
}

impl HeuristicGenerator {
    pub fn new(window_lines: usize) -> Self {
        Self { window_lines }
    }

    /// Identifiers of the trailing window, nearest to the cursor first.
    pub fn extract_identifiers(&self, local_context: &str, language: Language) -> Vec<Identifier> {
        let window = trailing_window(local_context, self.window_lines);
        let toks = lex(window, language);

        // name -> (kind, position of last occurrence)
        let mut seen: HashMap<&str, (KeywordKind, usize)> = HashMap::new();
        let significant: Vec<(usize, &Tok<'_>)> = toks
            .iter()
            .enumerate()
            .filter(|(_, t)| !matches!(t, Tok::Newline | Tok::Quoted(_)))
            .collect();
        let prev_sig = |idx: usize| -> Option<&Tok<'_>> {
            let p = significant.partition_point(|(i, _)| *i < idx);
            p.checked_sub(1).map(|p| significant[p].1)
        };
        let next_sig = |idx: usize| -> Option<&Tok<'_>> {
            let p = significant.partition_point(|(i, _)| *i <= idx);
            significant.get(p).map(|(_, t)| *t)
        };

        let mut line_start = true;
        let mut import_line = false;
        let mut class_line = false;
        let mut type_list = false;
        let mut paren_depth = 0usize;

        for (idx, tok) in toks.iter().enumerate() {
            let (name, kind) = match tok {
                Tok::Newline => {
                    line_start = true;
                    import_line = false;
                    class_line = false;
                    if paren_depth == 0 {
                        type_list = false;
                    }
                    continue;
                }
                Tok::Punct(c) => {
                    match c {
                        '(' => {
                            if class_line && paren_depth == 0 && language == Language::Python {
                                type_list = true;
                            }
                            paren_depth += 1;
                        }
                        ')' => {
                            paren_depth = paren_depth.saturating_sub(1);
                            if class_line && paren_depth == 0 && language == Language::Python {
                                type_list = false;
                            }
                        }
                        '{' | ';' | ':' if paren_depth == 0 => type_list = false,
                        _ => {}
                    }
                    if *c != '@' {
                        line_start = false;
                    }
                    continue;
                }
                Tok::Quoted(w) => {
                    if starts_identifier(w) && !language.is_keyword(w) {
                        (*w, KeywordKind::Other)
                    } else {
                        continue;
                    }
                }
                Tok::Word(w) => {
                    let at_line_start = std::mem::replace(&mut line_start, false);
                    if language.is_keyword(w) || language.is_type_decl_keyword(w) {
                        if at_line_start && language.is_import_keyword(w) {
                            import_line = true;
                        }
                        if at_line_start && *w == "class" {
                            class_line = true;
                        }
                        if matches!(*w, "extends" | "implements" | "throws") {
                            type_list = true;
                        }
                        continue;
                    }
                    if !starts_identifier(w) {
                        continue;
                    }
                    let prev = prev_sig(idx);
                    let next = next_sig(idx);
                    let prev_word = match prev {
                        Some(Tok::Word(p)) => Some(*p),
                        _ => None,
                    };
                    let declared = prev_word.is_some_and(|p| language.is_type_decl_keyword(p));
                    let kind = if declared || (type_list && w.chars().next().is_some_and(char::is_uppercase)) {
                        KeywordKind::ClassName
                    } else if matches!(prev, Some(Tok::Punct('@'))) {
                        KeywordKind::Other
                    } else if import_line {
                        if is_capitalized_camel(w) {
                            KeywordKind::ClassName
                        } else {
                            KeywordKind::Other
                        }
                    } else if prev_word.is_some_and(|p| language.is_def_keyword(p)) {
                        KeywordKind::MethodName
                    } else if is_capitalized_camel(w) {
                        KeywordKind::ClassName
                    } else if matches!(next, Some(Tok::Punct('('))) {
                        KeywordKind::MethodName
                    } else {
                        KeywordKind::VariableName
                    };
                    (*w, kind)
                }
            };
            seen.entry(name)
                .and_modify(|(k, pos)| {
                    if kind.strength() > k.strength() {
                        *k = kind;
                    }
                    *pos = idx;
                })
                .or_insert((kind, idx));
        }

        let mut out: Vec<(usize, Identifier)> = seen
            .into_iter()
            .map(|(name, (kind, pos))| {
                (
                    pos,
                    Identifier {
                        name: name.to_owned(),
                        kind,
                    },
                )
            })
            .collect();
        out.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.name.cmp(&b.1.name)));
        out.into_iter().map(|(_, id)| id).collect()
    }

    /// Builds up to `m` queries for the task. Deterministic in
    /// `(local_context, language, m)`.
    pub fn generate(&self, task: &CompletionTask, m: usize) -> Result<QuerySet> {
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "query count must be at least 1".into(),
            });
        }
        let language = task.language();
        let identifiers = self.extract_identifiers(&task.local_context, language);

        // Keyword-bearing identifiers first, then string/comment tokens.
        let ordered: Vec<&Identifier> = identifiers
            .iter()
            .filter(|id| id.kind != KeywordKind::Other)
            .chain(identifiers.iter().filter(|id| id.kind == KeywordKind::Other))
            .collect();

        let mut candidates: Vec<(String, KeywordKind)> = Vec::new();
        for id in &ordered {
            candidates.extend(primary_patterns(id, language));
        }
        let mut wildcards: Vec<(String, KeywordKind)> = Vec::new();
        for id in &ordered {
            wildcards.push((wildcard_pattern(id, language), id.kind));
        }

        let mut set = QuerySet::empty(&task.task_id, GeneratorSource::Heuristic);
        let mut patterns = HashSet::new();
        for (pattern, kind) in candidates.into_iter().chain(wildcards) {
            if set.queries.len() >= m {
                break;
            }
            if pattern.is_empty() || !patterns.insert(pattern.clone()) {
                continue;
            }
            let id = format!("q{}", set.queries.len() + 1);
            match LexicalQuery::new(id, pattern, kind, true) {
                Ok(q) => set.queries.push(q),
                Err(e) => set.warnings.push(e.to_string()),
            }
        }
        Ok(set)
    }
}

fn primary_patterns(id: &Identifier, language: Language) -> Vec<(String, KeywordKind)> {
    let name = regex::escape(&id.name);
    match id.kind {
        KeywordKind::ClassName => vec![(format!("class {name}"), id.kind)],
        KeywordKind::MethodName => {
            let definition = match language {
                Language::Python => format!("def {name}"),
                Language::Java => format!(r"[\w<>\[\],]+\s+{name}\s*\("),
                Language::Other => format!(r"(def|fn|func|function)\s+{name}\b"),
            };
            vec![(definition, id.kind), (name, id.kind)]
        }
        KeywordKind::VariableName | KeywordKind::Other => vec![(name, id.kind)],
    }
}

/// Splits an identifier into its camelCase / snake_case words.
fn sub_words(name: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for part in name.split('_').filter(|p| !p.is_empty()) {
        let mut start = 0;
        let chars: Vec<(usize, char)> = part.char_indices().collect();
        for w in 1..chars.len() {
            let (i, c) = chars[w];
            let prev = chars[w - 1].1;
            let next_lower = chars.get(w + 1).is_some_and(|(_, n)| n.is_lowercase());
            if c.is_uppercase() && (prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower)) {
                out.push(&part[start..i]);
                start = i;
            }
        }
        out.push(&part[start..]);
    }
    out
}

fn wildcard_pattern(id: &Identifier, language: Language) -> String {
    let name = regex::escape(&id.name);
    match id.kind {
        KeywordKind::ClassName => format!("class.*{name}"),
        KeywordKind::MethodName => match language {
            Language::Python => format!("def.*{name}"),
            _ => format!(r"{name}.*\("),
        },
        KeywordKind::VariableName | KeywordKind::Other => {
            let words = sub_words(&id.name);
            if words.len() >= 2 {
                words
                    .iter()
                    .map(|w| regex::escape(w))
                    .collect::<Vec<_>>()
                    .join(".*")
            } else {
                format!("{name}.*=")
            }
        }
    }
}

/// Extracts identifiers with the default window.
pub fn extract_identifiers(local_context: &str, language: Language) -> Vec<Identifier> {
    HeuristicGenerator::default().extract_identifiers(local_context, language)
}

/// Generates queries with the default heuristic generator.
pub fn generate_queries(task: &CompletionTask, m: usize) -> Result<QuerySet> {
    HeuristicGenerator::default().generate(task, m)
}

/// Guesses the keyword kind of an externally supplied pattern.
pub fn classify_pattern(pattern: &str) -> KeywordKind {
    let stripped = Regex::new(r"\\[a-zA-Z]").unwrap().replace_all(pattern, " ");
    let words: Vec<&str> = stripped
        .split(|c: char| !is_word_char(c))
        .filter(|w| starts_identifier(w))
        .collect();
    if words
        .iter()
        .any(|w| matches!(*w, "class" | "interface" | "enum" | "extends" | "implements" | "struct"))
    {
        return KeywordKind::ClassName;
    }
    if words.iter().any(|w| matches!(*w, "def" | "fn" | "func" | "function")) || stripped.contains('(') {
        return KeywordKind::MethodName;
    }
    match words.iter().rev().find(|w| !Language::Other.is_keyword(w)) {
        Some(w) if is_capitalized_camel(w) => KeywordKind::ClassName,
        Some(_) => KeywordKind::VariableName,
        None => KeywordKind::Other,
    }
}

/// Request line sent to an external generator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GeneratorRequest {
    pub task_id: String,
    pub local_context: String,
    pub language: Language,
    pub m: usize,
}

const HONORED_COMMAND_FIELDS: &[&str] = &["pattern", "case_sensitive"];

/// Parses one response line of the external-generator protocol:
/// `{"task_id": str, "commands": [{"pattern": str, "case_sensitive": bool}]}`.
///
/// Unknown command fields are ignored and reported as warnings; patterns
/// that do not compile are dropped with a warning. At most `m` queries are
/// kept, in payload order.
pub fn parse_external_queries(task_id: &str, payload: &str, m: usize) -> Result<QuerySet> {
    let protocol = |record: &str, reason: &str| Error::Protocol {
        record: record.to_owned(),
        reason: reason.to_owned(),
    };
    let value: Value =
        serde_json::from_str(payload.trim()).map_err(|e| protocol(payload, &e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| protocol(payload, "response is not a JSON object"))?;
    match obj.get("task_id").and_then(Value::as_str) {
        Some(id) if id == task_id => {}
        Some(id) => {
            return Err(protocol(
                payload,
                &format!("task_id `{id}` does not match request `{task_id}`"),
            ))
        }
        None => return Err(protocol(payload, "missing string field `task_id`")),
    }
    let commands = obj
        .get("commands")
        .and_then(Value::as_array)
        .ok_or_else(|| protocol(payload, "missing array field `commands`"))?;

    let mut set = QuerySet::empty(task_id, GeneratorSource::External);
    for command in commands {
        let record = command.to_string();
        let cmd = command
            .as_object()
            .ok_or_else(|| protocol(&record, "command is not an object"))?;
        let pattern = cmd
            .get("pattern")
            .and_then(Value::as_str)
            .ok_or_else(|| protocol(&record, "missing string field `pattern`"))?;
        let case_sensitive = match cmd.get("case_sensitive") {
            None | Some(Value::Null) => true,
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(protocol(&record, "`case_sensitive` must be a boolean")),
        };
        for key in cmd.keys().filter(|k| !HONORED_COMMAND_FIELDS.contains(&k.as_str())) {
            set.warnings
                .push(format!("ignored unsupported field `{key}` in {record}"));
        }
        if set.queries.len() >= m {
            continue;
        }
        if pattern.is_empty() {
            set.warnings.push(format!("dropped empty pattern in {record}"));
            continue;
        }
        let id = format!("q{}", set.queries.len() + 1);
        match LexicalQuery::new(id, pattern, classify_pattern(pattern), case_sensitive) {
            Ok(q) => set.queries.push(q),
            Err(e) => set.warnings.push(format!("dropped query: {e}")),
        }
    }
    if commands.len() > set.queries.len() && set.queries.len() == m {
        set.warnings.push(format!(
            "kept the first {m} of {} commands",
            commands.len()
        ));
    }
    Ok(set)
}

/// Where an external generator lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `POST` the request line to this URL.
    Http(String),
    /// Spawn this program once per task, request on stdin, response on stdout.
    Command(Vec<String>),
}

impl Endpoint {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Ok(Endpoint::Http(spec.to_owned()));
        }
        let argv: Vec<String> = spec.split_whitespace().map(str::to_owned).collect();
        if argv.is_empty() {
            return Err(Error::Config("empty generator endpoint".into()));
        }
        Ok(Endpoint::Command(argv))
    }
}

#[derive(Debug, Clone)]
pub struct ExternalGenerator {
    pub endpoint: Endpoint,
    pub timeout: Duration,
}

impl ExternalGenerator {
    pub fn new(endpoint: Endpoint) -> Self {
        Self {
            endpoint,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn request_line(task: &CompletionTask, m: usize) -> String {
        let req = GeneratorRequest {
            task_id: task.task_id.clone(),
            local_context: task.local_context.clone(),
            language: task.language(),
            m,
        };
        serde_json::to_string(&req).expect("request serializes")
    }

    /// One round trip for one task.
    pub fn generate(&self, task: &CompletionTask, m: usize) -> Result<QuerySet> {
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "query count must be at least 1".into(),
            });
        }
        let line = Self::request_line(task, m);
        let response = match &self.endpoint {
            Endpoint::Http(url) => self.call_http(url, &line)?,
            Endpoint::Command(argv) => call_command(argv, &line)?,
        };
        let payload = response
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::Protocol {
                record: String::new(),
                reason: "empty response".into(),
            })?;
        parse_external_queries(&task.task_id, payload, m)
    }

    fn call_http(&self, url: &str, line: &str) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut resp = agent
            .post(url)
            .header("content-type", "application/json")
            .send(format!("{line}\n"))
            .map_err(|e| Error::Generator(format!("POST {url}: {e}")))?;
        resp.body_mut()
            .read_to_string()
            .map_err(|e| Error::Generator(format!("reading response from {url}: {e}")))
    }
}

fn call_command(argv: &[String], line: &str) -> Result<String> {
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Generator(format!("spawning `{}`: {e}", argv.join(" "))))?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .map_err(|e| Error::Generator(format!("writing request: {e}")))?;
    }
    let mut stdout = String::new();
    child
        .stdout
        .take()
        .expect("piped stdout")
        .read_to_string(&mut stdout)
        .map_err(|e| Error::Generator(format!("reading response: {e}")))?;
    let output = child
        .wait_with_output()
        .map_err(|e| Error::Generator(e.to_string()))?;
    if !output.status.success() {
        return Err(Error::Generator(format!(
            "`{}` exited with {}: {}",
            argv.join(" "),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    Ok(stdout)
}

/// Either query generator behind one call.
#[derive(Debug, Clone)]
pub enum QueryGenerator {
    Heuristic(HeuristicGenerator),
    External(ExternalGenerator),
}

impl QueryGenerator {
    pub fn generate(&self, task: &CompletionTask, m: usize) -> Result<QuerySet> {
        match self {
            QueryGenerator::Heuristic(h) => h.generate(task, m),
            QueryGenerator::External(e) => e.generate(task, m),
        }
    }
}
