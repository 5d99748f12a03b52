//! Language tags and the per-language lexical tables used by the identifier
//! extractor and the identifier metrics.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Java,
    Other,
}

impl Language {
    /// Infers the language from a file extension. Anything that is not
    /// `.py`/`.pyi` or `.java` is `Other`.
    pub fn from_path(path: impl AsRef<Path>) -> Self {
        match path.as_ref().extension().and_then(|e| e.to_str()) {
            Some("py") | Some("pyi") => Language::Python,
            Some("java") => Language::Java,
            _ => Language::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Java => "java",
            Language::Other => "other",
        }
    }

    pub fn comment_prefix(self) -> &'static str {
        match self {
            Language::Python => "#",
            Language::Java | Language::Other => "//",
        }
    }

    pub fn is_keyword(self, word: &str) -> bool {
        match self {
            Language::Python => PYTHON_KEYWORDS.contains(&word),
            Language::Java => JAVA_KEYWORDS.contains(&word),
            Language::Other => PYTHON_KEYWORDS.contains(&word) || JAVA_KEYWORDS.contains(&word),
        }
    }

    /// Keywords after which the next identifier names a type being declared
    /// or extended.
    pub(crate) fn is_type_decl_keyword(self, word: &str) -> bool {
        match self {
            Language::Python => word == "class",
            Language::Java => matches!(
                word,
                "class" | "interface" | "enum" | "record" | "extends" | "implements" | "new" | "throws"
            ),
            Language::Other => matches!(
                word,
                "class"
                    | "interface"
                    | "enum"
                    | "record"
                    | "struct"
                    | "trait"
                    | "extends"
                    | "implements"
                    | "new"
            ),
        }
    }

    pub(crate) fn is_def_keyword(self, word: &str) -> bool {
        match self {
            Language::Python => word == "def",
            Language::Java => false,
            Language::Other => matches!(word, "def" | "fn" | "func" | "function"),
        }
    }

    pub(crate) fn is_import_keyword(self, word: &str) -> bool {
        matches!(word, "import" | "from")
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(Language::Python),
            "java" => Ok(Language::Java),
            "other" => Ok(Language::Other),
            other => Err(format!("unknown language `{other}`")),
        }
    }
}

const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield", "self", "cls", "match", "case",
];

const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "var", "record", "yield", "true", "false", "null",
];
