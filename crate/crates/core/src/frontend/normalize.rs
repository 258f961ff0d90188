//! Token abstraction: drop trivia and conflate the long tail of names and
//! literals into indexed placeholders.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lexer::{RawToken, TokenKind};

/// Unit of analysis. Determines sequence length and abstraction budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Function,
    File,
}

impl Granularity {
    /// Fixed token-sequence length fed to the recurrent branch.
    pub fn sequence_len(self) -> usize {
        match self {
            Granularity::Function => 200,
            Granularity::File => 3000,
        }
    }

    /// Number of distinct variables (and functions, constants) that keep an
    /// indexed placeholder.
    pub fn abstraction_budget(self) -> usize {
        match self {
            Granularity::Function => 10,
            Granularity::File => 200,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Function => "function",
            Granularity::File => "file",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "function" | "func" => Ok(Granularity::Function),
            "file" => Ok(Granularity::File),
            other => Err(format!("unknown granularity {other:?} (expected file|function)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedToken {
    pub surface: String,
    pub origin_line: usize,
}

/// Concrete function names that survive abstraction (sinks, sanitizers).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepList {
    names: BTreeSet<String>,
}

const DEFAULT_KEEPLIST: &str = include_str!("../../data/keeplist.txt");

impl Default for KeepList {
    fn default() -> Self {
        KeepList::parse(DEFAULT_KEEPLIST).expect("bundled keep list is non-empty")
    }
}

impl KeepList {
    /// Parse the plain-text format: one name per line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let names: BTreeSet<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.to_ascii_lowercase())
            .collect();
        Self::from_names(names)
    }

    pub fn from_names<I, S>(names: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let names: BTreeSet<String> = names.into_iter().map(|s| s.as_ref().trim().to_ascii_lowercase()).collect();
        if names.is_empty() {
            return Err("keep list must not be empty".into());
        }
        Ok(KeepList { names })
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(&name.to_ascii_lowercase())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        self.names.iter().map(|n| format!("{n}\n")).collect()
    }
}

/// Variables kept verbatim: request sources and `$this`.
pub const RETAINED_VARIABLES: &[&str] = &[
    "$_GET",
    "$_POST",
    "$_REQUEST",
    "$_COOKIE",
    "$_FILES",
    "$_SERVER",
    "$_ENV",
    "$_SESSION",
    "$GLOBALS",
    "$this",
    "$HTTP_GET_VARS",
    "$HTTP_POST_VARS",
    "$argv",
];

/// Per-category abstraction budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbstractionBudget {
    pub variables: usize,
    pub functions: usize,
    pub constants: usize,
}

impl AbstractionBudget {
    /// Same budget for all three categories.
    pub fn uniform(k: usize) -> Self {
        AbstractionBudget { variables: k, functions: k, constants: k }
    }

    pub fn for_granularity(g: Granularity) -> Self {
        Self::uniform(g.abstraction_budget())
    }
}

#[derive(Clone, Copy)]
enum Category {
    Var,
    Func,
    Const,
}

impl Category {
    fn prefix(self) -> &'static str {
        match self {
            Category::Var => "VAR",
            Category::Func => "FUNC",
            Category::Const => "CONST",
        }
    }
}

struct Abstractor {
    budget: usize,
    category: Category,
    seen: HashMap<String, usize>,
}

impl Abstractor {
    fn new(category: Category, budget: usize) -> Self {
        Abstractor { budget, category, seen: HashMap::new() }
    }

    fn surface(&mut self, key: &str) -> String {
        let next = self.seen.len();
        let idx = *self.seen.entry(key.to_string()).or_insert(next);
        if idx < self.budget {
            format!("{}{}", self.category.prefix(), idx)
        } else {
            self.category.prefix().to_string()
        }
    }
}

/// True for surfaces produced by abstraction (`VAR3`, `FUNC`, `CONST12`).
pub fn is_abstract_surface(s: &str) -> bool {
    ["VAR", "FUNC", "CONST"]
        .iter()
        .any(|p| s.strip_prefix(p).is_some_and(|rest| rest.bytes().all(|b| b.is_ascii_digit())))
}

/// Normalize a lexed token stream.
///
/// Trivia, PHP tags and inline HTML are removed (`<?=` becomes `echo`).
/// Variables, user functions and literals are replaced by indexed
/// placeholders in order of first appearance until the budget for their
/// category is spent, after which they share the bare placeholder.
pub fn normalize(tokens: &[RawToken], keep: &KeepList, budget: AbstractionBudget) -> Vec<NormalizedToken> {
    let mut vars = Abstractor::new(Category::Var, budget.variables);
    let mut funcs = Abstractor::new(Category::Func, budget.functions);
    let mut consts = Abstractor::new(Category::Const, budget.constants);

    let significant: Vec<&RawToken> =
        tokens.iter().filter(|t| !t.kind.is_trivia() && t.kind != TokenKind::InlineHtml).collect();

    let mut out = Vec::with_capacity(significant.len());
    for (i, tok) in significant.iter().enumerate() {
        let surface = match tok.kind {
            TokenKind::Whitespace | TokenKind::Comment | TokenKind::InlineHtml => continue,
            TokenKind::PhpTag => {
                if tok.text == "<?=" {
                    "echo".to_string()
                } else {
                    continue;
                }
            }
            TokenKind::Keyword => tok.text.to_ascii_lowercase(),
            TokenKind::Variable => {
                if RETAINED_VARIABLES.contains(&tok.text.as_str()) {
                    tok.text.clone()
                } else {
                    vars.surface(&tok.text)
                }
            }
            TokenKind::Identifier => {
                if is_abstract_surface(&tok.text) {
                    tok.text.clone()
                } else if keep.contains(&tok.text) || super::lexer::is_keyword(&tok.text) {
                    tok.text.to_ascii_lowercase()
                } else {
                    let called = significant.get(i + 1).is_some_and(|n| n.is_punct("("));
                    let declared = i > 0 && significant[i - 1].is_keyword("function");
                    if called || declared {
                        funcs.surface(&tok.text.to_ascii_lowercase())
                    } else {
                        consts.surface(&tok.text)
                    }
                }
            }
            TokenKind::ConstantLiteral => {
                if is_abstract_surface(&tok.text) {
                    tok.text.clone()
                } else {
                    consts.surface(&tok.text)
                }
            }
            TokenKind::Operator => tok.text.to_ascii_lowercase().replace([' ', '\t'], ""),
            TokenKind::Punctuation => tok.text.clone(),
        };
        out.push(NormalizedToken { surface, origin_line: tok.line });
    }
    out
}
