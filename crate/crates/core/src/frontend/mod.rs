//! PHP source to token sequences.

pub mod functions;
pub mod lexer;
pub mod normalize;
pub mod parser;
pub mod vocab;

pub use functions::{extract_functions, ExtractError, FunctionSpan, IntervalTree};
pub use lexer::{lex, lex_fragment, LexError, RawToken, TokenKind};
pub use normalize::{normalize, AbstractionBudget, Granularity, KeepList, NormalizedToken};
pub use parser::{parse, ParseError, Stmt};
pub use vocab::{encode, TokenSequence, VocabError, Vocabulary};
