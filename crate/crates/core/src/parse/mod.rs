//! Textual language for models (`.cplm`), structures (`.cpls`) and
//! formulas, with parsers and printers that round-trip.
//!
//! Formula syntax: atoms `R(x, 3)`, negation `~`, conjunction `&`,
//! disjunction `|`, implication `->`, quantifiers `forall v:sort. f` and
//! `exists v:sort. f` (scope extends as far right as possible), and
//! frequency comparisons built from `freq(f ; binds)` or `freq(f | g ;
//! binds)` terms. Operator precedence is `~` over `&` over `|` over `->`,
//! quantifiers lowest. Inside `freq(...)` a top-level `|` separates the
//! conditioned formula from the condition; parenthesize a disjunction to
//! keep it unconditional. `#` starts a line comment.

mod lexer;
mod formula;
mod model;
mod print;

pub use formula::{parse_formula, parse_ground_literal, parse_query};
pub use model::{parse_model, parse_structure};
pub use print::{print_formula, print_model, print_structure, rational_to_text};

use thiserror::Error;

/// A parse or sort error, pinpointing a position in the input (1-based line
/// and column).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct SourceError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub expected: Vec<String>,
}

impl SourceError {
    pub(crate) fn new(line: u32, column: u32, message: impl Into<String>) -> Self {
        SourceError {
            line,
            column,
            message: message.into(),
            expected: Vec::new(),
        }
    }

    pub(crate) fn expecting(mut self, expected: Vec<String>) -> Self {
        self.expected = expected;
        self
    }
}
