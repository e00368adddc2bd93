//! The `.cbd` text format.
//!
//! ```text
//! cbd Main(out y) {
//!     block c = Constant(9.81);
//!     c.out -> y;
//! }
//! ```

mod ast;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::*;
pub use lexer::{tokenize, LexError, Span, Token, TokenKind};
pub use parser::{parse, ParseError};
pub use printer::print;
pub use validate::{validate, Diagnostic, DiagnosticKind};

use crate::graph::Model;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("syntax error at {0}")]
    Syntax(ParseError),
    #[error("{} problem(s) in model", .0.len())]
    Invalid(Vec<Diagnostic>),
}

impl ModelError {
    /// One line per problem, prefixed with `origin` (usually a file name).
    pub fn render(&self, origin: &str) -> String {
        match self {
            ModelError::Syntax(e) => format!("{origin}: {e}"),
            ModelError::Invalid(ds) => ds
                .iter()
                .map(|d| format!("{origin}: {d}"))
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

/// Parses and validates in one go.
pub fn load(src: &str) -> Result<Model, ModelError> {
    let parsed = parse(src).map_err(ModelError::Syntax)?;
    validate(&parsed).map_err(ModelError::Invalid)
}
