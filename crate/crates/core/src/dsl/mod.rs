//! The structured algorithm language: declarations, assignments, bounded
//! iteration with conjunctive filters, reductions, and if/else.

pub mod ast;
mod lexer;
mod parser;
mod pretty;
mod validate;

use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse, parse_statements};
pub use pretty::{comparison_text, expr_text, filters_text, pretty, pretty_statements, target_text};
pub use validate::{check, check_with_signatures, validate, Diagnostic, DiagnosticKind};

/// Built-in operations and their arities. `compare` has no call syntax; it
/// is produced by relational operators used as values.
pub const PRIMITIVES: &[(&str, usize)] = &[
    ("add", 2),
    ("sub", 2),
    ("mul", 2),
    ("div", 2),
    ("sqrt", 1),
    ("square", 1),
    ("abs", 1),
    ("compare", 2),
];

pub fn primitive_arity(name: &str) -> Option<usize> {
    PRIMITIVES.iter().find(|(n, _)| *n == name).map(|&(_, a)| a)
}

pub fn is_primitive(name: &str) -> bool {
    primitive_arity(name).is_some()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{span}: {message}")]
    Lex { span: Span, message: String },
    #[error("{span}: expected {}, found {found}", expected.join(" or "))]
    Parse { span: Span, expected: Vec<String>, found: String },
    #[error("{}", DiagnosticList(.0))]
    Invalid(Vec<Diagnostic>),
}

impl DslError {
    /// Every (position, message) pair carried by the error.
    pub fn diagnostics(&self) -> Vec<(Span, String)> {
        match self {
            DslError::Lex { span, message } => vec![(*span, message.clone())],
            DslError::Parse { span, .. } => vec![(*span, self.to_string())],
            DslError::Invalid(ds) => ds.iter().map(|d| (d.span, d.to_string())).collect(),
        }
    }
}

struct DiagnosticList<'a>(&'a [Diagnostic]);

impl fmt::Display for DiagnosticList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Program text together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub text: String,
    pub origin: String,
}

impl SourceProgram {
    pub fn inline(text: impl Into<String>) -> Self {
        SourceProgram { text: text.into(), origin: "<inline>".into() }
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(SourceProgram { text, origin: path.display().to_string() })
    }

    /// Name of the program: the file stem, or `inline`.
    pub fn name(&self) -> String {
        Path::new(&self.origin)
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|_| self.origin != "<inline>")
            .unwrap_or("inline")
            .to_string()
    }

    /// Tokenize, parse and validate.
    pub fn compile(&self) -> Result<Ast, DslError> {
        parse_program(&self.text)
    }
}

/// Tokenize, parse and validate `text`.
pub fn parse_program(text: &str) -> Result<Ast, DslError> {
    let tokens = tokenize(text)?;
    validate(parse(&tokens)?)
}
