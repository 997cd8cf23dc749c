//! Skill-policy language: a flat list of command statements with optional
//! bindings. See `docs/grammar.md` for the EBNF.

mod ast;
mod builtins;
mod format;
mod interp;
mod parser;

pub use ast::{Arg, Program, Span, Statement, Value};
pub use builtins::{Builtin, ParamKind};
pub use format::format;
pub use interp::{ExecCursor, RuntimeError, RuntimeErrorKind, StepError, StepEvent};
pub use parser::parse;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{span}: unknown command {name:?}")]
    UnknownCommand { span: Span, name: String },
    #[error("{span}: {message}")]
    Arity { span: Span, message: String },
    #[error("{span}: argument {param:?} expects {expected}")]
    ArgumentKind { span: Span, param: String, expected: ParamKind },
    #[error("{span}: unbound identifier {name:?}")]
    UnboundIdentifier { span: Span, name: String },
}

impl DslError {
    pub fn span(&self) -> Span {
        match self {
            DslError::Parse { line, column, .. } => Span { line: *line, column: *column },
            DslError::UnknownCommand { span, .. }
            | DslError::Arity { span, .. }
            | DslError::ArgumentKind { span, .. }
            | DslError::UnboundIdentifier { span, .. } => *span,
        }
    }
}
