//! MiniOO front end: lexing, parsing, static checking, and canonical rendering.

pub mod ast;
pub mod check;
mod lexer;
pub mod parser;
pub mod render;

use thiserror::Error;

pub use ast::{NodeId, Program, Span};
pub use check::{check_program, check_program_typed, StaticError, StaticErrorKind, TypeTable};
pub use parser::{parse, parse_named};
pub use render::render;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}
