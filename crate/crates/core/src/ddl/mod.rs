//! The statement language: lexer, parser, printer and name analysis.
//!
//! [`parse_statements`] is purely syntactic. Name resolution for channel and
//! function bodies happens in [`analyze_query`] / [`analyze_expr`], which the
//! catalog runs when such an entity is created.

mod analyze;
mod ast;
mod lexer;
mod params;
mod parser;
mod print;

pub use analyze::{analyze_expr, analyze_query, parse_channel_body, BodyInfo};
pub use ast::*;
pub use params::parse_channel_parameters;
pub use parser::{parse_expr, parse_query, parse_statements};
pub use print::print_statements;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DdlError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Analysis(String),
}
