//! Concrete syntax for models and the action language: tokenizer, parser,
//! canonical serializer, and the evaluator used by guards and actions.

mod ast;
mod eval;
pub mod lexer;
mod parser;
mod serialize;

pub use ast::{quote, ActionBlock, BinOp, Expr, Stmt, UnOp};
pub use eval::{
    eval, eval_guard, exec_actions, type_of, typecheck_block, typecheck_guard, ActionHost, Env,
    EvalCtx, EvalError, ExecError, Payload, TypeCtx, DEFAULT_RANDOM_BOUND,
};
pub use lexer::SyntaxError;
pub use parser::{
    parse_block, parse_block_str, parse_expr, parse_expr_str, parse_model, parse_model_unchecked,
};
pub use serialize::{canonicalize, serialize};

use crate::model::Violation;

/// Errors from loading a model text.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{line}:{col}: {message}")]
    Resolve { line: u32, col: u32, message: String },
    #[error("model is not well-formed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}
