//! Abstract syntax of the action language and its canonical printing.

use std::fmt::{self, Write};

/// Unary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

/// Expressions. `Receipt` is only meaningful in rule conditions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Str(String),
    Var(String),
    /// Field of the payload of the message being processed: `msg.field`.
    Payload(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `random()` or `random(bound)`.
    Random(Option<Box<Expr>>),
    /// `receipt(message)`.
    Receipt(String),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    /// Disjunction of a list; `false` when empty.
    pub fn any(items: impl IntoIterator<Item = Expr>) -> Expr {
        items
            .into_iter()
            .reduce(|a, b| Expr::bin(BinOp::Or, a, b))
            .unwrap_or(Expr::Bool(false))
    }

    /// Conjunction of a list; `true` when empty.
    pub fn all(items: impl IntoIterator<Item = Expr>) -> Expr {
        items
            .into_iter()
            .reduce(|a, b| Expr::bin(BinOp::And, a, b))
            .unwrap_or(Expr::Bool(true))
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 7,
            // A negative literal prints with a leading minus.
            Expr::Int(i) if *i < 0 => 7,
            _ => 8,
        }
    }

    /// Splits a conjunction into its parts.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary(BinOp::And, a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            e => vec![e],
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Str(s) => f.write_str(&quote(s)),
            Expr::Var(v) => f.write_str(v),
            Expr::Payload(p) => write!(f, "msg.{p}"),
            Expr::Unary(op, e) => {
                let sym = match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                };
                // `-(5)` keeps a negated literal distinct from a negative one.
                if e.prec() < 8 || (*op == UnOp::Neg && matches!(**e, Expr::Int(_))) {
                    write!(f, "{sym}({e})")
                } else {
                    write!(f, "{sym}{e}")
                }
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if a.prec() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if b.prec() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Random(None) => f.write_str("random()"),
            Expr::Random(Some(e)) => write!(f, "random({e})"),
            Expr::Receipt(m) => write!(f, "receipt({m})"),
        }
    }
}

/// Statements of the action language. There are no loops.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign(String, Expr),
    Send {
        port: String,
        message: String,
        args: Vec<Expr>,
    },
    /// Answers on the port the current message arrived on.
    Reply {
        message: String,
        args: Vec<Expr>,
    },
    Log(Expr),
    If {
        cond: Expr,
        then: Vec<Stmt>,
        els: Vec<Stmt>,
    },
    /// Asks the attached input provider for a decision.
    Probe,
}

/// An ordered statement list attached to a state or transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ActionBlock {
    pub stmts: Vec<Stmt>,
}

impl ActionBlock {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Self { stmts }
    }

    pub fn contains_probe(&self) -> bool {
        fn any(stmts: &[Stmt]) -> bool {
            stmts.iter().any(|s| match s {
                Stmt::Probe => true,
                Stmt::If { then, els, .. } => any(then) || any(els),
                _ => false,
            })
        }
        any(&self.stmts)
    }

    /// Canonical text, `{ ... }`, nested blocks indented two spaces per level
    /// relative to `indent`.
    pub fn render(&self, indent: usize) -> String {
        let mut out = String::new();
        render_block(&self.stmts, indent, &mut out);
        out
    }
}

fn args_text(args: &[Expr]) -> String {
    args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

fn has_if(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| matches!(s, Stmt::If { .. }))
}

fn render_block(stmts: &[Stmt], indent: usize, out: &mut String) {
    if stmts.is_empty() {
        out.push_str("{ }");
        return;
    }
    if !has_if(stmts) {
        out.push_str("{ ");
        for s in stmts {
            render_stmt(s, indent, out);
            out.push(' ');
        }
        out.push('}');
        return;
    }
    out.push_str("{\n");
    for s in stmts {
        out.push_str(&" ".repeat(indent + 2));
        render_stmt(s, indent + 2, out);
        out.push('\n');
    }
    out.push_str(&" ".repeat(indent));
    out.push('}');
}

fn render_stmt(s: &Stmt, indent: usize, out: &mut String) {
    match s {
        Stmt::Assign(v, e) => {
            let _ = write!(out, "{v} = {e};");
        }
        Stmt::Send { port, message, args } => {
            let _ = write!(out, "send {port}.{message}({});", args_text(args));
        }
        Stmt::Reply { message, args } => {
            let _ = write!(out, "reply {message}({});", args_text(args));
        }
        Stmt::Log(e) => {
            let _ = write!(out, "log({e});");
        }
        Stmt::Probe => out.push_str("probe;"),
        Stmt::If { cond, then, els } => {
            let _ = write!(out, "if ({cond}) ");
            render_block(then, indent, out);
            if !els.is_empty() {
                out.push_str(" else ");
                render_block(els, indent, out);
            }
        }
    }
}

impl fmt::Display for ActionBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(0))
    }
}

/// Quotes a string literal with the escapes the lexer understands.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
