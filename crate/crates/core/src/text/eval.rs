//! Type checking, expression evaluation and statement execution for the
//! action language.

use std::collections::BTreeMap;

use super::ast::{ActionBlock, BinOp, Expr, Stmt, UnOp};
use crate::model::{Value, ValueType};

/// Variable bindings of a component instance.
pub type Env = BTreeMap<String, Value>;

/// Payload of the message being processed, field name to value.
pub type Payload = BTreeMap<String, Value>;

/// Evaluation failures.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("no payload field `{0}` in the current message")]
    NoPayload(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("integer overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("`receipt` is only available in rule conditions")]
    ReceiptUnavailable,
    #[error("random bound must be positive, got {0}")]
    BadRandomBound(i64),
}

/// Failures while executing statements.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("assignment to undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("emission failed: {0}")]
    Emit(String),
}

/// Read access needed to evaluate an expression.
pub trait EvalCtx {
    fn var(&self, name: &str) -> Option<Value>;
    fn payload(&self, _field: &str) -> Option<Value> {
        None
    }
    fn receipt(&self, _message: &str) -> Option<bool> {
        None
    }
    /// Draws a value in `0..bound`.
    fn random(&mut self, bound: i64) -> i64;
}

/// Receiver of the side effects of statements.
pub trait ActionHost {
    fn send(&mut self, port: &str, message: &str, args: Vec<Value>) -> Result<(), String>;
    fn reply(&mut self, message: &str, args: Vec<Value>) -> Result<(), String>;
    fn log(&mut self, _value: &Value) {}
    fn probe(&mut self) {}
    fn random(&mut self, bound: i64) -> i64;
}

/// Bound used by `random()` without an argument.
pub const DEFAULT_RANDOM_BOUND: i64 = 1 << 31;

fn int(v: Value, what: &str) -> Result<i64, EvalError> {
    match v {
        Value::Int(i) => Ok(i),
        other => Err(EvalError::Type(format!("{what} expects int, got {}", other.ty()))),
    }
}

fn boolean(v: Value, what: &str) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::Type(format!("{what} expects bool, got {}", other.ty()))),
    }
}

/// Evaluates an expression.
pub fn eval(e: &Expr, ctx: &mut dyn EvalCtx) -> Result<Value, EvalError> {
    Ok(match e {
        Expr::Int(i) => Value::Int(*i),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Str(s) => Value::Str(s.clone()),
        Expr::Var(v) => ctx.var(v).ok_or_else(|| EvalError::Unbound(v.clone()))?,
        Expr::Payload(p) => ctx.payload(p).ok_or_else(|| EvalError::NoPayload(p.clone()))?,
        Expr::Receipt(m) => Value::Bool(ctx.receipt(m).ok_or(EvalError::ReceiptUnavailable)?),
        Expr::Random(bound) => {
            let b = match bound {
                Some(b) => int(eval(b, ctx)?, "random")?,
                None => DEFAULT_RANDOM_BOUND,
            };
            if b <= 0 {
                return Err(EvalError::BadRandomBound(b));
            }
            Value::Int(ctx.random(b))
        }
        Expr::Unary(UnOp::Neg, a) => {
            Value::Int(int(eval(a, ctx)?, "-")?.checked_neg().ok_or(EvalError::Overflow)?)
        }
        Expr::Unary(UnOp::Not, a) => Value::Bool(!boolean(eval(a, ctx)?, "!")?),
        Expr::Binary(BinOp::And, a, b) => {
            if !boolean(eval(a, ctx)?, "&&")? {
                Value::Bool(false)
            } else {
                Value::Bool(boolean(eval(b, ctx)?, "&&")?)
            }
        }
        Expr::Binary(BinOp::Or, a, b) => {
            if boolean(eval(a, ctx)?, "||")? {
                Value::Bool(true)
            } else {
                Value::Bool(boolean(eval(b, ctx)?, "||")?)
            }
        }
        Expr::Binary(op, a, b) => {
            let (x, y) = (eval(a, ctx)?, eval(b, ctx)?);
            match op {
                BinOp::Eq | BinOp::Ne => {
                    if x.ty() != y.ty() {
                        return Err(EvalError::Type(format!("cannot compare {} with {}", x.ty(), y.ty())));
                    }
                    Value::Bool((x == y) == (*op == BinOp::Eq))
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let (x, y) = (int(x, op.symbol())?, int(y, op.symbol())?);
                    Value::Bool(match op {
                        BinOp::Lt => x < y,
                        BinOp::Le => x <= y,
                        BinOp::Gt => x > y,
                        _ => x >= y,
                    })
                }
                BinOp::Add => match (x, y) {
                    (Value::Str(a), Value::Str(b)) => Value::Str(a + &b),
                    (x, y) => Value::Int(
                        int(x, "+")?.checked_add(int(y, "+")?).ok_or(EvalError::Overflow)?,
                    ),
                },
                _ => {
                    let (x, y) = (int(x, op.symbol())?, int(y, op.symbol())?);
                    Value::Int(match op {
                        BinOp::Sub => x.checked_sub(y).ok_or(EvalError::Overflow)?,
                        BinOp::Mul => x.checked_mul(y).ok_or(EvalError::Overflow)?,
                        BinOp::Div | BinOp::Rem => {
                            if y == 0 {
                                return Err(EvalError::DivisionByZero);
                            }
                            let r = if *op == BinOp::Div {
                                x.checked_div(y)
                            } else {
                                x.checked_rem(y)
                            };
                            r.ok_or(EvalError::Overflow)?
                        }
                        _ => unreachable!("handled above"),
                    })
                }
            }
        }
    })
}

struct EnvCtx<'a> {
    env: &'a Env,
    payload: Option<&'a Payload>,
    host: &'a mut dyn ActionHost,
}

impl EvalCtx for EnvCtx<'_> {
    fn var(&self, name: &str) -> Option<Value> {
        self.env.get(name).cloned()
    }
    fn payload(&self, field: &str) -> Option<Value> {
        self.payload.and_then(|p| p.get(field).cloned())
    }
    fn random(&mut self, bound: i64) -> i64 {
        self.host.random(bound)
    }
}

/// Evaluates a guard against an environment. Guards draw no random numbers
/// from a host, so a fixed generator is used.
pub fn eval_guard(g: &Expr, env: &Env) -> Result<bool, EvalError> {
    struct Pure<'a>(&'a Env);
    impl EvalCtx for Pure<'_> {
        fn var(&self, name: &str) -> Option<Value> {
            self.0.get(name).cloned()
        }
        fn random(&mut self, _bound: i64) -> i64 {
            0
        }
    }
    boolean(eval(g, &mut Pure(env))?, "guard")
}

/// Runs a block, returning the updated environment. Effects reach `host` in
/// program order. Assignments must target declared variables.
pub fn exec_actions(
    env: &Env,
    block: &ActionBlock,
    payload: Option<&Payload>,
    host: &mut dyn ActionHost,
) -> Result<Env, ExecError> {
    let mut env = env.clone();
    exec_stmts(&mut env, &block.stmts, payload, host)?;
    Ok(env)
}

fn exec_stmts(
    env: &mut Env,
    stmts: &[Stmt],
    payload: Option<&Payload>,
    host: &mut dyn ActionHost,
) -> Result<(), ExecError> {
    for s in stmts {
        let value = |e: &Expr, env: &Env, host: &mut dyn ActionHost| {
            eval(e, &mut EnvCtx { env, payload, host })
        };
        match s {
            Stmt::Assign(v, e) => {
                let val = value(e, env, host)?;
                match env.get_mut(v) {
                    Some(slot) => {
                        if slot.ty() != val.ty() {
                            return Err(EvalError::Type(format!(
                                "`{v}` is {}, assigned {}",
                                slot.ty(),
                                val.ty()
                            ))
                            .into());
                        }
                        *slot = val;
                    }
                    None => return Err(ExecError::UndeclaredVariable(v.clone())),
                }
            }
            Stmt::Send { port, message, args } => {
                let vals = args
                    .iter()
                    .map(|a| value(a, env, host))
                    .collect::<Result<Vec<_>, _>>()?;
                host.send(port, message, vals).map_err(ExecError::Emit)?;
            }
            Stmt::Reply { message, args } => {
                let vals = args
                    .iter()
                    .map(|a| value(a, env, host))
                    .collect::<Result<Vec<_>, _>>()?;
                host.reply(message, vals).map_err(ExecError::Emit)?;
            }
            Stmt::Log(e) => {
                let v = value(e, env, host)?;
                host.log(&v);
            }
            Stmt::Probe => host.probe(),
            Stmt::If { cond, then, els } => {
                let c = boolean(value(cond, env, host)?, "if")?;
                exec_stmts(env, if c { then } else { els }, payload, host)?;
            }
        }
    }
    Ok(())
}

/// Static information needed to type-check actions and guards.
pub trait TypeCtx {
    fn var(&self, name: &str) -> Option<ValueType>;
    fn payload(&self, field: &str) -> Option<ValueType>;
    fn send_signature(&self, port: &str, message: &str) -> Result<Vec<ValueType>, String>;
    fn reply_signature(&self, message: &str) -> Result<Vec<ValueType>, String>;
}

/// Infers the type of an expression.
pub fn type_of(e: &Expr, ctx: &dyn TypeCtx) -> Result<ValueType, String> {
    use ValueType::*;
    let expect = |e: &Expr, want: ValueType, what: &str| -> Result<(), String> {
        let t = type_of(e, ctx)?;
        if t == want {
            Ok(())
        } else {
            Err(format!("{what} expects {want}, got {t} in `{e}`"))
        }
    };
    Ok(match e {
        Expr::Int(_) => Int,
        Expr::Bool(_) => Bool,
        Expr::Str(_) => Str,
        Expr::Var(v) => ctx.var(v).ok_or_else(|| format!("unknown variable `{v}`"))?,
        Expr::Payload(p) => ctx
            .payload(p)
            .ok_or_else(|| format!("no payload field `{p}` available here"))?,
        Expr::Receipt(_) => return Err("`receipt` is only available in rule conditions".into()),
        Expr::Random(b) => {
            if let Some(b) = b {
                expect(b, Int, "random")?;
            }
            Int
        }
        Expr::Unary(UnOp::Neg, a) => {
            expect(a, Int, "-")?;
            Int
        }
        Expr::Unary(UnOp::Not, a) => {
            expect(a, Bool, "!")?;
            Bool
        }
        Expr::Binary(op, a, b) => match op {
            BinOp::And | BinOp::Or => {
                expect(a, Bool, op.symbol())?;
                expect(b, Bool, op.symbol())?;
                Bool
            }
            BinOp::Eq | BinOp::Ne => {
                let (x, y) = (type_of(a, ctx)?, type_of(b, ctx)?);
                if x != y {
                    return Err(format!("cannot compare {x} with {y} in `{e}`"));
                }
                Bool
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                expect(a, Int, op.symbol())?;
                expect(b, Int, op.symbol())?;
                Bool
            }
            BinOp::Add => {
                let (x, y) = (type_of(a, ctx)?, type_of(b, ctx)?);
                match (x, y) {
                    (Int, Int) => Int,
                    (Str, Str) => Str,
                    _ => return Err(format!("`+` needs two ints or two strings in `{e}`")),
                }
            }
            _ => {
                expect(a, Int, op.symbol())?;
                expect(b, Int, op.symbol())?;
                Int
            }
        },
    })
}

/// Checks that a guard is a well-typed boolean.
pub fn typecheck_guard(g: &Expr, ctx: &dyn TypeCtx) -> Result<(), String> {
    match type_of(g, ctx)? {
        ValueType::Bool => Ok(()),
        t => Err(format!("guard has type {t}")),
    }
}

/// Checks every statement of a block.
pub fn typecheck_block(b: &ActionBlock, ctx: &dyn TypeCtx) -> Result<(), String> {
    check_stmts(&b.stmts, ctx)
}

fn check_args(args: &[Expr], sig: &[ValueType], ctx: &dyn TypeCtx, what: &str) -> Result<(), String> {
    if args.len() != sig.len() {
        return Err(format!("{what} takes {} arguments, {} given", sig.len(), args.len()));
    }
    for (a, t) in args.iter().zip(sig) {
        let at = type_of(a, ctx)?;
        if at != *t {
            return Err(format!("{what} argument `{a}` is {at}, expected {t}"));
        }
    }
    Ok(())
}

fn check_stmts(stmts: &[Stmt], ctx: &dyn TypeCtx) -> Result<(), String> {
    for s in stmts {
        match s {
            Stmt::Assign(v, e) => {
                let vt = ctx.var(v).ok_or_else(|| format!("unknown variable `{v}`"))?;
                let et = type_of(e, ctx)?;
                if vt != et {
                    return Err(format!("`{v}` is {vt}, assigned {et}"));
                }
            }
            Stmt::Send { port, message, args } => {
                let sig = ctx.send_signature(port, message)?;
                check_args(args, &sig, ctx, &format!("{port}.{message}"))?;
            }
            Stmt::Reply { message, args } => {
                let sig = ctx.reply_signature(message)?;
                check_args(args, &sig, ctx, message)?;
            }
            Stmt::Log(e) => {
                type_of(e, ctx)?;
            }
            Stmt::If { cond, then, els } => {
                typecheck_guard(cond, ctx)?;
                check_stmts(then, ctx)?;
                check_stmts(els, ctx)?;
            }
            Stmt::Probe => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, Value)]) -> Env {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn guard_with_counter() {
        let g = Expr::bin(BinOp::Gt, Expr::var("count"), Expr::Int(2));
        assert!(eval_guard(&g, &env(&[("count", Value::Int(3))])).unwrap());
        assert!(!eval_guard(&g, &env(&[("count", Value::Int(1))])).unwrap());
        assert_eq!(eval_guard(&g, &Env::new()), Err(EvalError::Unbound("count".into())));
    }

    #[test]
    fn overflow_and_division() {
        let e = Expr::bin(BinOp::Add, Expr::Int(i64::MAX), Expr::Int(1));
        assert_eq!(eval_guard(&Expr::bin(BinOp::Eq, e, Expr::Int(0)), &Env::new()), Err(EvalError::Overflow));
        let d = Expr::bin(BinOp::Div, Expr::Int(1), Expr::Int(0));
        assert_eq!(
            eval_guard(&Expr::bin(BinOp::Eq, d, Expr::Int(0)), &Env::new()),
            Err(EvalError::DivisionByZero)
        );
    }

    #[test]
    fn short_circuit_skips_errors() {
        let bad = Expr::bin(BinOp::Eq, Expr::var("nope"), Expr::Int(1));
        let g = Expr::bin(BinOp::Or, Expr::Bool(true), bad);
        assert!(eval_guard(&g, &Env::new()).unwrap());
    }
}
