//! Recursive-descent parser for `.pmx` model files and for the expression
//! and statement sublanguage shared with rule scripts.

use super::ast::{ActionBlock, BinOp, Expr, Stmt, UnOp};
use super::lexer::{Cursor, SyntaxError, Tok};
use super::ModelError;
use crate::model::{
    validate, Completeness, Component, Connector, Direction, Hsm, Interface, MessageDecl,
    MessageRef, Port, PortRef, State, StateId, StateKind, SystemModel, Transition, Value,
    ValueType, VarDecl,
};

/// Parses and validates a model.
pub fn parse_model(src: &str) -> Result<SystemModel, ModelError> {
    let m = parse_model_unchecked(src)?;
    validate(&m).map_err(ModelError::Invalid)?;
    Ok(m)
}

/// Parses a model and resolves bare triggers without running validation.
pub fn parse_model_unchecked(src: &str) -> Result<SystemModel, ModelError> {
    let mut p = ModelParser {
        cur: Cursor::new(src)?,
        pending: Vec::new(),
    };
    let mut model = p.system()?;
    resolve_triggers(&mut model, p.pending)?;
    Ok(model)
}

/// A trigger written without a port, resolved once all ports are known.
struct PendingTrigger {
    component: usize,
    transition: String,
    index: usize,
    line: u32,
    col: u32,
}

fn resolve_triggers(model: &mut SystemModel, pending: Vec<PendingTrigger>) -> Result<(), ModelError> {
    for p in pending {
        let comp = &model.components[p.component];
        let hsm = comp.behavior.as_ref().expect("pending trigger implies behaviour");
        let msg = hsm.transitions[p.transition.as_str()].triggers[p.index].message.clone();
        let resolved = model
            .resolve_message(comp, &msg, Direction::Input)
            .map_err(|e| ModelError::Resolve {
                line: p.line,
                col: p.col,
                message: format!("trigger of `{}`: {e}", p.transition),
            })?;
        let comp = &mut model.components[p.component];
        let hsm = comp.behavior.as_mut().expect("checked above");
        hsm.transitions
            .get_mut(p.transition.as_str())
            .expect("exists")
            .triggers[p.index] = resolved;
    }
    Ok(())
}

struct ModelParser<'a> {
    cur: Cursor<'a>,
    pending: Vec<PendingTrigger>,
}

fn value_type(c: &mut Cursor) -> Result<ValueType, SyntaxError> {
    match c.ident()?.as_str() {
        "int" => Ok(ValueType::Int),
        "bool" => Ok(ValueType::Bool),
        "string" => Ok(ValueType::Str),
        other => Err(c.error(format!("unknown type `{other}`"))),
    }
}

fn literal(c: &mut Cursor) -> Result<Value, SyntaxError> {
    let neg = c.eat(&Tok::Minus);
    match c.bump() {
        Tok::Int(i) => Ok(Value::Int(if neg { -i } else { i })),
        Tok::IntMin if neg => Ok(Value::Int(i64::MIN)),
        Tok::Ident(s) if !neg && s == "true" => Ok(Value::Bool(true)),
        Tok::Ident(s) if !neg && s == "false" => Ok(Value::Bool(false)),
        Tok::Str(s) if !neg => Ok(Value::Str(s)),
        t => Err(c.error(format!("expected literal, found {t}"))),
    }
}

impl ModelParser<'_> {
    fn system(&mut self) -> Result<SystemModel, ModelError> {
        let c = &mut self.cur;
        c.expect_kw("system")?;
        let mut model = SystemModel::new(c.ident()?);
        c.expect(&Tok::LBrace)?;
        loop {
            let c = &mut self.cur;
            if c.eat(&Tok::RBrace) {
                break;
            }
            let mut level = None;
            if c.eat(&Tok::At) {
                c.expect_kw("level")?;
                let l = c.ident()?;
                level = Some(
                    l.parse::<Completeness>()
                        .map_err(|e| c.error(e))?,
                );
                if !c.is_kw("component") {
                    return Err(c.unexpected("`component` after `@level`").into());
                }
            }
            if c.eat_kw("interface") {
                let iface = self.interface()?;
                model.interfaces.push(iface);
            } else if c.eat_kw("component") {
                let idx = model.components.len();
                let mut comp = self.component(idx)?;
                comp.level = level.unwrap_or(Completeness::Complete);
                model.components.push(comp);
            } else if c.eat_kw("connect") {
                let a = self.port_ref()?;
                self.cur.expect(&Tok::Link)?;
                let b = self.port_ref()?;
                self.cur.eat(&Tok::Semi);
                model.connectors.push(Connector { a, b });
            } else if c.eat_kw("contains") {
                let parent = c.ident()?;
                let child = c.ident()?;
                c.eat(&Tok::Semi);
                model.containment.push((parent, child));
            } else {
                return Err(c
                    .unexpected("`interface`, `component`, `connect`, `contains` or `}`")
                    .into());
            }
        }
        if !self.cur.at_eof() {
            return Err(self.cur.unexpected("end of input").into());
        }
        Ok(model)
    }

    fn port_ref(&mut self) -> Result<PortRef, SyntaxError> {
        let comp = self.cur.ident()?;
        self.cur.expect(&Tok::Dot)?;
        let port = self.cur.ident()?;
        Ok(PortRef::new(comp, port))
    }

    fn interface(&mut self) -> Result<Interface, SyntaxError> {
        let c = &mut self.cur;
        let name = c.ident()?;
        c.expect(&Tok::LBrace)?;
        let mut messages = Vec::new();
        while !c.eat(&Tok::RBrace) {
            let direction = match c.ident()?.as_str() {
                "in" => Direction::Input,
                "out" => Direction::Output,
                other => return Err(c.error(format!("expected `in` or `out`, found `{other}`"))),
            };
            let mname = c.ident()?;
            let mut params = Vec::new();
            if c.eat(&Tok::LParen) {
                while !c.eat(&Tok::RParen) {
                    let pname = c.ident()?;
                    c.expect(&Tok::Colon)?;
                    params.push((pname, value_type(c)?));
                    if !c.eat(&Tok::Comma) && !matches!(c.peek(), Tok::RParen) {
                        return Err(c.unexpected("`,` or `)`"));
                    }
                }
            }
            c.eat(&Tok::Semi);
            messages.push(MessageDecl {
                name: mname,
                direction,
                params,
            });
        }
        Ok(Interface { name, messages })
    }

    fn component(&mut self, idx: usize) -> Result<Component, SyntaxError> {
        let name = self.cur.ident()?;
        let mut comp = Component::new(name);
        self.cur.expect(&Tok::LBrace)?;
        loop {
            let c = &mut self.cur;
            if c.eat(&Tok::RBrace) {
                break;
            }
            if c.eat_kw("port") {
                let pname = c.ident()?;
                c.expect(&Tok::Colon)?;
                let conjugated = c.eat(&Tok::Tilde);
                let interface = c.ident()?;
                c.eat(&Tok::Semi);
                comp.ports.push(Port {
                    name: pname,
                    interface,
                    conjugated,
                });
            } else if c.eat_kw("var") {
                let vname = c.ident()?;
                c.expect(&Tok::Colon)?;
                let ty = value_type(c)?;
                let init = if c.eat(&Tok::Assign) {
                    Some(literal(c)?)
                } else {
                    None
                };
                c.eat(&Tok::Semi);
                comp.vars.push(VarDecl { name: vname, ty, init });
            } else if c.eat_kw("statemachine") {
                if comp.behavior.is_some() {
                    return Err(c.error("component has a second statemachine"));
                }
                let root = c.ident()?;
                let mut hsm = Hsm::empty(root.clone());
                self.cur.expect(&Tok::LBrace)?;
                self.region(idx, &mut hsm, &StateId(root), false)?;
                comp.behavior = Some(hsm);
            } else {
                return Err(c.unexpected("`port`, `var`, `statemachine` or `}`"));
            }
        }
        Ok(comp)
    }

    /// Parses items up to and including the closing brace of a region. A
    /// composite region may interleave its own entry/exit blocks.
    fn region(&mut self, comp: usize, hsm: &mut Hsm, parent: &StateId, own_actions: bool) -> Result<(), SyntaxError> {
        loop {
            if self.cur.eat(&Tok::RBrace) {
                return Ok(());
            }
            if own_actions && (self.cur.is_kw("entry") || self.cur.is_kw("exit")) {
                let mut st = hsm.states[parent.as_str()].clone();
                self.entry_exit(&mut st)?;
                hsm.states[parent.as_str()] = st;
                continue;
            }
            self.item(comp, hsm, parent)?;
        }
    }

    fn item(&mut self, comp: usize, hsm: &mut Hsm, parent: &StateId) -> Result<(), SyntaxError> {
        let c = &mut self.cur;
        let (line, col) = (c.here().line, c.here().col);
        let kw = match c.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(c.unexpected("state, pseudo-state, transition or `}`")),
        };
        let pseudo = match kw.as_str() {
            "initial" => Some(StateKind::Initial),
            "choice" => Some(StateKind::Choice),
            "junction" => Some(StateKind::Junction),
            "entrypoint" => Some(StateKind::EntryPoint),
            "exitpoint" => Some(StateKind::ExitPoint),
            _ => None,
        };
        if let Some(kind) = pseudo {
            c.bump();
            let id = c.ident()?;
            c.eat(&Tok::Semi);
            return self.insert_state(hsm, State::new(id, kind, Some(parent.clone())), line, col);
        }
        match kw.as_str() {
            "state" => {
                c.bump();
                let mut st = self.state_head(StateKind::Basic, parent)?;
                if self.cur.eat(&Tok::LBrace) {
                    while !self.cur.eat(&Tok::RBrace) {
                        self.entry_exit(&mut st)?;
                    }
                } else {
                    self.cur.eat(&Tok::Semi);
                }
                self.insert_state(hsm, st, line, col)
            }
            "composite" => {
                c.bump();
                let st = self.state_head(StateKind::Composite, parent)?;
                let id = st.id.clone();
                self.insert_state(hsm, st, line, col)?;
                self.cur.expect(&Tok::LBrace)?;
                self.region(comp, hsm, &id, true)
            }
            "transition" => {
                c.bump();
                self.transition(comp, hsm)
            }
            other => Err(SyntaxError {
                line,
                col,
                message: format!("unexpected `{other}` in state machine"),
            }),
        }
    }

    fn insert_state(&mut self, hsm: &mut Hsm, st: State, line: u32, col: u32) -> Result<(), SyntaxError> {
        if hsm.contains_element(st.id.as_str()) {
            return Err(SyntaxError {
                line,
                col,
                message: format!("duplicate element id `{}`", st.id),
            });
        }
        hsm.add_state(st);
        Ok(())
    }

    fn state_head(&mut self, kind: StateKind, parent: &StateId) -> Result<State, SyntaxError> {
        let id = self.cur.ident()?;
        let mut st = State::new(id, kind, Some(parent.clone()));
        if let Tok::Str(_) = self.cur.peek() {
            if let Tok::Str(name) = self.cur.bump() {
                st.name = name;
            }
        }
        Ok(st)
    }

    fn entry_exit(&mut self, st: &mut State) -> Result<(), SyntaxError> {
        let c = &mut self.cur;
        if c.eat_kw("entry") {
            if st.entry.is_some() {
                return Err(c.error("second entry block"));
            }
            st.entry = Some(parse_block(c)?);
        } else if c.eat_kw("exit") {
            if st.exit.is_some() {
                return Err(c.error("second exit block"));
            }
            st.exit = Some(parse_block(c)?);
        } else {
            return Err(c.unexpected("`entry`, `exit` or `}`"));
        }
        Ok(())
    }

    fn transition(&mut self, comp: usize, hsm: &mut Hsm) -> Result<(), SyntaxError> {
        let c = &mut self.cur;
        let (line, col) = (c.here().line, c.here().col);
        let id = c.ident()?;
        c.expect(&Tok::Colon)?;
        let src = c.ident()?;
        c.expect(&Tok::Arrow)?;
        let des = c.ident()?;
        let mut t = Transition::new(id.clone(), &StateId(src), &StateId(des));
        let mut bare = Vec::new();
        if c.eat_kw("on") {
            loop {
                let (tl, tc) = (c.here().line, c.here().col);
                let first = c.ident()?;
                if c.eat(&Tok::Dot) {
                    let msg = c.ident()?;
                    t.triggers.push(MessageRef::new(first, msg));
                } else {
                    bare.push((t.triggers.len(), tl, tc));
                    t.triggers.push(MessageRef::new("", first));
                }
                if !c.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if c.eat(&Tok::LBracket) {
            t.guard = Some(parse_expr(c)?);
            c.expect(&Tok::RBracket)?;
        }
        if c.eat(&Tok::Slash) {
            t.action = Some(parse_block(c)?);
        }
        c.eat(&Tok::Semi);
        if hsm.contains_element(&id) {
            return Err(SyntaxError {
                line,
                col,
                message: format!("duplicate element id `{id}`"),
            });
        }
        for (index, line, col) in bare {
            self.pending.push(PendingTrigger {
                component: comp,
                transition: id.clone(),
                index,
                line,
                col,
            });
        }
        hsm.add_transition(t);
        Ok(())
    }
}

/// Parses `{ stmt* }`.
pub fn parse_block(c: &mut Cursor) -> Result<ActionBlock, SyntaxError> {
    Ok(ActionBlock::new(parse_stmts(c)?))
}

fn parse_stmts(c: &mut Cursor) -> Result<Vec<Stmt>, SyntaxError> {
    c.expect(&Tok::LBrace)?;
    let mut out = Vec::new();
    while !c.eat(&Tok::RBrace) {
        out.push(parse_stmt(c)?);
    }
    Ok(out)
}

fn call_args(c: &mut Cursor) -> Result<Vec<Expr>, SyntaxError> {
    c.expect(&Tok::LParen)?;
    let mut args = Vec::new();
    if c.eat(&Tok::RParen) {
        return Ok(args);
    }
    loop {
        args.push(parse_expr(c)?);
        if c.eat(&Tok::RParen) {
            return Ok(args);
        }
        c.expect(&Tok::Comma)?;
    }
}

fn parse_stmt(c: &mut Cursor) -> Result<Stmt, SyntaxError> {
    if c.eat_kw("if") {
        c.expect(&Tok::LParen)?;
        let cond = parse_expr(c)?;
        c.expect(&Tok::RParen)?;
        let then = parse_stmts(c)?;
        let els = if c.eat_kw("else") {
            if c.is_kw("if") {
                vec![parse_stmt(c)?]
            } else {
                parse_stmts(c)?
            }
        } else {
            Vec::new()
        };
        return Ok(Stmt::If { cond, then, els });
    }
    let s = if c.eat_kw("probe") {
        Stmt::Probe
    } else if c.eat_kw("send") {
        let port = c.ident()?;
        c.expect(&Tok::Dot)?;
        let message = c.ident()?;
        let args = call_args(c)?;
        Stmt::Send { port, message, args }
    } else if c.eat_kw("reply") {
        let message = c.ident()?;
        let args = call_args(c)?;
        Stmt::Reply { message, args }
    } else if c.is_kw("log") && matches!(c.peek_at(1), Tok::LParen) {
        c.bump();
        c.expect(&Tok::LParen)?;
        let e = parse_expr(c)?;
        c.expect(&Tok::RParen)?;
        Stmt::Log(e)
    } else {
        let v = c.ident()?;
        if is_reserved(&v) {
            return Err(c.error(format!("`{v}` cannot be assigned")));
        }
        c.expect(&Tok::Assign)?;
        Stmt::Assign(v, parse_expr(c)?)
    };
    if !c.eat(&Tok::Semi) && !matches!(c.peek(), Tok::RBrace) {
        return Err(c.unexpected("`;`"));
    }
    Ok(s)
}

fn is_reserved(s: &str) -> bool {
    matches!(s, "true" | "false" | "msg" | "random" | "receipt")
}

fn binop(t: &Tok) -> Option<BinOp> {
    Some(match t {
        Tok::OrOr => BinOp::Or,
        Tok::AndAnd => BinOp::And,
        Tok::Eq => BinOp::Eq,
        Tok::Ne => BinOp::Ne,
        Tok::Lt => BinOp::Lt,
        Tok::Le => BinOp::Le,
        Tok::Gt => BinOp::Gt,
        Tok::Ge => BinOp::Ge,
        Tok::Plus => BinOp::Add,
        Tok::Minus => BinOp::Sub,
        Tok::Star => BinOp::Mul,
        Tok::Slash => BinOp::Div,
        Tok::Percent => BinOp::Rem,
        _ => return None,
    })
}

/// Parses an expression with the usual precedences; binary operators are
/// left-associative.
pub fn parse_expr(c: &mut Cursor) -> Result<Expr, SyntaxError> {
    parse_binary(c, 1, 0)
}

const MAX_NESTING: usize = 256;

fn parse_binary(c: &mut Cursor, min: u8, depth: usize) -> Result<Expr, SyntaxError> {
    if depth > MAX_NESTING {
        return Err(c.error("expression nested too deeply"));
    }
    let mut lhs = parse_unary(c, depth + 1)?;
    while let Some(op) = binop(c.peek()) {
        let p = op.precedence();
        if p < min {
            break;
        }
        c.bump();
        let rhs = parse_binary(c, p + 1, depth + 1)?;
        lhs = Expr::bin(op, lhs, rhs);
    }
    Ok(lhs)
}

fn parse_unary(c: &mut Cursor, depth: usize) -> Result<Expr, SyntaxError> {
    if depth > MAX_NESTING {
        return Err(c.error("expression nested too deeply"));
    }
    if c.eat(&Tok::Bang) {
        return Ok(Expr::Unary(UnOp::Not, Box::new(parse_unary(c, depth + 1)?)));
    }
    if c.eat(&Tok::Minus) {
        return Ok(match c.peek() {
            Tok::Int(i) => {
                let v = -*i;
                c.bump();
                Expr::Int(v)
            }
            Tok::IntMin => {
                c.bump();
                Expr::Int(i64::MIN)
            }
            _ => Expr::Unary(UnOp::Neg, Box::new(parse_unary(c, depth + 1)?)),
        });
    }
    parse_primary(c, depth)
}

fn parse_primary(c: &mut Cursor, depth: usize) -> Result<Expr, SyntaxError> {
    match c.bump() {
        Tok::Int(i) => Ok(Expr::Int(i)),
        Tok::IntMin => Err(c.error("integer literal out of range")),
        Tok::Str(s) => Ok(Expr::Str(s)),
        Tok::LParen => {
            let e = parse_binary(c, 1, depth + 1)?;
            c.expect(&Tok::RParen)?;
            Ok(e)
        }
        Tok::Ident(s) => match s.as_str() {
            "true" => Ok(Expr::Bool(true)),
            "false" => Ok(Expr::Bool(false)),
            "msg" => {
                c.expect(&Tok::Dot)?;
                Ok(Expr::Payload(c.ident()?))
            }
            "random" => {
                c.expect(&Tok::LParen)?;
                if c.eat(&Tok::RParen) {
                    return Ok(Expr::Random(None));
                }
                let b = parse_binary(c, 1, depth + 1)?;
                c.expect(&Tok::RParen)?;
                Ok(Expr::Random(Some(Box::new(b))))
            }
            "receipt" => {
                c.expect(&Tok::LParen)?;
                let mut m = c.ident()?;
                if c.eat(&Tok::Dot) {
                    m = c.ident()?;
                }
                c.expect(&Tok::RParen)?;
                Ok(Expr::Receipt(m))
            }
            _ => Ok(Expr::Var(s)),
        },
        t => Err(c.error(format!("expected expression, found {t}"))),
    }
}

/// Parses a standalone expression string.
pub fn parse_expr_str(src: &str) -> Result<Expr, SyntaxError> {
    let mut c = Cursor::new(src)?;
    let e = parse_expr(&mut c)?;
    if !c.at_eof() {
        return Err(c.unexpected("end of expression"));
    }
    Ok(e)
}

/// Parses a standalone action block string such as `{ x = 1; }`.
pub fn parse_block_str(src: &str) -> Result<ActionBlock, SyntaxError> {
    let mut c = Cursor::new(src)?;
    let b = parse_block(&mut c)?;
    if !c.at_eof() {
        return Err(c.unexpected("end of block"));
    }
    Ok(b)
}
