//! Parser for rule scripts and interactive commands.

use super::{Alternative, Command, Rule, RuleSet, Selection, Where};
use crate::text::lexer::{Cursor, Tok};
use crate::text::{parse_expr, Expr, SyntaxError};

/// Words that start a command and therefore never name an injected message.
const COMMAND_WORDS: &[&str] = &[
    "select", "send", "reply", "inject", "log", "view", "visited", "continue", "quit", "save", "rule",
];

/// Parses a rule script.
pub fn parse_rules(src: &str) -> Result<RuleSet, SyntaxError> {
    parse_rules_named("", src)
}

/// Parses a rule script, recording `source` as its origin.
pub fn parse_rules_named(source: &str, src: &str) -> Result<RuleSet, SyntaxError> {
    let mut c = Cursor::new(src)?;
    let mut set = RuleSet {
        source: source.to_string(),
        ..Default::default()
    };
    while !c.at_eof() {
        set.push(rule(&mut c)?);
    }
    Ok(set)
}

/// Parses exactly one command.
pub fn parse_command(src: &str) -> Result<Command, SyntaxError> {
    let mut c = Cursor::new(src)?;
    let cmd = command(&mut c)?;
    if !c.at_eof() {
        return Err(c.unexpected("end of command"));
    }
    Ok(cmd)
}

/// Parses a sequence of commands separated by optional `;`.
pub fn parse_commands(src: &str) -> Result<Vec<Command>, SyntaxError> {
    let mut c = Cursor::new(src)?;
    let mut out = Vec::new();
    while !c.at_eof() {
        out.push(command(&mut c)?);
    }
    Ok(out)
}

fn rule(c: &mut Cursor) -> Result<Rule, SyntaxError> {
    c.expect_kw("rule")?;
    let name = c.ident()?;
    c.expect_kw("where")?;
    let at = where_clause(c)?;
    // `when` may be left out before a receipt test
    let when = if c.eat_kw("when") || c.is_kw("receipt") {
        Some(parse_expr(c)?)
    } else {
        None
    };
    c.expect(&Tok::LBrace)?;
    let mut body = Vec::new();
    while !c.eat(&Tok::RBrace) {
        if c.at_eof() {
            return Err(c.unexpected("`}`"));
        }
        let line = c.here().line;
        let col = c.here().col;
        let cmd = command(c)?;
        if !cmd.is_script() {
            return Err(SyntaxError {
                line,
                col,
                message: format!("`{cmd}` is not allowed in a rule body"),
            });
        }
        body.push(cmd);
    }
    Ok(Rule { name, at, when, body })
}

fn name_or_star(c: &mut Cursor) -> Result<Option<String>, SyntaxError> {
    if c.eat(&Tok::Star) {
        Ok(None)
    } else {
        Ok(Some(c.ident()?))
    }
}

fn path(c: &mut Cursor) -> Result<Where, SyntaxError> {
    let first = name_or_star(c)?;
    if c.eat(&Tok::Dot) {
        let second = name_or_star(c)?;
        return Ok(match (first, second) {
            (Some(comp), Some(s)) => Where::Qualified(comp, s),
            (None, Some(s)) => Where::State(s),
            (Some(comp), None) => Where::Component(comp),
            (None, None) => Where::Any,
        });
    }
    Ok(match first {
        Some(n) => Where::Component(n),
        None => Where::Any,
    })
}

fn where_clause(c: &mut Cursor) -> Result<Where, SyntaxError> {
    if c.eat(&Tok::LParen) {
        let w = path(c)?;
        c.expect(&Tok::RParen)?;
        return Ok(w);
    }
    if c.eat_kw("state") {
        return Ok(match path(c)? {
            Where::Component(s) => Where::State(s),
            w => w,
        });
    }
    if c.eat_kw("component") {
        if c.eat(&Tok::Star) {
            return Ok(Where::Any);
        }
        return Ok(Where::Component(c.ident()?));
    }
    path(c)
}

fn args(c: &mut Cursor) -> Result<Vec<Expr>, SyntaxError> {
    let mut out = Vec::new();
    if !c.eat(&Tok::LParen) {
        return Ok(out);
    }
    if c.eat(&Tok::RParen) {
        return Ok(out);
    }
    loop {
        out.push(parse_expr(c)?);
        if c.eat(&Tok::RParen) {
            return Ok(out);
        }
        c.expect(&Tok::Comma)?;
    }
}

fn alternative(c: &mut Cursor) -> Result<Alternative, SyntaxError> {
    let state = c.ident()?;
    let using = if c.eat_kw("using") { Some(c.ident()?) } else { None };
    Ok(Alternative { state, using })
}

fn int(c: &mut Cursor) -> Result<usize, SyntaxError> {
    match c.peek().clone() {
        Tok::Int(i) if i >= 0 => {
            c.bump();
            Ok(i as usize)
        }
        _ => Err(c.unexpected("a number")),
    }
}

fn word_is(t: &Tok, words: &[&str]) -> bool {
    matches!(t, Tok::Ident(s) if words.contains(&s.as_str()))
}

fn command(c: &mut Cursor) -> Result<Command, SyntaxError> {
    let cmd = command_inner(c)?;
    c.eat(&Tok::Semi);
    Ok(cmd)
}

fn command_inner(c: &mut Cursor) -> Result<Command, SyntaxError> {
    let kw = match c.peek() {
        Tok::Ident(s) => s.clone(),
        _ => return Ok(Command::Eval(parse_expr(c)?)),
    };
    let next = c.peek_at(1).clone();
    if next == Tok::Assign {
        let v = c.ident()?;
        c.bump();
        return Ok(Command::Assign(v, parse_expr(c)?));
    }
    match kw.as_str() {
        "select" => {
            c.bump();
            c.eat_kw("state");
            if c.eat_kw("random") {
                return Ok(Command::Select(Selection::Random));
            }
            if c.eat_kw("option") {
                return Ok(Command::Select(Selection::Index(int(c)?)));
            }
            let mut alts = vec![alternative(c)?];
            while c.eat(&Tok::Pipe) {
                alts.push(alternative(c)?);
            }
            Ok(Command::Select(Selection::States(alts)))
        }
        "send" => {
            c.bump();
            let port = if c.eat_kw("message") {
                None
            } else {
                let p = c.ident()?;
                if c.eat(&Tok::Dot) {
                    let message = c.ident()?;
                    return Ok(Command::Send {
                        port: Some(p),
                        message,
                        args: args(c)?,
                    });
                }
                c.expect_kw("message")?;
                Some(p)
            };
            let message = c.ident()?;
            Ok(Command::Send {
                port,
                message,
                args: args(c)?,
            })
        }
        "reply" => {
            c.bump();
            if c.eat_kw("random") {
                return Ok(Command::Reply {
                    message: None,
                    args: vec![],
                });
            }
            c.eat_kw("message");
            let message = c.ident()?;
            Ok(Command::Reply {
                message: Some(message),
                args: args(c)?,
            })
        }
        "inject" => {
            c.bump();
            let component = c.ident()?;
            let message = match c.peek() {
                Tok::Ident(_) if !word_is(c.peek(), COMMAND_WORDS) && c.peek_at(1) != &Tok::Assign => {
                    Some(c.ident()?)
                }
                _ => None,
            };
            Ok(Command::Inject { component, message })
        }
        "log" if next == Tok::LParen => {
            c.bump();
            c.expect(&Tok::LParen)?;
            let e = parse_expr(c)?;
            c.expect(&Tok::RParen)?;
            Ok(Command::Log(e))
        }
        "view" if word_is(&next, &["options", "exec", "vars"]) => {
            c.bump();
            let what = c.ident()?;
            Ok(match what.as_str() {
                "options" => Command::ViewOptions,
                "exec" => Command::ViewExec,
                _ => Command::ViewVars,
            })
        }
        "visited" => {
            c.bump();
            Ok(Command::Visited)
        }
        "continue" => {
            c.bump();
            Ok(Command::Continue)
        }
        "quit" => {
            c.bump();
            Ok(Command::Quit)
        }
        "save" if word_is(&next, &["input", "rule"]) => {
            c.bump();
            let what = c.ident()?;
            let mut ids = vec![int(c)?];
            while let Tok::Int(_) = c.peek() {
                ids.push(int(c)?);
            }
            Ok(if what == "input" {
                Command::SaveInput(ids)
            } else {
                Command::SaveRule(ids)
            })
        }
        _ => Ok(Command::Eval(parse_expr(c)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_forms_parse() {
        let set = parse_rules(
            "rule r1 where state yellow when  receipt(timeout) {\n select state  red}\n\
             rule r2 where component * {\n reply  random\n select state random }",
        )
        .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.rules[0].at, Where::State("yellow".into()));
        assert_eq!(set.rules[0].when, Some(Expr::Receipt("timeout".into())));
        assert_eq!(set.rules[1].at, Where::Any);
        assert_eq!(set.rules[1].selection(), Some(&Selection::Random));
    }

    #[test]
    fn when_keyword_is_optional_before_receipt() {
        let set = parse_rules("rule r3 where state yellow receipt(timeout) { select state red|green|yellow|off }").unwrap();
        match set.rules[0].selection() {
            Some(Selection::States(a)) => assert_eq!(a.len(), 4),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn commands_parse() {
        assert_eq!(
            parse_command("x=5+1").unwrap(),
            Command::Assign("x".into(), crate::text::parse_expr_str("5+1").unwrap())
        );
        assert_eq!(
            parse_command("inject UC").unwrap(),
            Command::Inject {
                component: "UC".into(),
                message: None
            }
        );
        assert!(matches!(parse_command("send message on").unwrap(), Command::Send { port: None, .. }));
        assert_eq!(parse_command("save input 1 2").unwrap(), Command::SaveInput(vec![1, 2]));
        assert!(parse_rules("rule r where (*) { view options }").is_err());
    }

    #[test]
    fn lexical_errors_win_over_a_complete_prefix() {
        let e = parse_rules("rule r where state a { select state b }\n$").unwrap_err();
        assert_eq!((e.line, e.col), (2, 1));
        assert!(parse_command("x = 1 $").is_err());
    }
}
