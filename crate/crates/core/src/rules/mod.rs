//! Execution rules: scripted answers to decision points.
//!
//! A rule names where it applies (`C.s`, `*.s`, `C` or `*`), an optional
//! condition that may test `receipt(m)`, and a body of statements ending in
//! a `select`. The same statement syntax serves interactive commands.

mod apply;
mod generate;
mod parse;
mod select;

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::text::Expr;

pub use apply::{apply_rule_to_model, ApplyError};
pub use crate::refine::negated_disjunction_guard;
pub use generate::generate_default_rules;
pub use parse::{parse_command, parse_commands, parse_rules, parse_rules_named};
pub use select::{
    alternative_for, condition_holds, resolve_alternative, resolve_selection, rule_state_name,
    save_decisions_as_rules, select_rule, ExecutionRecord, Resolution, SaveOutcome, SelectError,
};

/// Where a rule applies.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Where {
    /// `C.s`
    Qualified(String, String),
    /// `*.s`
    State(String),
    /// `C`
    Component(String),
    /// `*`
    Any,
}

impl Where {
    /// Precedence tier: 1 is most specific.
    pub fn tier(&self) -> u8 {
        match self {
            Where::Qualified(..) => 1,
            Where::State(_) => 2,
            Where::Component(_) => 3,
            Where::Any => 4,
        }
    }
}

impl fmt::Display for Where {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Where::Qualified(c, s) => write!(f, "state {c}.{s}"),
            Where::State(s) => write!(f, "state {s}"),
            Where::Component(c) => write!(f, "component {c}"),
            Where::Any => write!(f, "component *"),
        }
    }
}

/// One alternative of a `select`: a state and optionally the transition
/// leading to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alternative {
    pub state: String,
    pub using: Option<String>,
}

impl Alternative {
    pub fn new(state: impl Into<String>) -> Self {
        Alternative {
            state: state.into(),
            using: None,
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.state)?;
        if let Some(t) = &self.using {
            write!(f, " using {t}")?;
        }
        Ok(())
    }
}

/// Argument of a `select`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    States(Vec<Alternative>),
    /// Any option, drawn from the run's generator.
    Random,
    /// An option by its number in `view options`.
    Index(usize),
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::States(alts) => {
                let parts: Vec<String> = alts.iter().map(|a| a.to_string()).collect();
                write!(f, "select state {}", parts.join("|"))
            }
            Selection::Random => write!(f, "select state random"),
            Selection::Index(k) => write!(f, "select option {k}"),
        }
    }
}

/// Statements of rule bodies and interactive commands.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Select(Selection),
    Assign(String, Expr),
    /// An expression whose value is printed.
    Eval(Expr),
    Send {
        port: Option<String>,
        message: String,
        args: Vec<Expr>,
    },
    /// `None` replies with a random message.
    Reply {
        message: Option<String>,
        args: Vec<Expr>,
    },
    Inject {
        component: String,
        message: Option<String>,
    },
    Log(Expr),
    ViewOptions,
    ViewExec,
    ViewVars,
    Visited,
    Continue,
    Quit,
    SaveInput(Vec<usize>),
    SaveRule(Vec<usize>),
}

impl Command {
    /// Statements allowed in rule bodies.
    pub fn is_script(&self) -> bool {
        matches!(
            self,
            Command::Select(_)
                | Command::Assign(..)
                | Command::Send { .. }
                | Command::Reply { .. }
                | Command::Inject { .. }
                | Command::Log(_)
        )
    }

    /// Statements that change the run: variables, messages.
    pub fn modifies_state(&self) -> bool {
        matches!(
            self,
            Command::Assign(..) | Command::Send { .. } | Command::Reply { .. } | Command::Inject { .. }
        )
    }
}

fn args_text(args: &[Expr]) -> String {
    let a: Vec<String> = args.iter().map(|e| e.to_string()).collect();
    format!("({})", a.join(", "))
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Select(s) => write!(f, "{s}"),
            Command::Assign(v, e) => write!(f, "{v} = {e}"),
            Command::Eval(e) => write!(f, "{e}"),
            Command::Send { port, message, args } => {
                write!(f, "send ")?;
                if let Some(p) = port {
                    write!(f, "{p} ")?;
                }
                write!(f, "message {message}")?;
                if !args.is_empty() {
                    write!(f, "{}", args_text(args))?;
                }
                Ok(())
            }
            Command::Reply { message: None, .. } => write!(f, "reply random"),
            Command::Reply {
                message: Some(m),
                args,
            } => {
                write!(f, "reply message {m}")?;
                if !args.is_empty() {
                    write!(f, "{}", args_text(args))?;
                }
                Ok(())
            }
            Command::Inject { component, message } => {
                write!(f, "inject {component}")?;
                if let Some(m) = message {
                    write!(f, " {m}")?;
                }
                Ok(())
            }
            Command::Log(e) => write!(f, "log({e})"),
            Command::ViewOptions => write!(f, "view options"),
            Command::ViewExec => write!(f, "view exec"),
            Command::ViewVars => write!(f, "view vars"),
            Command::Visited => write!(f, "visited"),
            Command::Continue => write!(f, "continue"),
            Command::Quit => write!(f, "quit"),
            Command::SaveInput(ids) | Command::SaveRule(ids) => {
                let kind = if matches!(self, Command::SaveInput(_)) { "input" } else { "rule" };
                let ids: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                write!(f, "save {kind} {}", ids.join(" "))
            }
        }
    }
}

/// An execution rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub at: Where,
    pub when: Option<Expr>,
    pub body: Vec<Command>,
}

impl Rule {
    /// The first `select` of the body; later statements never run.
    pub fn selection(&self) -> Option<&Selection> {
        self.body.iter().find_map(|c| match c {
            Command::Select(s) => Some(s),
            _ => None,
        })
    }

    /// Statements executed before the selection.
    pub fn prelude(&self) -> impl Iterator<Item = &Command> {
        self.body.iter().take_while(|c| !matches!(c, Command::Select(_)))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} where {}", self.name, self.at)?;
        if let Some(w) = &self.when {
            write!(f, " when ({w})")?;
        }
        writeln!(f, " {{")?;
        for c in &self.body {
            writeln!(f, "    {c}")?;
        }
        write!(f, "}}")
    }
}

/// Rules in file order with an index per precedence tier.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub source: String,
    /// Names defined more than once; the first definition wins.
    pub duplicates: Vec<String>,
    names: HashSet<String>,
    qualified: HashMap<(String, String), Vec<usize>>,
    by_state: HashMap<String, Vec<usize>>,
    by_component: HashMap<String, Vec<usize>>,
    any: Vec<usize>,
}

impl PartialEq for RuleSet {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl RuleSet {
    pub fn new(source: impl Into<String>, rules: Vec<Rule>) -> Self {
        let mut set = RuleSet {
            source: source.into(),
            ..Default::default()
        };
        for r in rules {
            set.push(r);
        }
        set
    }

    /// Appends a rule; a rule whose name is taken is recorded as a duplicate
    /// and not indexed.
    pub fn push(&mut self, rule: Rule) {
        if !self.names.insert(rule.name.clone()) {
            self.duplicates.push(rule.name.clone());
            self.rules.push(rule);
            return;
        }
        let i = self.rules.len();
        match &rule.at {
            Where::Qualified(c, s) => self.qualified.entry((c.clone(), s.clone())).or_default().push(i),
            Where::State(s) => self.by_state.entry(s.clone()).or_default().push(i),
            Where::Component(c) => self.by_component.entry(c.clone()).or_default().push(i),
            Where::Any => self.any.push(i),
        }
        self.rules.push(rule);
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Candidate rules for a component and the names of a state, tier by
    /// tier, file order within a tier.
    fn candidates(&self, component: &str, state_names: &[&str]) -> [Vec<usize>; 4] {
        let mut q = Vec::new();
        let mut s = Vec::new();
        for n in state_names {
            if let Some(v) = self.qualified.get(&(component.to_string(), n.to_string())) {
                q.extend(v);
            }
            if let Some(v) = self.by_state.get(*n) {
                s.extend(v);
            }
        }
        q.sort_unstable();
        q.dedup();
        s.sort_unstable();
        s.dedup();
        let c = self.by_component.get(component).cloned().unwrap_or_default();
        [q, s, c, self.any.clone()]
    }

    /// Fresh rule name `r<n>` not used in this set.
    pub fn fresh_name(&self) -> String {
        (self.rules.len() + 1..)
            .map(|n| format!("r{n}"))
            .find(|n| self.get(n).is_none())
            .expect("unbounded search")
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
