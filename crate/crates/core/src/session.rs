//! Steering of a run at decision points: rule-driven answers, an
//! interactive command processor, a record of every decision and the
//! commands that turn records into rules or model changes.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::model::{SystemModel, Value};
use crate::rules::{
    alternative_for, apply_rule_to_model, parse_command, resolve_alternative, resolve_selection,
    save_decisions_as_rules, select_rule, Alternative, Command, ExecutionRecord, Resolution, RuleSet,
    Selection,
};
use crate::runtime::{Decision, DecisionContext, HaltReason, InputProvider, RunError, SystemRun, TraceRecord};
use crate::text::{eval, Env, EvalCtx, Expr};

/// How decisions are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Mode {
    /// Every decision is asked for.
    #[default]
    Interactive,
    /// Rules answer; the user is asked only when no rule settles a decision.
    Batch,
    /// As batch, but a rule with several alternatives narrows the offered
    /// options instead of offering all of them.
    Hybrid,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "interactive" => Ok(Mode::Interactive),
            "batch" => Ok(Mode::Batch),
            "hybrid" => Ok(Mode::Hybrid),
            _ => Err(format!("unknown mode `{s}` (interactive, batch, hybrid)")),
        }
    }
}

/// Why the session asks for input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PromptReason {
    Interactive,
    NoRule,
    MultipleOptions(String),
    RuleFailed(String),
    /// Nothing can run; messages may be injected or sent before continuing.
    Quiescent,
}

/// What the session is waiting on.
#[derive(Debug, Clone, Serialize)]
pub struct Prompt<'a> {
    pub context: Option<&'a DecisionContext>,
    /// Option indices offered for selection.
    pub offered: Vec<usize>,
    pub reason: PromptReason,
}

/// Result of one command, as text lines and a structured mirror.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Response {
    pub ok: bool,
    pub lines: Vec<String>,
    pub data: Json,
}

impl Response {
    fn ok(lines: Vec<String>, data: Json) -> Self {
        Response { ok: true, lines, data }
    }

    fn line(s: impl Into<String>) -> Self {
        let s = s.into();
        Response::ok(vec![s.clone()], json!(s))
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Response {
            ok: false,
            lines: vec![format!("error: {e}")],
            data: json!({ "error": e.to_string() }),
        }
    }
}

/// Where commands come from and responses go.
pub trait CommandSource {
    /// Next command line; `None` closes the session.
    fn next_line(&mut self, prompt: &Prompt) -> Option<String>;
    fn respond(&mut self, _response: &Response) {}
    /// Notes about decisions taken without asking.
    fn note(&mut self, _line: &str) {}
    /// The run's trace so far, shown before every prompt.
    fn observe(&mut self, _trace: &[TraceRecord]) {}
}

/// A fixed list of command lines; responses are kept as a transcript.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSource {
    lines: std::collections::VecDeque<String>,
    pub transcript: Vec<String>,
    pub prompts: usize,
}

impl ScriptedSource {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(lines: I) -> Self {
        ScriptedSource {
            lines: lines.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }
}

impl CommandSource for ScriptedSource {
    fn next_line(&mut self, _prompt: &Prompt) -> Option<String> {
        self.prompts += 1;
        let l = self.lines.pop_front()?;
        self.transcript.push(format!("> {l}"));
        Some(l)
    }
    fn respond(&mut self, r: &Response) {
        self.transcript.extend(r.lines.iter().cloned());
    }
    fn note(&mut self, line: &str) {
        self.transcript.push(line.to_string());
    }
}

/// Errors that end a session.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("session closed while a decision was pending")]
    Closed,
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Errors of single commands; reported, never fatal.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CommandError {
    #[error("no decision is pending")]
    NoContext,
    #[error("no component in focus; use `inject <component>` first")]
    NoFocus,
    #[error("select exactly one state")]
    SeveralStates,
    #[error("no execution record {0}")]
    UnknownRecord(usize),
    #[error("no design model available for `save rule`")]
    NoDesignModel,
    #[error("`{0}` is a variable of the component; assign it with a value of type {1}")]
    TypeMismatch(String, String),
    #[error("`{0}` is only available inside the command prompt")]
    NotHere(String),
    #[error("nothing to reply with on the port of the last message")]
    NoReplyCandidate,
    #[error("{0}")]
    Eval(String),
    #[error("{0}")]
    Run(#[from] RunError),
    #[error("{0}")]
    Other(String),
}

enum Outcome {
    Respond(Response),
    Decided(Decision),
    /// End of a quiescent prompt.
    Resume,
}

struct CmdCtx<'a> {
    run: &'a mut SystemRun,
    focus: Option<&'a str>,
    scratch: &'a Env,
    last: Option<String>,
}

impl EvalCtx for CmdCtx<'_> {
    fn var(&self, name: &str) -> Option<Value> {
        if let Some(v) = self.scratch.get(name) {
            return Some(v.clone());
        }
        self.focus
            .and_then(|c| self.run.env(c).ok())
            .and_then(|e| e.get(name).cloned())
    }
    fn receipt(&self, message: &str) -> Option<bool> {
        Some(self.last.as_deref() == Some(message))
    }
    fn random(&mut self, bound: i64) -> i64 {
        self.run.random(bound)
    }
}

/// A steering session over one run.
pub struct Session<S: CommandSource> {
    pub mode: Mode,
    pub rules: RuleSet,
    pub source: S,
    records: Vec<ExecutionRecord>,
    scratch: Env,
    /// Component to a state its next decision should head for.
    steer: BTreeMap<String, String>,
    focus: Option<String>,
    /// Commands issued while the current decision is pending.
    issued: Vec<Command>,
    /// Model that `save rule` changes.
    design: Option<SystemModel>,
    /// Rules collected with `save input`.
    saved: RuleSet,
    /// Rule applications collected with `save rule`.
    applied: Vec<String>,
}

impl<S: CommandSource> Session<S> {
    pub fn new(mode: Mode, rules: RuleSet, source: S) -> Self {
        Session {
            mode,
            rules,
            source,
            records: Vec::new(),
            scratch: Env::new(),
            steer: BTreeMap::new(),
            focus: None,
            issued: Vec::new(),
            design: None,
            saved: RuleSet::new("saved", vec![]),
            applied: Vec::new(),
        }
    }

    /// Sets the design model that `save rule` updates.
    pub fn with_design_model(mut self, model: SystemModel) -> Self {
        self.design = Some(model);
        self
    }

    pub fn records(&self) -> &[ExecutionRecord] {
        &self.records
    }

    pub fn scratch(&self) -> &Env {
        &self.scratch
    }

    /// Rules collected by `save input`.
    pub fn saved_rules(&self) -> &RuleSet {
        &self.saved
    }

    /// The design model after every `save rule`.
    pub fn design_model(&self) -> Option<&SystemModel> {
        self.design.as_ref()
    }

    /// Names of rules applied by `save rule`.
    pub fn applied_rules(&self) -> &[String] {
        &self.applied
    }

    /// Drives the run to its end. Outside batch mode the user is asked at
    /// quiescence and may inject or send messages before continuing.
    pub fn run(&mut self, run: &mut SystemRun) -> Result<HaltReason, SessionError> {
        loop {
            let h = crate::runtime::run_with(run, self)?;
            if h != HaltReason::Quiescent || self.mode == Mode::Batch {
                return Ok(h);
            }
            self.focus = None;
            self.issued.clear();
            let mut progressed = false;
            loop {
                let prompt = Prompt {
                    context: None,
                    offered: vec![],
                    reason: PromptReason::Quiescent,
                };
                self.source.observe(run.trace());
                let Some(line) = self.source.next_line(&prompt) else {
                    return Ok(h);
                };
                let before = self.issued.len();
                match self.command_line(run, None, &line) {
                    Outcome::Respond(r) => {
                        if self.issued.len() > before && self.issued[before].modifies_state() {
                            progressed = true;
                        }
                        self.source.respond(&r);
                    }
                    Outcome::Decided(Decision::Quit) => {
                        run.quit();
                        return Ok(HaltReason::Quit);
                    }
                    Outcome::Decided(_) | Outcome::Resume => break,
                }
            }
            if !progressed {
                return Ok(h);
            }
        }
    }

    /// Handles one command line in the context of the pending decision, if
    /// any. Selections, `continue` and `quit` are acknowledged but only take
    /// effect through the input provider.
    pub fn handle_command(&mut self, run: &mut SystemRun, line: &str) -> Response {
        let ctx = run.pending().cloned();
        match self.command_line(run, ctx.as_ref(), line) {
            Outcome::Respond(r) => r,
            Outcome::Decided(d) => Response::line(format!("{d:?}")),
            Outcome::Resume => Response::line("continue"),
        }
    }

    fn command_line(&mut self, run: &mut SystemRun, ctx: Option<&DecisionContext>, line: &str) -> Outcome {
        let line = line.trim();
        if line.is_empty() {
            return Outcome::Respond(Response::ok(vec![], Json::Null));
        }
        let cmd = match parse_command(line) {
            Ok(c) => c,
            Err(e) => return Outcome::Respond(Response::error(format!("syntax error at {e}"))),
        };
        match self.command(run, ctx, &cmd) {
            Ok(o) => {
                if !matches!(o, Outcome::Decided(_)) {
                    self.issued.push(cmd);
                }
                o
            }
            Err(e) => Outcome::Respond(Response::error(e)),
        }
    }

    fn eval(&mut self, run: &mut SystemRun, ctx: Option<&DecisionContext>, e: &Expr) -> Result<Value, CommandError> {
        let mut c = CmdCtx {
            run,
            focus: self.focus.as_deref(),
            scratch: &self.scratch,
            last: ctx.and_then(|c| c.last_message.as_ref()).map(|m| m.message.clone()),
        };
        eval(e, &mut c).map_err(|e| CommandError::Eval(e.to_string()))
    }

    fn eval_args(
        &mut self,
        run: &mut SystemRun,
        ctx: Option<&DecisionContext>,
        args: &[Expr],
    ) -> Result<Vec<Value>, CommandError> {
        args.iter().map(|a| self.eval(run, ctx, a)).collect()
    }

    fn focus(&self) -> Result<String, CommandError> {
        self.focus.clone().ok_or(CommandError::NoFocus)
    }

    /// Executes a script statement; shared by rule bodies and the prompt.
    fn script(&mut self, run: &mut SystemRun, ctx: Option<&DecisionContext>, cmd: &Command) -> Result<Response, CommandError> {
        match cmd {
            Command::Assign(v, e) => {
                let val = self.eval(run, ctx, e)?;
                if let Some(f) = self.focus.clone() {
                    let env = run.env_mut(&f)?;
                    if let Some(old) = env.get(v) {
                        if old.ty() != val.ty() {
                            return Err(CommandError::TypeMismatch(v.clone(), old.ty().to_string()));
                        }
                        env.insert(v.clone(), val.clone());
                        return Ok(Response::ok(vec![format!("{f}.{v} = {val}")], json!({ v: val })));
                    }
                }
                self.scratch.insert(v.clone(), val.clone());
                Ok(Response::ok(vec![format!("{v} = {val}")], json!({ v: val })))
            }
            Command::Eval(e) => {
                let val = self.eval(run, ctx, e)?;
                Ok(Response::ok(vec![val.to_string()], json!(val)))
            }
            Command::Log(e) => {
                let val = self.eval(run, ctx, e)?;
                Ok(Response::ok(vec![format!("log: {val}")], json!(val)))
            }
            Command::Send { port, message, args } => {
                let focus = self.focus()?;
                let args = self.eval_args(run, ctx, args)?;
                let to = run.send_from(&focus, port.as_deref(), message, args)?;
                Ok(Response::line(format!("sent {message} to {to}")))
            }
            Command::Reply { message, args } => {
                let focus = self.focus()?;
                let message = match message {
                    Some(m) => m.clone(),
                    None => {
                        let cands = run.reply_candidates(&focus)?;
                        if cands.is_empty() {
                            return Err(CommandError::NoReplyCandidate);
                        }
                        let k = run.random(cands.len() as i64) as usize;
                        cands[k].clone()
                    }
                };
                let args = self.eval_args(run, ctx, args)?;
                let to = run.reply_from(&focus, &message, args)?;
                Ok(Response::line(format!("replied {message} to {to}")))
            }
            Command::Inject { component, message } => {
                let m = run.inject(component, message.as_deref(), vec![])?;
                self.focus = Some(component.clone());
                Ok(Response::line(format!("injected {m} into {component}")))
            }
            other => Err(CommandError::NotHere(other.to_string())),
        }
    }

    fn command(&mut self, run: &mut SystemRun, ctx: Option<&DecisionContext>, cmd: &Command) -> Result<Outcome, CommandError> {
        match cmd {
            Command::Select(sel) => {
                let ctx = ctx.ok_or(CommandError::NoContext)?;
                let mut draw = |n: usize| run.random(n as i64) as usize;
                let res = resolve_selection(ctx, sel, &mut draw).map_err(|e| CommandError::Other(e.to_string()))?;
                let [r] = res.as_slice() else {
                    return Err(CommandError::SeveralStates);
                };
                let alt = match sel {
                    Selection::States(a) => a[0].clone(),
                    _ => alternative_for(ctx, r.index).expect("resolved option exists"),
                };
                let commands = std::mem::take(&mut self.issued);
                Ok(Outcome::Decided(self.decide_with(ctx, r, alt, commands)))
            }
            Command::ViewOptions => {
                let ctx = ctx.ok_or(CommandError::NoContext)?;
                Ok(Outcome::Respond(view_options(ctx)))
            }
            Command::ViewExec => Ok(Outcome::Respond(self.view_exec())),
            Command::ViewVars => {
                let mut lines = Vec::new();
                let mut comp = Env::new();
                if let Some(f) = &self.focus {
                    comp = run.env(f)?.clone();
                    lines.extend(comp.iter().map(|(k, v)| format!("{f}.{k} = {v}")));
                }
                lines.extend(self.scratch.iter().map(|(k, v)| format!("{k} = {v}")));
                Ok(Outcome::Respond(Response::ok(
                    lines,
                    json!({ "component": comp, "scratch": self.scratch }),
                )))
            }
            Command::Visited => {
                let f = self.focus()?;
                let v: Vec<String> = run.visited(&f)?.iter().map(|s| s.to_string()).collect();
                Ok(Outcome::Respond(Response::ok(vec![v.join(" ")], json!(v))))
            }
            Command::Continue => Ok(match ctx {
                Some(_) => Outcome::Decided(Decision::Defer),
                None => Outcome::Resume,
            }),
            Command::Quit => Ok(Outcome::Decided(Decision::Quit)),
            Command::SaveInput(ids) => {
                let recs = self.pick_records(ids)?;
                let out = save_decisions_as_rules(&recs);
                let mut lines: Vec<String> = out.conflicts.iter().map(|c| format!("conflict: {c}")).collect();
                for mut r in out.rules.rules {
                    r.name = self.saved.fresh_name();
                    lines.push(r.to_string());
                    self.saved.push(r);
                }
                Ok(Outcome::Respond(Response::ok(
                    lines,
                    json!({ "rules": self.saved.to_string(), "conflicts": out.conflicts }),
                )))
            }
            Command::SaveRule(ids) => {
                let recs = self.pick_records(ids)?;
                let mut design = self.design.clone().ok_or(CommandError::NoDesignModel)?;
                let mut lines = Vec::new();
                let mut applied = Vec::new();
                for rec in recs {
                    let out = save_decisions_as_rules(&[rec]);
                    let rule = &out.rules.rules[0];
                    design = apply_rule_to_model(&design, rule, None).map_err(|e| CommandError::Other(e.to_string()))?;
                    lines.push(format!("applied record {} as `{}`", rec.id, rule.to_string().replace('\n', " ")));
                    applied.push(format!("record {}", rec.id));
                }
                self.applied.extend(applied);
                self.design = Some(design);
                Ok(Outcome::Respond(Response::ok(lines.clone(), json!(lines))))
            }
            other => Ok(Outcome::Respond(self.script(run, ctx, other)?)),
        }
    }

    fn pick_records(&self, ids: &[usize]) -> Result<Vec<&ExecutionRecord>, CommandError> {
        ids.iter()
            .map(|i| self.records.iter().find(|r| r.id == *i).ok_or(CommandError::UnknownRecord(*i)))
            .collect()
    }

    fn view_exec(&self) -> Response {
        let lines = self
            .records
            .iter()
            .map(|r| {
                let last = r.context.last_message.as_ref().map(|m| m.to_string()).unwrap_or("-".into());
                format!(
                    "{}: {}.{} on {} -> {} (option {})",
                    r.id, r.context.component, r.context.state_label, last, r.alternative, r.decision
                )
            })
            .collect();
        Response::ok(lines, json!(self.records))
    }

    fn decide_with(&mut self, ctx: &DecisionContext, r: &Resolution, alternative: Alternative, commands: Vec<Command>) -> Decision {
        match &r.steer {
            Some(s) => {
                self.steer.insert(ctx.component.clone(), s.clone());
            }
            None => {
                self.steer.remove(&ctx.component);
            }
        }
        let id = self.records.len() + 1;
        self.records.push(ExecutionRecord {
            id,
            context: ctx.clone(),
            commands,
            decision: r.index,
            alternative,
        });
        Decision::Select(r.index)
    }

    /// Follows a pending steering target of the component.
    fn steered(&mut self, ctx: &DecisionContext) -> Option<Decision> {
        let target = self.steer.remove(&ctx.component)?;
        let r = resolve_alternative(ctx, &Alternative::new(target.clone())).ok()?;
        if r.steer.is_some() {
            self.steer.insert(ctx.component.clone(), target.clone());
        }
        self.source
            .note(&format!("{}: heading for {target}, option {}", ctx.component, r.index));
        Some(Decision::Select(r.index))
    }

    fn prompt(&mut self, run: &mut SystemRun, ctx: &DecisionContext, offered: Vec<usize>, reason: PromptReason) -> Result<Decision, SessionError> {
        loop {
            let prompt = Prompt {
                context: Some(ctx),
                offered: offered.clone(),
                reason: reason.clone(),
            };
            self.source.observe(run.trace());
            let Some(line) = self.source.next_line(&prompt) else {
                return Err(SessionError::Closed);
            };
            match self.command_line(run, Some(ctx), &line) {
                Outcome::Respond(r) => self.source.respond(&r),
                Outcome::Decided(d) => return Ok(d),
                Outcome::Resume => return Ok(Decision::Defer),
            }
        }
    }

    fn by_rule(&mut self, run: &mut SystemRun, ctx: &DecisionContext) -> Result<Decision, SessionError> {
        let env = run.env(&ctx.component)?.clone();
        let Some(rule) = select_rule(&self.rules, ctx, &env).cloned() else {
            self.source.note(&format!("{}: no rule for {}", ctx.component, ctx.state_label));
            return self.prompt(run, ctx, all_options(ctx), PromptReason::NoRule);
        };
        let mut done = Vec::new();
        for c in rule.prelude() {
            match self.script(run, Some(ctx), c) {
                Ok(r) => {
                    self.source.respond(&r);
                    done.push(c.clone());
                }
                Err(e) => {
                    let why = format!("rule {}: `{c}`: {e}", rule.name);
                    self.source.note(&why);
                    return self.prompt(run, ctx, all_options(ctx), PromptReason::RuleFailed(why));
                }
            }
        }
        let Some(sel) = rule.selection() else {
            let why = format!("rule {} selects nothing", rule.name);
            return self.prompt(run, ctx, all_options(ctx), PromptReason::RuleFailed(why));
        };
        let mut draw = |n: usize| run.random(n as i64) as usize;
        match resolve_selection(ctx, sel, &mut draw) {
            Ok(res) if res.len() == 1 => {
                let r = &res[0];
                let alt = match sel {
                    Selection::States(a) => a
                        .iter()
                        .find(|a| resolve_alternative(ctx, a).is_ok_and(|x| x == *r))
                        .cloned()
                        .expect("alternative resolved"),
                    _ => alternative_for(ctx, r.index).expect("resolved option exists"),
                };
                self.source.note(&format!("{}: rule {} selects option {}", ctx.component, rule.name, r.index));
                Ok(self.decide_with(ctx, r, alt, done))
            }
            Ok(res) => {
                self.issued = done;
                let offered = if self.mode == Mode::Hybrid {
                    let mut v: Vec<usize> = res.iter().map(|r| r.index).collect();
                    v.dedup();
                    v
                } else {
                    all_options(ctx)
                };
                self.prompt(run, ctx, offered, PromptReason::MultipleOptions(rule.name.clone()))
            }
            Err(e) => {
                self.issued = done;
                let why = format!("rule {}: {e}", rule.name);
                self.source.note(&why);
                self.prompt(run, ctx, all_options(ctx), PromptReason::RuleFailed(why))
            }
        }
    }
}

fn all_options(ctx: &DecisionContext) -> Vec<usize> {
    ctx.options.iter().map(|o| o.index).collect()
}

/// Numbered options of a decision with the states each leads to.
pub fn view_options(ctx: &DecisionContext) -> Response {
    let lines = ctx
        .options
        .iter()
        .map(|o| {
            let mut s = format!("{}: {} -> {}", o.index, o.transition, o.target_label);
            if o.reach.len() != 1 || o.reach[0] != o.target {
                s.push_str(&format!(" (leads to {})", o.labels.join(", ")));
            }
            s
        })
        .collect();
    Response::ok(lines, json!(ctx.options))
}

/// Text shown when asking for input: where the run waits, why, and the
/// offered options.
pub fn prompt_lines(prompt: &Prompt) -> Vec<String> {
    let why = match &prompt.reason {
        PromptReason::Interactive => "decision".to_string(),
        PromptReason::NoRule => "no rule applies".to_string(),
        PromptReason::MultipleOptions(rule) => format!("rule {rule} allows several options"),
        PromptReason::RuleFailed(why) => why.clone(),
        PromptReason::Quiescent => "nothing left to run; inject or send messages, then continue".to_string(),
    };
    let Some(ctx) = prompt.context else {
        return vec![format!("[quiescent] {why}")];
    };
    let mut out = vec![format!("[{}] at {} ({why})", ctx.component, ctx.state_label)];
    let all = view_options(ctx);
    for (o, line) in ctx.options.iter().zip(all.lines) {
        if prompt.offered.contains(&o.index) {
            out.push(format!("  {line}"));
        }
    }
    out
}

impl<S: CommandSource> InputProvider for Session<S> {
    type Error = SessionError;

    fn decide(&mut self, run: &mut SystemRun, ctx: &DecisionContext) -> Result<Decision, SessionError> {
        self.focus = Some(ctx.component.clone());
        self.issued.clear();
        if let Some(d) = self.steered(ctx) {
            return Ok(d);
        }
        match self.mode {
            Mode::Interactive => self.prompt(run, ctx, all_options(ctx), PromptReason::Interactive),
            Mode::Batch | Mode::Hybrid => self.by_rule(run, ctx),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Setting;
    use crate::refine::refine_model;
    use crate::rules::parse_rules;
    use crate::runtime::RunOptions;
    use crate::text::parse_model;

    fn traffic_run() -> SystemRun {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        SystemRun::for_refined(
            &r,
            RunOptions {
                max_steps: Some(200),
                ..Default::default()
            },
        )
    }

    #[test]
    fn assignment_creates_a_scratch_variable() {
        let mut run = traffic_run();
        let mut s = Session::new(Mode::Interactive, RuleSet::default(), ScriptedSource::default());
        let r = s.handle_command(&mut run, "x=5+1");
        assert!(r.ok, "{r:?}");
        assert_eq!(s.scratch().get("x"), Some(&Value::Int(6)));
    }

    #[test]
    fn closed_source_ends_an_interactive_session() {
        let mut run = traffic_run();
        let mut s = Session::new(Mode::Interactive, RuleSet::default(), ScriptedSource::default());
        assert_eq!(s.run(&mut run), Err(SessionError::Closed));
    }

    #[test]
    fn batch_rule_answers_without_prompting() {
        let mut run = traffic_run();
        let rules = parse_rules("rule r where component * { select option 1 }").unwrap();
        let mut s = Session::new(Mode::Batch, rules, ScriptedSource::default());
        s.run(&mut run).unwrap();
        assert_eq!(s.source.prompts, 0);
        assert!(!s.records().is_empty());
    }
}
