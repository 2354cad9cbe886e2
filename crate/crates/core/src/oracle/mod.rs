//! Bounded brute-force checks of refinement: trace enumeration, simulation
//! of the original by the refined machine, reachability of states and
//! transitions, and absence of stuck configurations.
//!
//! Exploration uses its own minimal stepper ([`NaiveStepper`]); the runtime
//! stepper is only consulted by [`cross_check`], which compares the two.

mod stepper;
mod suite;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::model::{Component, Hsm, MessageRef, StateKind, SystemModel, Value, DBG_MESSAGE};
use crate::par::{self, ExecMode};
use crate::refine::{ComponentRefinement, Refined, SEL_VAR};
use crate::runtime::{Configuration, Message, StepOutcome, Stepper, UnexpectedPolicy};
use crate::text::Payload;

pub use stepper::{Cfg, Move, NaiveStepper};
pub use suite::{run_checks, Check, ComponentChecks};

/// Exploration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    /// Largest state machine explored.
    pub max_states: usize,
    /// Longest input sequence.
    pub max_depth: usize,
    /// Configurations expanded per exploration.
    pub max_configs: usize,
    /// Steps without input before a branch is cut.
    pub max_internal: usize,
    pub mode: ExecMode,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_states: 12,
            max_depth: 6,
            max_configs: 100_000,
            max_internal: 64,
            mode: ExecMode::Auto,
        }
    }
}

/// Why a check could not run.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("component `{0}` does not exist")]
    UnknownComponent(String),
    #[error("component `{0}` has no state machine")]
    NoBehavior(String),
    #[error("state `{0}` does not exist")]
    UnknownState(String),
    #[error("`{component}` has {states} states, more than the bound of {bound}")]
    TooManyStates {
        component: String,
        states: usize,
        bound: usize,
    },
    #[error("depth {depth} exceeds the bound of {bound}")]
    TooDeep { depth: usize, bound: usize },
    #[error("more than {0} configurations explored")]
    TooManyConfigs(usize),
}

fn component<'m>(model: &'m SystemModel, name: &str) -> Result<&'m Component, OracleError> {
    model
        .component(name)
        .ok_or_else(|| OracleError::UnknownComponent(name.to_string()))
}

fn stepper<'m>(model: &'m SystemModel, name: &str, drop: bool, bounds: &Bounds) -> Result<NaiveStepper<'m>, OracleError> {
    let comp = component(model, name)?;
    let st = NaiveStepper::new(model, comp, drop).ok_or_else(|| OracleError::NoBehavior(name.to_string()))?;
    let states = state_count(st.hsm);
    if states > bounds.max_states {
        return Err(OracleError::TooManyStates {
            component: name.to_string(),
            states,
            bound: bounds.max_states,
        });
    }
    Ok(st)
}

/// Basic and composite states; pseudo-states are not counted.
pub fn state_count(hsm: &Hsm) -> usize {
    hsm.states
        .values()
        .filter(|s| matches!(s.kind, StateKind::Basic | StateKind::Composite))
        .count()
}

fn check_depth(depth: usize, bounds: &Bounds) -> Result<(), OracleError> {
    if depth > bounds.max_depth {
        return Err(OracleError::TooDeep {
            depth,
            bound: bounds.max_depth,
        });
    }
    Ok(())
}

/// Inputs of a component with default-valued payloads.
pub fn alphabet(model: &SystemModel, comp: &Component) -> Vec<(MessageRef, Payload)> {
    model
        .inp(comp)
        .into_iter()
        .map(|m| {
            let payload = model
                .port_message(comp, &m.port, &m.message)
                .map(|(d, _)| d.params.iter().map(|(n, t)| (n.clone(), Value::default_of(*t))).collect())
                .unwrap_or_default();
            (m, payload)
        })
        .collect()
}

fn sans_dbg(a: Vec<(MessageRef, Payload)>) -> Vec<(MessageRef, Payload)> {
    a.into_iter().filter(|(m, _)| m.message != DBG_MESSAGE).collect()
}

/// How a run without further input ends.
#[derive(Debug, Clone, PartialEq, Eq)]
enum End {
    Waiting(Cfg),
    Stuck { cfg: Cfg, rule: u8, reason: String },
    /// Repeated configuration or too many steps without input.
    Cut,
    Failed(String),
}

#[derive(Debug, Clone)]
struct Settled {
    end: End,
    labels: Vec<String>,
    states: Vec<String>,
    transitions: Vec<String>,
    /// Options taken at decision points, as `(dec, k)`.
    choices: Vec<(String, usize)>,
}

/// Runs `cfg` (with `msg` at the head of the queue) until it waits for the
/// next message, branching over every option at decision points.
fn settle(
    st: &NaiveStepper,
    cfg: &Cfg,
    msg: Option<&(MessageRef, Payload)>,
    bounds: &Bounds,
    mut on_step: Option<&mut dyn FnMut(&Cfg, Option<&(MessageRef, Payload)>, &Move)>,
) -> Vec<Settled> {
    struct Item {
        cfg: Cfg,
        msg: bool,
        acc: Settled,
        path: Vec<Cfg>,
        reply: Option<String>,
    }
    let mut out = Vec::new();
    let mut stack = vec![Item {
        cfg: cfg.clone(),
        msg: msg.is_some(),
        acc: Settled {
            end: End::Cut,
            labels: vec![],
            states: vec![],
            transitions: vec![],
            choices: vec![],
        },
        path: vec![],
        reply: None,
    }];
    while let Some(mut it) = stack.pop() {
        if it.path.len() > bounds.max_internal || it.path.contains(&it.cfg) {
            it.acc.end = End::Cut;
            out.push(it.acc);
            continue;
        }
        let head = if it.msg { msg } else { None };
        let mv = match st.step(&it.cfg, head.map(|(m, p)| (m, p)), it.reply.as_deref(), &mut |_| 0) {
            Ok(m) => m,
            Err(e) => {
                it.acc.end = End::Failed(e);
                out.push(it.acc);
                continue;
            }
        };
        if let Some(f) = on_step.as_mut() {
            f(&it.cfg, head, &mv);
        }
        match mv {
            Move::Wait => {
                it.acc.end = End::Waiting(it.cfg);
                out.push(it.acc);
            }
            Move::Drop => {
                it.msg = false;
                stack.push(it);
            }
            Move::Stuck { rule, reason } => {
                it.acc.end = End::Stuck {
                    cfg: it.cfg,
                    rule,
                    reason,
                };
                out.push(it.acc);
            }
            Move::Step {
                to,
                transition,
                labels,
                consumed,
                probe,
                ..
            } => {
                let mut acc = it.acc;
                acc.labels.extend(labels);
                acc.transitions.extend(transition);
                acc.states.push(to.state.clone());
                let mut path = it.path;
                path.push(it.cfg);
                let msg_left = it.msg && !consumed;
                let reply = if consumed { head.map(|(m, _)| m.port.clone()) } else { it.reply };
                if probe && st.kind(&to.state) == StateKind::Choice {
                    let n = st.hsm.transitions.values().filter(|t| t.src.0 == to.state).count();
                    for k in (1..=n).rev() {
                        let mut c = to.clone();
                        c.env.insert(SEL_VAR.to_string(), Value::Int(k as i64));
                        let mut a = acc.clone();
                        a.choices.push((to.state.clone(), k));
                        stack.push(Item {
                            cfg: c,
                            msg: msg_left,
                            acc: a,
                            path: path.clone(),
                            reply: reply.clone(),
                        });
                    }
                } else {
                    stack.push(Item {
                        cfg: to,
                        msg: msg_left,
                        acc,
                        path,
                        reply,
                    });
                }
            }
        }
    }
    out
}

/// Prefix-closed set of action-label sequences.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TraceSet {
    pub traces: BTreeSet<Vec<String>>,
    pub depth: usize,
    pub alphabet: Vec<String>,
}

impl TraceSet {
    fn add(&mut self, labels: &[String]) {
        for n in 0..=labels.len() {
            self.traces.insert(labels[..n].to_vec());
        }
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Longest traces, those not a proper prefix of another.
    pub fn maximal(&self) -> Vec<&Vec<String>> {
        self.traces
            .iter()
            .filter(|t| !self.traces.iter().any(|u| u.len() > t.len() && u.starts_with(t)))
            .collect()
    }
}

/// Every label sequence the component can produce for inputs drawn from
/// `alphabet` (all inputs when `None`) up to `depth` messages, over every
/// option at decision points.
pub fn enumerate_traces(
    model: &SystemModel,
    component: &str,
    alphabet_filter: Option<&[MessageRef]>,
    depth: usize,
    bounds: &Bounds,
) -> Result<TraceSet, OracleError> {
    check_depth(depth, bounds)?;
    let st = stepper(model, component, false, bounds)?;
    let mut alpha = alphabet(model, st.comp);
    if let Some(f) = alphabet_filter {
        alpha.retain(|(m, _)| f.contains(m));
    }
    let mut set = TraceSet {
        depth,
        alphabet: alpha.iter().map(|(m, _)| m.to_string()).collect(),
        ..Default::default()
    };
    set.add(&[]);
    let Some(init) = st.initial() else {
        return Ok(set);
    };
    let starts = settle(&st, &init, None, bounds, None);
    let work: Vec<(Cfg, Vec<String>)> = starts
        .into_iter()
        .filter_map(|s| {
            set.add(&s.labels);
            match s.end {
                End::Waiting(c) => Some((c, s.labels)),
                _ => None,
            }
        })
        .collect();
    let parts = par::map(bounds.mode, &work, |(c, labels)| {
        let mut local = TraceSet::default();
        let mut budget = bounds.max_configs;
        traces_from(&st, &alpha, c, labels.clone(), depth, bounds, &mut local, &mut budget).map(|_| local)
    });
    for p in parts {
        set.traces.extend(p?.traces);
    }
    Ok(set)
}

#[allow(clippy::too_many_arguments)]
fn traces_from(
    st: &NaiveStepper,
    alpha: &[(MessageRef, Payload)],
    cfg: &Cfg,
    labels: Vec<String>,
    depth: usize,
    bounds: &Bounds,
    set: &mut TraceSet,
    budget: &mut usize,
) -> Result<(), OracleError> {
    if depth == 0 {
        return Ok(());
    }
    for m in alpha {
        if *budget == 0 {
            return Err(OracleError::TooManyConfigs(bounds.max_configs));
        }
        *budget -= 1;
        for s in settle(st, cfg, Some(m), bounds, None) {
            let mut l = labels.clone();
            l.extend(s.labels);
            set.add(&l);
            if let End::Waiting(c) = s.end {
                traces_from(st, alpha, &c, l, depth - 1, bounds, set, budget)?;
            }
        }
    }
    Ok(())
}

/// First point where the refined machine fails to follow the original.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub inputs: Vec<String>,
    pub original_state: String,
    pub refined_state: String,
    pub reason: String,
}

/// Outcome of a simulation check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulationReport {
    pub component: String,
    pub depth: usize,
    /// Original steps matched.
    pub matched_steps: usize,
    pub counterexample: Option<Counterexample>,
}

impl SimulationReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

struct Sim<'a> {
    orig: NaiveStepper<'a>,
    refd: NaiveStepper<'a>,
    meta: &'a ComponentRefinement,
    alpha: Vec<(MessageRef, Payload)>,
    bounds: Bounds,
}

impl Sim<'_> {
    fn visible(&self, labels: &[String]) -> Vec<String> {
        labels
            .iter()
            .filter(|l| {
                let id = l.split_once(':').map(|(_, x)| x).unwrap_or(l);
                !self.meta.added.contains(id)
            })
            .cloned()
            .collect()
    }

    fn related(&self, o: &Cfg, r: &Cfg) -> Result<(), String> {
        if o.state != r.state {
            return Err(format!("state {} vs {}", o.state, r.state));
        }
        let strip = |e: &crate::text::Env| -> crate::text::Env {
            e.iter()
                .filter(|(k, _)| !self.meta.introduced_vars.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        };
        if strip(&o.env) != strip(&r.env) {
            return Err(format!("variables {:?} vs {:?}", o.env, r.env));
        }
        let hist: BTreeMap<&String, &String> = r
            .history
            .iter()
            .filter(|(k, _)| self.orig.hsm.states.contains_key(k.as_str()))
            .collect();
        let ohist: BTreeMap<&String, &String> = o.history.iter().collect();
        if hist != ohist {
            return Err(format!("history {:?} vs {:?}", o.history, r.history));
        }
        Ok(())
    }

    /// Matches the original's steps from `o` (with `msg` pending) by the
    /// refined machine from `r`, following the original at decisions.
    fn run(
        &self,
        mut o: Cfg,
        mut r: Cfg,
        msg: Option<usize>,
        inputs: &mut Vec<String>,
        depth: usize,
        matched: &mut usize,
        budget: &mut usize,
    ) -> Result<Option<Counterexample>, OracleError> {
        let fail = |o: &Cfg, r: &Cfg, inputs: &[String], reason: String| {
            Ok(Some(Counterexample {
                inputs: inputs.to_vec(),
                original_state: o.state.clone(),
                refined_state: r.state.clone(),
                reason,
            }))
        };
        let mut pending = msg;
        let mut reply: Option<String> = None;
        for _ in 0..=self.bounds.max_internal {
            if *budget == 0 {
                return Err(OracleError::TooManyConfigs(self.bounds.max_configs));
            }
            *budget -= 1;
            let head = pending.map(|i| (&self.alpha[i].0, &self.alpha[i].1));
            let mo = self.orig.step(&o, head, reply.as_deref(), &mut |_| 0);
            let mo = match mo {
                Ok(m) => m,
                // runtime failures of the original are not simulated
                Err(_) => return Ok(None),
            };
            match mo {
                Move::Stuck { .. } => return Ok(None),
                Move::Drop => return Ok(None),
                Move::Wait => {
                    match self.refd.step(&r, None, None, &mut |_| 0) {
                        Ok(Move::Wait) => {}
                        other => return fail(&o, &r, inputs, format!("original waits, refined does {other:?}")),
                    }
                    if depth == 0 {
                        return Ok(None);
                    }
                    for i in 0..self.alpha.len() {
                        inputs.push(self.alpha[i].0.to_string());
                        let c = self.run(o.clone(), r.clone(), Some(i), inputs, depth - 1, matched, budget)?;
                        if c.is_some() {
                            return Ok(c);
                        }
                        inputs.pop();
                    }
                    return Ok(None);
                }
                Move::Step {
                    to: o2,
                    labels: lo,
                    transition: to_t,
                    consumed,
                    ..
                } => {
                    let mr = match self.refd.step(&r, head, reply.as_deref(), &mut |_| 0) {
                        Ok(m) => m,
                        Err(e) => return fail(&o, &r, inputs, format!("refined action failed: {e}")),
                    };
                    let r2 = match mr {
                        Move::Step {
                            to: r2,
                            labels: lr,
                            transition: tr,
                            probe,
                            ..
                        } => {
                            if probe && self.refd.kind(&r2.state) == StateKind::Choice {
                                return fail(&o, &r, inputs, format!("refined asks for a decision where the original takes {to_t:?}"));
                            }
                            if self.visible(&lr) != lo || tr != to_t {
                                return fail(&o, &r, inputs, format!("original does {lo:?} via {to_t:?}, refined {lr:?} via {tr:?}"));
                            }
                            r2
                        }
                        other => return fail(&o, &r, inputs, format!("original steps via {to_t:?}, refined {other:?}")),
                    };
                    if let Err(why) = self.related(&o2, &r2) {
                        return fail(&o2, &r2, inputs, why);
                    }
                    *matched += 1;
                    if consumed {
                        reply = pending.map(|i| self.alpha[i].0.port.clone());
                        pending = None;
                    }
                    o = o2;
                    r = r2;
                }
            }
        }
        Ok(None)
    }
}

/// Checks that for every input sequence up to `depth` each step of the
/// original machine is matched by the refined one with the same visible
/// actions, and that configurations stay related: equal state, equal
/// variables apart from introduced ones, equal history on original
/// composites. Stuck original configurations are matched vacuously.
pub fn check_simulation(
    original: &SystemModel,
    refined: &Refined,
    component: &str,
    depth: usize,
    bounds: &Bounds,
) -> Result<SimulationReport, OracleError> {
    check_depth(depth, bounds)?;
    let orig = stepper(original, component, false, bounds)?;
    let mut refd_bounds = *bounds;
    refd_bounds.max_states = usize::MAX;
    let refd = stepper(&refined.model, component, false, &refd_bounds)?;
    let empty = ComponentRefinement::default();
    let meta = refined.metadata.components.get(component).unwrap_or(&empty);
    let alpha = sans_dbg(alphabet(original, orig.comp));
    let mut report = SimulationReport {
        component: component.to_string(),
        depth,
        matched_steps: 0,
        counterexample: None,
    };
    let (Some(o0), Some(r0)) = (orig.initial(), refd.initial()) else {
        if orig.initial().is_some() {
            report.counterexample = Some(Counterexample {
                inputs: vec![],
                original_state: String::new(),
                refined_state: String::new(),
                reason: "refined machine has no initial state".into(),
            });
        }
        return Ok(report);
    };
    let sim = Sim {
        orig,
        refd,
        meta,
        alpha,
        bounds: *bounds,
    };
    let mut budget = bounds.max_configs;
    let mut matched = 0;
    report.counterexample = sim.run(o0, r0, None, &mut vec![], depth, &mut matched, &mut budget)?;
    report.matched_steps = matched;
    Ok(report)
}

/// States and transitions a reachability check must hit.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Targets {
    pub states: BTreeSet<String>,
    pub transitions: BTreeSet<String>,
}

/// All states except initial states, choice-points and composites, and all
/// transitions not leaving an initial state or a choice-point. Transitions
/// that refinement moved onto a decision point count as well. Transitions
/// leaving a composite without any basic state below it are left out: no
/// configuration can trigger them.
pub fn reach_targets(hsm: &Hsm, meta: Option<&ComponentRefinement>) -> Targets {
    let kind = |id: &str| hsm.states.get(id).map(|s| s.kind);
    let fireable = |src: &str| {
        kind(src) != Some(StateKind::Composite)
            || hsm
                .descendants(src)
                .unwrap_or_default()
                .iter()
                .any(|d| kind(d.as_str()) == Some(StateKind::Basic))
    };
    Targets {
        states: hsm
            .states
            .values()
            .filter(|s| !matches!(s.kind, StateKind::Initial | StateKind::Choice | StateKind::Composite))
            .map(|s| s.id.0.clone())
            .collect(),
        transitions: hsm
            .transitions
            .values()
            .filter(|t| {
                let by_kind = !matches!(kind(t.src.as_str()), Some(StateKind::Initial | StateKind::Choice))
                    || meta.is_some_and(|m| m.modified.contains(t.id.as_str()));
                by_kind && fireable(t.src.as_str())
            })
            .map(|t| t.id.0.clone())
            .collect(),
    }
}

/// Outcome of a reachability check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReachabilityReport {
    pub component: String,
    pub from: String,
    pub reached_states: BTreeSet<String>,
    pub reached_transitions: BTreeSet<String>,
    pub unreached_states: BTreeSet<String>,
    pub unreached_transitions: BTreeSet<String>,
    /// Inputs and options leading to each reached target.
    pub witnesses: BTreeMap<String, Vec<String>>,
    pub explored: usize,
    /// The configuration bound stopped the search before all targets were hit.
    pub truncated: bool,
}

impl ReachabilityReport {
    pub fn passed(&self) -> bool {
        self.unreached_states.is_empty() && self.unreached_transitions.is_empty()
    }
}

/// Breadth-first search from a basic state over every input (the debug
/// message included), every option at decision points and the resulting
/// configurations, until all targets are hit or the bound is reached.
pub fn check_reachability(
    model: &SystemModel,
    component: &str,
    from: &str,
    targets: &Targets,
    bounds: &Bounds,
) -> Result<ReachabilityReport, OracleError> {
    let st = stepper(model, component, false, bounds)?;
    if !st.hsm.states.contains_key(from) {
        return Err(OracleError::UnknownState(from.to_string()));
    }
    let alpha = alphabet(model, st.comp);
    let start = Cfg {
        state: from.to_string(),
        env: st.comp.vars.iter().map(|v| (v.name.clone(), v.initial_value())).collect(),
        history: BTreeMap::new(),
    };
    let mut report = ReachabilityReport {
        component: component.to_string(),
        from: from.to_string(),
        reached_states: BTreeSet::new(),
        reached_transitions: BTreeSet::new(),
        unreached_states: targets.states.clone(),
        unreached_transitions: targets.transitions.clone(),
        witnesses: BTreeMap::new(),
        explored: 0,
        truncated: false,
    };
    let hit = |report: &mut ReachabilityReport, s: &Settled, path: &[String]| {
        let mut local = path.to_vec();
        for (d, k) in &s.choices {
            local.push(format!("{d}:{k}"));
        }
        for x in &s.states {
            if report.unreached_states.remove(x) {
                report.reached_states.insert(x.clone());
                report.witnesses.insert(x.clone(), local.clone());
            }
        }
        for x in &s.transitions {
            if report.unreached_transitions.remove(x) {
                report.reached_transitions.insert(x.clone());
                report.witnesses.insert(x.clone(), local.clone());
            }
        }
    };
    if report.unreached_states.remove(from) {
        report.reached_states.insert(from.to_string());
        report.witnesses.insert(from.to_string(), vec![]);
    }
    let mut seen: HashSet<Cfg> = HashSet::new();
    let mut queue = std::collections::VecDeque::new();
    // the start state may itself need to settle (e.g. an entry point)
    for s in settle(&st, &start, None, bounds, None) {
        hit(&mut report, &s, &[]);
        if let End::Waiting(c) = s.end {
            if seen.insert(c.clone()) {
                queue.push_back((c, Vec::<String>::new()));
            }
        }
    }
    while let Some((cfg, path)) = queue.pop_front() {
        if report.unreached_states.is_empty() && report.unreached_transitions.is_empty() {
            break;
        }
        if report.explored >= bounds.max_configs {
            report.truncated = true;
            break;
        }
        report.explored += 1;
        for m in &alpha {
            let mut p = path.clone();
            p.push(m.0.to_string());
            for s in settle(&st, &cfg, Some(m), bounds, None) {
                hit(&mut report, &s, &p);
                if let End::Waiting(c) = s.end {
                    if seen.insert(c.clone()) {
                        let mut q = p.clone();
                        q.extend(s.choices.iter().map(|(d, k)| format!("{d}:{k}")));
                        queue.push_back((c, q));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// A reachable stuck configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StuckWitness {
    pub inputs: Vec<String>,
    pub state: String,
    pub rule: u8,
    pub reason: String,
}

/// Outcome of a progress check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgressReport {
    pub component: String,
    pub depth: usize,
    pub explored: usize,
    pub stuck: Option<StuckWitness>,
}

impl ProgressReport {
    pub fn passed(&self) -> bool {
        self.stuck.is_none()
    }
}

/// Explores every input sequence up to `depth` and every option at
/// decision points, reporting the first stuck configuration found.
pub fn check_progress(
    model: &SystemModel,
    component: &str,
    depth: usize,
    policy: UnexpectedPolicy,
    bounds: &Bounds,
) -> Result<ProgressReport, OracleError> {
    check_depth(depth, bounds)?;
    let st = stepper(model, component, policy == UnexpectedPolicy::Drop, bounds)?;
    let alpha = alphabet(model, st.comp);
    let mut report = ProgressReport {
        component: component.to_string(),
        depth,
        explored: 0,
        stuck: None,
    };
    let Some(init) = st.initial() else {
        report.stuck = Some(StuckWitness {
            inputs: vec![],
            state: String::new(),
            rule: 7,
            reason: "root without initial state".into(),
        });
        return Ok(report);
    };
    let mut starts = Vec::new();
    for s in settle(&st, &init, None, bounds, None) {
        match s.end {
            End::Waiting(c) => starts.push(c),
            End::Stuck { cfg, rule, reason } => {
                report.stuck = Some(StuckWitness {
                    inputs: vec![],
                    state: cfg.state,
                    rule,
                    reason,
                });
                return Ok(report);
            }
            _ => {}
        }
    }
    starts.sort();
    starts.dedup();
    // one worker per first input
    let work: Vec<(Cfg, usize)> = starts
        .iter()
        .flat_map(|c| (0..alpha.len()).map(move |i| (c.clone(), i)))
        .collect();
    let results = par::map(bounds.mode, &work, |(c, i)| {
        let mut memo: HashMap<Cfg, usize> = HashMap::new();
        let mut explored = 0;
        let mut inputs = vec![alpha[*i].0.to_string()];
        let r = progress_from(&st, &alpha, c, Some(*i), depth.saturating_sub(1), bounds, &mut memo, &mut explored, &mut inputs);
        (r, explored)
    });
    if depth == 0 {
        return Ok(report);
    }
    for (r, n) in results {
        report.explored += n;
        if let Some(w) = r? {
            if report.stuck.is_none() {
                report.stuck = Some(w);
            }
        }
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn progress_from(
    st: &NaiveStepper,
    alpha: &[(MessageRef, Payload)],
    cfg: &Cfg,
    msg: Option<usize>,
    depth: usize,
    bounds: &Bounds,
    memo: &mut HashMap<Cfg, usize>,
    explored: &mut usize,
    inputs: &mut Vec<String>,
) -> Result<Option<StuckWitness>, OracleError> {
    if *explored >= bounds.max_configs {
        return Err(OracleError::TooManyConfigs(bounds.max_configs));
    }
    *explored += 1;
    for s in settle(st, cfg, msg.map(|i| &alpha[i]), bounds, None) {
        match s.end {
            End::Stuck { cfg, rule, reason } => {
                return Ok(Some(StuckWitness {
                    inputs: inputs.clone(),
                    state: cfg.state,
                    rule,
                    reason,
                }))
            }
            End::Waiting(c) if depth > 0 => {
                if memo.get(&c).is_some_and(|d| *d >= depth) {
                    continue;
                }
                memo.insert(c.clone(), depth);
                for i in 0..alpha.len() {
                    inputs.push(alpha[i].0.to_string());
                    if let Some(w) = progress_from(st, alpha, &c, Some(i), depth - 1, bounds, memo, explored, inputs)? {
                        return Ok(Some(w));
                    }
                    inputs.pop();
                }
            }
            _ => {}
        }
    }
    Ok(None)
}

/// Outcome of comparing the runtime stepper with the naive one.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CrossCheckReport {
    pub component: String,
    pub compared: usize,
    pub divergences: Vec<String>,
}

impl CrossCheckReport {
    pub fn passed(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Steps both implementations from every configuration met while
/// exploring inputs up to `depth` and reports any disagreement.
pub fn cross_check(
    model: &SystemModel,
    component: &str,
    depth: usize,
    policy: UnexpectedPolicy,
    bounds: &Bounds,
) -> Result<CrossCheckReport, OracleError> {
    check_depth(depth, bounds)?;
    let st = stepper(model, component, policy == UnexpectedPolicy::Drop, bounds)?;
    let rt = Stepper::new(model, st.comp, policy).ok_or_else(|| OracleError::NoBehavior(component.to_string()))?;
    let alpha = alphabet(model, st.comp);
    let mut report = CrossCheckReport {
        component: component.to_string(),
        ..Default::default()
    };
    let Some(init) = st.initial() else {
        return Ok(report);
    };
    let mut compare = |cfg: &Cfg, msg: Option<&(MessageRef, Payload)>, mv: &Move| {
        report.compared += 1;
        let config = Configuration {
            sigma: cfg.state.as_str().into(),
            env: cfg.env.clone(),
            history: cfg.history.iter().map(|(k, v)| (k.as_str().into(), v.as_str().into())).collect(),
        };
        let mut queue: std::collections::VecDeque<Message> = msg
            .map(|(m, p)| Message {
                msg: m.clone(),
                payload: p.clone(),
            })
            .into_iter()
            .collect();
        let got = rt.step(&config, &mut queue, None, &mut |_| 0);
        let agree = match (&got, mv) {
            (Ok(StepOutcome::Step(s)), Move::Step { rule, to, labels, emissions, transition, consumed, probe }) => {
                let hist: BTreeMap<String, String> =
                    s.to.history.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
                let em: Vec<String> = s.emissions.iter().map(|e| e.to_string()).collect();
                s.rule == *rule
                    && s.to.sigma.as_str() == to.state
                    && s.to.env == to.env
                    && hist == to.history
                    && s.actions == *labels
                    && em == *emissions
                    && s.transition == *transition
                    && s.consumed.is_some() == *consumed
                    && s.probe == *probe
            }
            (Ok(StepOutcome::Stuck(r)), Move::Stuck { rule, .. }) => r.rule() == *rule,
            (Ok(StepOutcome::NeedsMessage), Move::Wait) => true,
            (Ok(StepOutcome::Dropped(_)), Move::Drop) => true,
            (Err(_), _) => false,
            _ => false,
        };
        if !agree && report.divergences.len() < 20 {
            report.divergences.push(format!(
                "at {} with {:?}: runtime {:?}, oracle {:?}",
                cfg.state,
                msg.map(|(m, _)| m.to_string()),
                got,
                mv
            ));
        }
    };
    let mut frontier: Vec<Cfg> = Vec::new();
    for s in settle(&st, &init, None, bounds, Some(&mut compare)) {
        if let End::Waiting(c) = s.end {
            frontier.push(c);
        }
    }
    let mut seen: HashSet<Cfg> = frontier.iter().cloned().collect();
    let mut budget = bounds.max_configs;
    for _ in 0..depth {
        let mut next = Vec::new();
        for c in &frontier {
            for m in &alpha {
                if budget == 0 {
                    return Err(OracleError::TooManyConfigs(bounds.max_configs));
                }
                budget -= 1;
                for s in settle(&st, c, Some(m), bounds, Some(&mut compare)) {
                    if let End::Waiting(c2) = s.end {
                        if seen.insert(c2.clone()) {
                            next.push(c2);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(report)
}

/// Runs the progress check on every component with a state machine except
/// those listed in `skip`.
pub fn check_progress_all(
    model: &SystemModel,
    skip: &[&str],
    depth: usize,
    policy: UnexpectedPolicy,
    bounds: &Bounds,
) -> Vec<(String, Result<ProgressReport, OracleError>)> {
    model
        .components
        .iter()
        .filter(|c| c.behavior.is_some() && !skip.contains(&c.name.as_str()))
        .map(|c| (c.name.clone(), check_progress(model, &c.name, depth, policy, bounds)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Setting;
    use crate::refine::refine_model;
    use crate::text::parse_model;

    #[test]
    fn unrefined_traffic_light_gets_stuck_and_refined_does_not() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let b = Bounds::default();
        let p = check_progress(&m, "CTR", 4, UnexpectedPolicy::Stuck, &b).unwrap();
        assert!(!p.passed());
        let r = refine_model(&m, &Setting::default()).unwrap();
        let p = check_progress(&r.model, "CTR", 4, UnexpectedPolicy::Stuck, &b).unwrap();
        assert!(p.passed(), "{p:?}");
    }

    #[test]
    fn refined_traffic_light_simulates_the_original() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        let s = check_simulation(&m, &r, "CTR", 4, &Bounds::default()).unwrap();
        assert!(s.passed(), "{s:?}");
        assert!(s.matched_steps > 0);
    }

    #[test]
    fn steppers_agree_on_the_fixture() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        for model in [&m, &r.model] {
            let c = cross_check(model, "CTR", 3, UnexpectedPolicy::Stuck, &Bounds::default()).unwrap();
            assert!(c.passed(), "{:?}", c.divergences);
            assert!(c.compared > 10);
        }
    }

    #[test]
    fn yellow_reaches_red_only_after_refinement() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let b = Bounds::default();
        let want = Targets {
            states: ["s21".to_string()].into(),
            transitions: ["t13".to_string()].into(),
        };
        let before = check_reachability(&m, "CTR", "s23", &want, &b).unwrap();
        assert!(!before.passed());
        assert!(before.unreached_states.contains("s21"));
        let r = refine_model(&m, &Setting::default()).unwrap();
        let after = check_reachability(&r.model, "CTR", "s23", &want, &b).unwrap();
        assert!(after.passed(), "{after:?}");
    }

    #[test]
    fn every_default_target_is_reachable_in_the_refined_controller() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        let hsm = r.model.component("CTR").unwrap().behavior.as_ref().unwrap();
        let targets = reach_targets(hsm, r.metadata.components.get("CTR"));
        for from in ["s11", "s21", "s22", "s23"] {
            let rep = check_reachability(&r.model, "CTR", from, &targets, &Bounds::default()).unwrap();
            assert!(rep.passed(), "from {from}: {rep:?}");
        }
    }

    #[test]
    fn single_basic_state_has_only_the_empty_trace() {
        let src = "system S { component A { statemachine M { state only; } } }";
        let m = parse_model(src).unwrap();
        let t = enumerate_traces(&m, "A", None, 3, &Bounds::default()).unwrap();
        assert_eq!(t.traces, [vec![]].into());
    }

    #[test]
    fn depth_above_the_bound_is_rejected() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let e = check_progress(&m, "CTR", 7, UnexpectedPolicy::Stuck, &Bounds::default()).unwrap_err();
        assert_eq!(e, OracleError::TooDeep { depth: 7, bound: 6 });
    }
}
