//! Model-to-model refinement that turns every execution blocker of partial
//! and absent components into a decision point.
//!
//! Each composite (root included) receives a choice-point `__pmx_dec_<c>`.
//! Problematic elements are wired into it, and it fans out to the states of
//! its region. Transitions leaving a decision point are guarded by
//! `__pmx_sel == k`; those entering it end with `probe`, which hands control
//! to the input provider.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::analysis::{self, AnalysisError, AnalysisReport, ComponentReport, Setting};
use crate::model::{
    validate, Completeness, Component, Connector, Direction, Hsm, Interface, MessageDecl,
    MessageRef, Port, PortRef, Scope, State, StateId, StateKind, SystemModel, Transition,
    TransitionId, ValueType, VarDecl, Violation, DBG_INTERFACE, DBG_MESSAGE, RESERVED_PREFIX,
    START_TIMER, TIMEOUT, TIMING_INTERFACE,
};
use crate::text::{canonicalize, ActionBlock, BinOp, Expr, Stmt};

/// Variable holding the option chosen at a decision point.
pub const SEL_VAR: &str = "__pmx_sel";
/// Port through which components receive the debug message.
pub const DBG_PORT: &str = "__pmx_dbg";
/// Preferred name of the component that forwards debug messages.
pub const DBG_AGENT: &str = "dbg_agent";
/// Prefix of decision-point ids.
pub const DEC_PREFIX: &str = "__pmx_dec_";

/// Errors of refinement.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error("input model is not well-formed: {}", fmt_violations(.0))]
    InvalidModel(Vec<Violation>),
    #[error("analysis report does not match the state machine: {0}")]
    ReportMismatch(String),
    #[error("identifier `{0}` uses the reserved prefix `__pmx_`")]
    ReservedIdentifier(String),
    #[error("interface `{0}` exists with an incompatible shape")]
    InterfaceConflict(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("refined model failed validation: {}", fmt_violations(.0))]
    Internal(Vec<Violation>),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Bookkeeping of one refined state machine.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ComponentRefinement {
    /// Surviving element id to its original id.
    pub org: BTreeMap<String, String>,
    /// Elements introduced by refinement.
    pub added: BTreeSet<String>,
    /// Original transitions whose source was moved to a decision point.
    pub modified: BTreeSet<String>,
    pub introduced_vars: BTreeSet<String>,
    /// Composite to its decision point.
    pub dec_points: BTreeMap<StateId, StateId>,
    /// Composite to the entry point added for steering into it.
    pub entry_points: BTreeMap<StateId, StateId>,
    /// Composite to the exit point added for steering out of it.
    pub exit_points: BTreeMap<StateId, StateId>,
}

impl ComponentRefinement {
    /// Original id of a refined element, if it existed before refinement.
    pub fn original(&self, id: &str) -> Option<&str> {
        self.org.get(id).map(String::as_str)
    }

    pub fn is_added(&self, id: &str) -> bool {
        self.added.contains(id)
    }

    pub fn is_decision_point(&self, id: &str) -> bool {
        self.dec_points.values().any(|d| d.as_str() == id)
    }
}

/// Bookkeeping of a refined system.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RefinementMetadata {
    pub components: BTreeMap<String, ComponentRefinement>,
    pub dbg_agent: String,
}

impl RefinementMetadata {
    /// JSON form with component-qualified keys.
    pub fn to_json(&self) -> Json {
        let mut org = serde_json::Map::new();
        let mut vars = Vec::new();
        let mut decs = serde_json::Map::new();
        let mut added = Vec::new();
        let mut modified = Vec::new();
        for (c, r) in &self.components {
            for (k, v) in &r.org {
                org.insert(format!("{c}.{k}"), json!(format!("{c}.{v}")));
            }
            vars.extend(r.introduced_vars.iter().map(|v| format!("{c}.{v}")));
            for (k, v) in &r.dec_points {
                decs.insert(format!("{c}.{k}"), json!(format!("{c}.{v}")));
            }
            added.extend(r.added.iter().map(|a| format!("{c}.{a}")));
            modified.extend(r.modified.iter().map(|a| format!("{c}.{a}")));
        }
        json!({
            "org": org,
            "introduced_vars": vars,
            "dec_points": decs,
            "added": added,
            "modified": modified,
            "dbg_agent": self.dbg_agent,
        })
    }
}

/// A refined system with its bookkeeping and the analysis it was built from.
#[derive(Debug, Clone)]
pub struct Refined {
    pub model: SystemModel,
    pub metadata: RefinementMetadata,
    pub report: AnalysisReport,
}

fn probe_block() -> ActionBlock {
    ActionBlock::new(vec![Stmt::Probe])
}

fn sel_guard(k: usize) -> Expr {
    Expr::bin(BinOp::Eq, Expr::var(SEL_VAR), Expr::Int(k as i64))
}

struct Builder<'a> {
    h: Hsm,
    meta: ComponentRefinement,
    next_t: usize,
    report: &'a ComponentReport,
}

impl Builder<'_> {
    fn add_state(&mut self, base: String, kind: StateKind, parent: &StateId) -> StateId {
        let id = self.h.fresh_id(&base);
        self.meta.added.insert(id.clone());
        self.h.add_state(State::new(id, kind, Some(parent.clone())))
    }

    fn add_transition(&mut self, src: &StateId, des: &StateId, probe: bool) -> TransitionId {
        let id = loop {
            self.next_t += 1;
            let cand = format!("{RESERVED_PREFIX}t{}", self.next_t);
            if !self.h.contains_element(&cand) {
                break cand;
            }
        };
        self.meta.added.insert(id.clone());
        let mut t = Transition::new(id, src, des);
        if probe {
            t.action = Some(probe_block());
        }
        self.h.add_transition(t)
    }

    fn kind(&self, id: &str) -> StateKind {
        self.h.states[id].kind
    }

    fn scope(&self, id: &str, side: Scope) -> Option<StateId> {
        self.h.scope(id, side).ok().flatten()
    }

    fn is_added_boundary(&self, id: &str) -> bool {
        self.meta.added.contains(id) && matches!(self.kind(id), StateKind::EntryPoint | StateKind::ExitPoint)
    }
}

/// Guard that holds exactly when no outgoing guard of `choice` holds; an
/// unguarded transition counts as `true`. A choice without outgoing
/// transitions yields `true`.
pub fn negated_disjunction_guard(choice: &str, hsm: &Hsm) -> Expr {
    let guards: Vec<Expr> = hsm
        .out_t(choice)
        .map(|t| t.guard.clone().unwrap_or(Expr::Bool(true)))
        .collect();
    if guards.is_empty() {
        Expr::Bool(true)
    } else {
        Expr::negate(Expr::any(guards))
    }
}

/// Refines one state machine. `comp` must already carry the debug port if
/// the component is to react to injected debug messages; `report` holds the
/// problematic sets of `hsm`.
pub fn refine_hsm(
    model: &SystemModel,
    comp: &Component,
    hsm: &Hsm,
    report: &ComponentReport,
) -> Result<(Hsm, ComponentRefinement), RefineError> {
    let known = |id: &StateId| hsm.state(id.as_str()).is_some();
    for id in report
        .p1
        .iter()
        .chain(&report.p2)
        .chain(&report.p3)
        .chain(&report.p4)
        .chain(report.p5.keys())
        .chain(&report.p6)
        .chain(&report.p9)
        .chain(&report.p11)
    {
        if !known(id) {
            return Err(RefineError::ReportMismatch(format!("unknown state `{id}`")));
        }
    }
    for t in &report.p10 {
        if hsm.transition(t.as_str()).is_none() {
            return Err(RefineError::ReportMismatch(format!("unknown transition `{t}`")));
        }
    }
    for id in hsm.states.keys().map(|s| s.as_str()).chain(hsm.transitions.keys().map(|t| t.as_str())) {
        if id.starts_with(RESERVED_PREFIX) {
            return Err(RefineError::ReservedIdentifier(id.to_string()));
        }
    }

    let mut b = Builder {
        h: hsm.clone(),
        meta: ComponentRefinement::default(),
        next_t: 0,
        report,
    };
    for id in hsm.states.keys() {
        b.meta.org.insert(id.to_string(), id.to_string());
    }
    for id in hsm.transitions.keys() {
        b.meta.org.insert(id.to_string(), id.to_string());
    }

    let inputs = model.inp(comp);
    let dbg = comp
        .port(DBG_PORT)
        .map(|_| MessageRef::new(DBG_PORT, DBG_MESSAGE));
    let root = hsm.root_id().clone();

    for sc in hsm.composites_by_depth() {
        // 1. decision point
        let dec = b.add_state(format!("{DEC_PREFIX}{sc}"), StateKind::Choice, &sc);
        b.meta.dec_points.insert(sc.clone(), dec.clone());

        // 2. empty composite gets a basic state
        if b.report.p2.contains(&sc) {
            b.add_state(format!("{RESERVED_PREFIX}state_{sc}"), StateKind::Basic, &sc);
        }
        // 3. missing initial state
        if b.report.p1.contains(&sc) {
            b.add_state(format!("{RESERVED_PREFIX}init_{sc}"), StateKind::Initial, &sc);
        }

        // 4. broken chains continue at the decision point
        let broken: Vec<StateId> = b
            .h
            .states
            .values()
            .filter(|s| {
                s.kind.is_pseudo()
                    && s.kind != StateKind::Choice
                    && s.id != dec
                    && !b.is_added_boundary(s.id.as_str())
                    && b.h.out_t(s.id.as_str()).next().is_none()
                    && b.scope(s.id.as_str(), Scope::Outgoing).as_ref() == Some(&sc)
            })
            .map(|s| s.id.clone())
            .collect();
        for s in broken {
            b.add_transition(&s, &dec, true);
        }

        // 5. choice-points fall back to the decision point
        let choices: Vec<StateId> = b
            .h
            .children(sc.as_str())
            .filter(|s| s.kind == StateKind::Choice && s.id != dec)
            .map(|s| s.id.clone())
            .collect();
        for ch in choices {
            let fallback = negated_disjunction_guard(ch.as_str(), &b.h);
            let t = b.add_transition(&ch, &dec, true);
            b.h.transitions[t.as_str()].guard = Some(fallback);
        }

        // 6. unhandled inputs of basic states lead to the decision point
        let basics: Vec<StateId> = b
            .h
            .children(sc.as_str())
            .filter(|s| s.kind == StateKind::Basic)
            .map(|s| s.id.clone())
            .collect();
        for s in basics {
            let handled = b.h.handled(s.as_str()).unwrap_or_default();
            let mut trig: Vec<MessageRef> = inputs.difference(&handled).cloned().collect();
            if let Some(d) = &dbg {
                trig.retain(|m| m != d);
                trig.push(d.clone());
            }
            if trig.is_empty() {
                continue;
            }
            let t = b.add_transition(&s, &dec, true);
            b.h.transitions[t.as_str()].triggers = trig;
        }

        // 7. the decision point reaches every state of the region
        let targets: Vec<StateId> = b
            .h
            .states
            .values()
            .filter(|s| {
                s.id != dec
                    && s.kind != StateKind::Initial
                    && !b.is_added_boundary(s.id.as_str())
                    && b.scope(s.id.as_str(), Scope::Incoming).as_ref() == Some(&sc)
                    && (matches!(s.kind, StateKind::Basic | StateKind::Composite) || b.report.p9.contains(&s.id))
            })
            .map(|s| s.id.clone())
            .collect();
        for s in targets {
            b.add_transition(&dec, &s, false);
        }

        // 8. trigger-less transitions become options of the decision point
        let p10: Vec<TransitionId> = b
            .report
            .p10
            .iter()
            .filter(|t| {
                let src = &b.h.transitions[t.as_str()].src;
                b.scope(src.as_str(), Scope::Outgoing).as_ref() == Some(&sc)
            })
            .cloned()
            .collect();
        for t in p10 {
            b.h.transitions[t.as_str()].src = dec.clone();
            b.meta.modified.insert(t.to_string());
        }

        // 9. steering across composite boundaries
        let subs: Vec<StateId> = hsm
            .children(sc.as_str())
            .filter(|s| s.kind == StateKind::Composite)
            .map(|s| s.id.clone())
            .collect();
        for cc in subs {
            let en = b.add_state(format!("{RESERVED_PREFIX}en_{cc}"), StateKind::EntryPoint, &cc);
            let ex = b.add_state(format!("{RESERVED_PREFIX}ex_{cc}"), StateKind::ExitPoint, &cc);
            b.meta.entry_points.insert(cc.clone(), en.clone());
            b.meta.exit_points.insert(cc.clone(), ex.clone());
            b.add_transition(&dec, &en, false);
            b.add_transition(&ex, &dec, true);
        }
        if sc != root {
            let ex = b.meta.exit_points.get(&sc).cloned();
            let en = b.meta.entry_points.get(&sc).cloned();
            match (ex, en) {
                (Some(ex), Some(en)) => {
                    b.add_transition(&dec, &ex, false);
                    b.add_transition(&en, &dec, true);
                }
                _ => {
                    return Err(RefineError::ReportMismatch(format!(
                        "composite `{sc}` was not reached from its parent"
                    )))
                }
            }
        }
    }

    // Options are numbered in document order.
    for dec in b.meta.dec_points.values().cloned().collect::<Vec<_>>() {
        let outs: Vec<TransitionId> = b.h.out_t(dec.as_str()).map(|t| t.id.clone()).collect();
        for (k, t) in outs.iter().enumerate() {
            b.h.transitions[t.as_str()].guard = Some(sel_guard(k + 1));
        }
    }
    canonicalize(&mut b.h);
    b.meta.introduced_vars.insert(SEL_VAR.to_string());
    Ok((b.h, b.meta))
}

fn ensure_interface(model: &mut SystemModel, iface: Interface) -> Result<(), RefineError> {
    match model.interface(&iface.name) {
        Some(existing) if *existing == iface => Ok(()),
        Some(_) => Err(RefineError::InterfaceConflict(iface.name)),
        None => {
            model.interfaces.push(iface);
            Ok(())
        }
    }
}

fn dbg_interface() -> Interface {
    Interface {
        name: DBG_INTERFACE.into(),
        messages: vec![MessageDecl {
            name: DBG_MESSAGE.into(),
            direction: Direction::Input,
            params: vec![],
        }],
    }
}

fn timing_interface() -> Interface {
    Interface {
        name: TIMING_INTERFACE.into(),
        messages: vec![
            MessageDecl {
                name: START_TIMER.into(),
                direction: Direction::Input,
                params: vec![("delay".into(), ValueType::Int)],
            },
            MessageDecl {
                name: TIMEOUT.into(),
                direction: Direction::Output,
                params: vec![],
            },
        ],
    }
}

fn sel_var() -> VarDecl {
    VarDecl {
        name: SEL_VAR.into(),
        ty: ValueType::Int,
        init: None,
    }
}

/// Refines every partial and absent component of `model` under `setting`,
/// adds the debug interface and the debug agent. Complete components are
/// copied unchanged.
pub fn refine_model(model: &SystemModel, setting: &Setting) -> Result<Refined, RefineError> {
    let model = setting.apply(model)?;
    validate(&model).map_err(RefineError::InvalidModel)?;
    let report = analysis::analyze(&model, &Setting::default())?;

    let mut m = model.clone();
    ensure_interface(&mut m, dbg_interface())?;
    ensure_interface(&mut m, timing_interface())?;

    let mut agent_name = DBG_AGENT.to_string();
    let mut n = 1;
    while m.component(&agent_name).is_some() {
        agent_name = format!("{DBG_AGENT}_{n}");
        n += 1;
    }
    let mut agent = Component::new(agent_name.clone());
    agent.ports.push(Port {
        name: "timer".into(),
        interface: TIMING_INTERFACE.into(),
        conjugated: true,
    });

    let mut metadata = RefinementMetadata {
        dbg_agent: agent_name.clone(),
        ..Default::default()
    };

    let targets: Vec<usize> = m
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.level != Completeness::Complete)
        .map(|(i, _)| i)
        .collect();
    for &i in &targets {
        let name = m.components[i].name.clone();
        if m.components[i].port(DBG_PORT).is_some() {
            return Err(RefineError::ReservedIdentifier(DBG_PORT.into()));
        }
        m.components[i].ports.push(Port {
            name: DBG_PORT.into(),
            interface: DBG_INTERFACE.into(),
            conjugated: false,
        });
        let agent_port = format!("to_{name}");
        agent.ports.push(Port {
            name: agent_port.clone(),
            interface: DBG_INTERFACE.into(),
            conjugated: true,
        });
        m.connectors.push(Connector {
            a: PortRef::new(&agent_name, agent_port),
            b: PortRef::new(&name, DBG_PORT),
        });

        let comp = &m.components[i];
        let (hsm, comp_report) = match comp.level {
            Completeness::Partial => {
                let hsm = comp
                    .behavior
                    .clone()
                    .unwrap_or_else(|| Hsm::empty(format!("{name}SM")));
                let r = report
                    .component(&name)
                    .cloned()
                    .unwrap_or_else(|| analysis::analyze_hsm(&m, comp, &hsm));
                (hsm, r)
            }
            _ => {
                let root = comp
                    .behavior
                    .as_ref()
                    .map(|h| h.root_id().to_string())
                    .unwrap_or_else(|| format!("{name}SM"));
                let hsm = Hsm::empty(root);
                let r = analysis::analyze_hsm(&m, comp, &hsm);
                (hsm, r)
            }
        };
        let (refined, mut meta) = refine_hsm(&m, comp, &hsm, &comp_report)?;
        if comp.level == Completeness::Absent {
            meta.org.clear();
        }
        let comp = &mut m.components[i];
        comp.behavior = Some(refined);
        if comp.var(SEL_VAR).is_some() {
            return Err(RefineError::ReservedIdentifier(SEL_VAR.into()));
        }
        comp.vars.push(sel_var());
        metadata.components.insert(name, meta);
    }

    let empty = Hsm::empty(format!("{agent_name}SM"));
    let agent_report = analysis::analyze_hsm(&m, &agent, &empty);
    let (agent_hsm, agent_meta) = refine_hsm(&m, &agent, &empty, &agent_report)?;
    agent.behavior = Some(agent_hsm);
    agent.vars.push(sel_var());
    m.components.push(agent);
    metadata.components.insert(agent_name, agent_meta);

    validate(&m).map_err(RefineError::Internal)?;
    Ok(Refined {
        model: m,
        metadata,
        report,
    })
}

/// States an option of a decision point ultimately leads to. Options that
/// cross an added entry or exit point are followed through the decision
/// point on the other side, excluding the way back.
pub fn option_reach(hsm: &Hsm, transition: &str) -> Vec<StateId> {
    let mut out = Vec::new();
    if let Some(t) = hsm.transition(transition) {
        reach_into(hsm, &t.des, &mut out, 0);
    }
    out
}

fn reach_into(hsm: &Hsm, des: &StateId, out: &mut Vec<StateId>, depth: usize) {
    let Some(d) = hsm.state(des.as_str()) else {
        return;
    };
    let crosses = matches!(d.kind, StateKind::EntryPoint | StateKind::ExitPoint) && depth < 64;
    let next_dec = if crosses {
        let mut outs = hsm.out_t(des.as_str());
        match (outs.next(), outs.next()) {
            (Some(t), None) if t.des.as_str().starts_with(DEC_PREFIX) => Some(t.des.clone()),
            _ => None,
        }
    } else {
        None
    };
    let Some(dec) = next_dec else {
        if !out.contains(des) {
            out.push(des.clone());
        }
        return;
    };
    let owner = d.parent.clone();
    for t in hsm.out_t(dec.as_str()) {
        let back = owner.as_ref().is_some_and(|c| {
            t.des == *c
                || hsm.state(t.des.as_str()).is_some_and(|s| {
                    s.parent.as_ref() == Some(c) && matches!(s.kind, StateKind::EntryPoint | StateKind::ExitPoint)
                })
        });
        if !back {
            reach_into(hsm, &t.des, out, depth + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_model;

    #[test]
    fn refined_traffic_light_is_well_formed() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        assert_eq!(r.model.components.len(), m.components.len() + 1);
        let ctr = r.model.component("CTR").unwrap().behavior.as_ref().unwrap();
        let dec = ctr.state("__pmx_dec_c11").unwrap();
        assert_eq!(dec.kind, StateKind::Choice);
        assert_eq!(ctr.transition("t13").unwrap().src.as_str(), "__pmx_dec_CTRSM");
    }
}
