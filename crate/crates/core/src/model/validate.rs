//! Well-formedness checks for system models and their state machines.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use super::{
    Component, Direction, Hsm, Scope, StateKind, SystemModel, ValueType, START_TIMER,
    TIMEOUT, TIMING_INTERFACE,
};
use crate::text::{typecheck_block, typecheck_guard, TypeCtx};

/// Category of a well-formedness violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ViolationKind {
    DuplicateName,
    UnknownReference,
    GuardOutsideChoice,
    TriggerOnPseudo,
    CrossesBoundary,
    OverlappingTriggers,
    PseudoFanOut,
    MultipleInitial,
    InvalidContainment,
    InvalidConnector,
    TriggerNotInput,
    MissingTimingInterface,
    TypeError,
    PseudoAction,
}

/// One violation with its location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub component: Option<String>,
    pub element: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(c) = &self.component {
            write!(f, " in {c}")?;
        }
        if let Some(e) = &self.element {
            write!(f, " at {e}")?;
        }
        write!(f, ": {}", self.message)
    }
}

struct Sink {
    out: Vec<Violation>,
    component: Option<String>,
}

impl Sink {
    fn push(&mut self, kind: ViolationKind, element: Option<&str>, message: impl Into<String>) {
        self.out.push(Violation {
            kind,
            component: self.component.clone(),
            element: element.map(str::to_string),
            message: message.into(),
        });
    }
}

/// Checks every well-formedness rule and returns all violations found.
pub fn validate(model: &SystemModel) -> Result<(), Vec<Violation>> {
    let mut sink = Sink {
        out: Vec::new(),
        component: None,
    };
    check_system(model, &mut sink);
    for comp in &model.components {
        sink.component = Some(comp.name.clone());
        check_component(model, comp, &mut sink);
        if let Some(hsm) = &comp.behavior {
            check_hsm(model, comp, hsm, &mut sink);
        }
    }
    if sink.out.is_empty() {
        Ok(())
    } else {
        Err(sink.out)
    }
}

fn duplicates<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for n in names {
        if !seen.insert(n) {
            dups.push(n);
        }
    }
    dups
}

fn check_system(model: &SystemModel, sink: &mut Sink) {
    use ViolationKind::*;
    for d in duplicates(model.interfaces.iter().map(|i| i.name.as_str())) {
        sink.push(DuplicateName, Some(d), "interface declared twice");
    }
    for d in duplicates(model.components.iter().map(|c| c.name.as_str())) {
        sink.push(DuplicateName, Some(d), "component declared twice");
    }
    for iface in &model.interfaces {
        for d in duplicates(iface.messages.iter().map(|m| m.name.as_str())) {
            sink.push(DuplicateName, Some(d), format!("message repeated in `{}`", iface.name));
        }
    }
    if let Some(t) = model.interface(TIMING_INTERFACE) {
        let ok = t.messages.len() == 2
            && t.message(START_TIMER).is_some_and(|m| {
                m.direction == Direction::Input && m.params.len() == 1 && m.params[0].1 == ValueType::Int
            })
            && t
                .message(TIMEOUT)
                .is_some_and(|m| m.direction == Direction::Output && m.params.is_empty());
        if !ok {
            sink.push(
                MissingTimingInterface,
                Some(TIMING_INTERFACE),
                "timing interface must be {in startTimer(delay: int); out timeout();}",
            );
        }
    }

    let mut used_ends = HashSet::new();
    for c in &model.connectors {
        let label = format!("{} -- {}", c.a, c.b);
        for end in [&c.a, &c.b] {
            if !used_ends.insert(end.clone()) {
                sink.push(InvalidConnector, Some(&label), format!("port {end} connected twice"));
            }
        }
        let pa = model.component(&c.a.component).and_then(|x| x.port(&c.a.port));
        let pb = model.component(&c.b.component).and_then(|x| x.port(&c.b.port));
        match (pa, pb) {
            (Some(pa), Some(pb)) => {
                if pa.interface != pb.interface {
                    sink.push(InvalidConnector, Some(&label), "ends have different interfaces");
                }
                if pa.conjugated == pb.conjugated {
                    sink.push(InvalidConnector, Some(&label), "exactly one end must be conjugated");
                }
            }
            _ => sink.push(UnknownReference, Some(&label), "connector names an unknown port"),
        }
    }

    let names: HashSet<&str> = model.components.iter().map(|c| c.name.as_str()).collect();
    let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (p, c) in &model.containment {
        if !names.contains(p.as_str()) || !names.contains(c.as_str()) {
            sink.push(UnknownReference, Some(c), "containment names an unknown component");
            continue;
        }
        if parent_of.insert(c, p).is_some() {
            sink.push(InvalidContainment, Some(c), "component contained twice");
        }
    }
    for start in parent_of.keys() {
        let mut seen = HashSet::new();
        let mut cur = *start;
        while let Some(p) = parent_of.get(cur) {
            if !seen.insert(cur) {
                sink.push(InvalidContainment, Some(start), "component containment is cyclic");
                break;
            }
            cur = p;
        }
    }
}

fn check_component(model: &SystemModel, comp: &Component, sink: &mut Sink) {
    use ViolationKind::*;
    for d in duplicates(comp.ports.iter().map(|p| p.name.as_str())) {
        sink.push(DuplicateName, Some(d), "port declared twice");
    }
    for d in duplicates(comp.vars.iter().map(|v| v.name.as_str())) {
        sink.push(DuplicateName, Some(d), "variable declared twice");
    }
    for p in &comp.ports {
        if model.interface(&p.interface).is_none() {
            if p.interface == TIMING_INTERFACE {
                sink.push(MissingTimingInterface, Some(&p.name), "timer port without timing interface");
            } else {
                sink.push(UnknownReference, Some(&p.name), format!("unknown interface `{}`", p.interface));
            }
        }
    }
    for v in &comp.vars {
        if let Some(init) = &v.init {
            if init.ty() != v.ty {
                sink.push(TypeError, Some(&v.name), format!("initial value is not {}", v.ty));
            }
        }
    }
}

struct CompTypes<'a> {
    model: &'a SystemModel,
    comp: &'a Component,
    payload: Option<BTreeMap<String, ValueType>>,
}

impl TypeCtx for CompTypes<'_> {
    fn var(&self, name: &str) -> Option<ValueType> {
        self.comp.var(name).map(|v| v.ty)
    }

    fn payload(&self, name: &str) -> Option<ValueType> {
        self.payload.as_ref().and_then(|p| p.get(name).copied())
    }

    fn send_signature(&self, port: &str, message: &str) -> Result<Vec<ValueType>, String> {
        match self.model.port_message(self.comp, port, message) {
            Some((decl, Direction::Output)) => Ok(decl.params.iter().map(|p| p.1).collect()),
            Some(_) => Err(format!("`{port}.{message}` is not an output of `{}`", self.comp.name)),
            None => Err(format!("unknown port message `{port}.{message}`")),
        }
    }

    fn reply_signature(&self, message: &str) -> Result<Vec<ValueType>, String> {
        let outs = self.model.outp(self.comp);
        let mut sig = None;
        for m in outs.iter().filter(|m| m.message == message) {
            let (decl, _) = self
                .model
                .port_message(self.comp, &m.port, &m.message)
                .expect("outp lists declared messages");
            sig = Some(decl.params.iter().map(|p| p.1).collect());
        }
        sig.ok_or_else(|| format!("`{message}` is not an output of `{}`", self.comp.name))
    }
}

fn check_hsm(model: &SystemModel, comp: &Component, hsm: &Hsm, sink: &mut Sink) {
    use ViolationKind::*;
    let root = hsm.root_id().clone();

    let names = hsm
        .states
        .keys()
        .map(|s| s.as_str())
        .chain(hsm.transitions.keys().map(|t| t.as_str()));
    for d in duplicates(names) {
        sink.push(DuplicateName, Some(d), "element id used twice");
    }

    for s in hsm.states.values() {
        let id = s.id.as_str();
        match &s.parent {
            None if s.id != root => sink.push(InvalidContainment, Some(id), "state has no parent"),
            Some(_) if s.id == root => sink.push(InvalidContainment, Some(id), "root has a parent"),
            None => {
                if s.kind != StateKind::Composite {
                    sink.push(InvalidContainment, Some(id), "root must be composite");
                }
            }
            Some(p) => match hsm.state(p.as_str()) {
                None => sink.push(UnknownReference, Some(id), format!("unknown parent `{p}`")),
                Some(ps) if ps.kind != StateKind::Composite => {
                    sink.push(InvalidContainment, Some(id), "parent is not composite")
                }
                Some(_) => {
                    if matches!(s.kind, StateKind::EntryPoint | StateKind::ExitPoint) && *p == root {
                        sink.push(InvalidContainment, Some(id), "entry/exit points need a composite other than the root");
                    }
                }
            },
        }
        if s.kind.is_pseudo() && (s.entry.is_some() || s.exit.is_some()) {
            sink.push(PseudoAction, Some(id), "pseudo-states carry no entry/exit actions");
        }
    }
    // Later checks walk parent chains, so stop on a cycle.
    for s in hsm.states.values() {
        let mut seen = HashSet::new();
        let mut cur = s.parent.as_ref();
        while let Some(p) = cur {
            if !seen.insert(p.clone()) {
                sink.push(InvalidContainment, Some(s.id.as_str()), "containment is cyclic");
                return;
            }
            cur = hsm.state(p.as_str()).and_then(|x| x.parent.as_ref());
        }
    }

    for c in hsm.states.values().filter(|s| s.kind == StateKind::Composite) {
        let n = hsm.children(c.id.as_str()).filter(|k| k.kind == StateKind::Initial).count();
        if n > 1 {
            sink.push(MultipleInitial, Some(c.id.as_str()), format!("{n} initial states"));
        }
    }

    let inputs = model.inp(comp);
    for t in hsm.transitions.values() {
        let id = t.id.as_str();
        let (Some(src), Some(des)) = (hsm.state(t.src.as_str()), hsm.state(t.des.as_str())) else {
            sink.push(UnknownReference, Some(id), "transition names an unknown state");
            continue;
        };
        if src.id == root || des.id == root {
            sink.push(CrossesBoundary, Some(id), "the root cannot be a transition end");
            continue;
        }
        if t.guard.is_some() && src.kind != StateKind::Choice {
            sink.push(GuardOutsideChoice, Some(id), "only transitions leaving a choice-point carry guards");
        }
        if !t.triggers.is_empty() && src.kind.is_pseudo() {
            sink.push(TriggerOnPseudo, Some(id), "transitions leaving pseudo-states carry no triggers");
        }
        let so = hsm.scope(src.id.as_str(), Scope::Outgoing).ok().flatten();
        let di = hsm.scope(des.id.as_str(), Scope::Incoming).ok().flatten();
        if so != di {
            sink.push(
                CrossesBoundary,
                Some(id),
                format!(
                    "source lies in `{}` but destination in `{}`",
                    so.map(|s| s.0).unwrap_or_default(),
                    di.map(|s| s.0).unwrap_or_default()
                ),
            );
        }
        for trig in &t.triggers {
            if !inputs.contains(trig) {
                sink.push(TriggerNotInput, Some(id), format!("`{trig}` is not an input of `{}`", comp.name));
            }
        }
        // Payload fields available in the action: those shared by all triggers.
        let mut payload: Option<BTreeMap<String, ValueType>> = None;
        for trig in &t.triggers {
            let fields: BTreeMap<String, ValueType> = model
                .port_message(comp, &trig.port, &trig.message)
                .map(|(d, _)| d.params.iter().cloned().collect())
                .unwrap_or_default();
            payload = Some(match payload {
                None => fields,
                Some(prev) => prev
                    .into_iter()
                    .filter(|(k, v)| fields.get(k) == Some(v))
                    .collect(),
            });
        }
        let guard_ctx = CompTypes { model, comp, payload: None };
        if let Some(g) = &t.guard {
            if let Err(e) = typecheck_guard(g, &guard_ctx) {
                sink.push(TypeError, Some(id), format!("guard: {e}"));
            }
        }
        if let Some(a) = &t.action {
            let ctx = CompTypes { model, comp, payload };
            if let Err(e) = typecheck_block(a, &ctx) {
                sink.push(TypeError, Some(id), format!("action: {e}"));
            }
        }
    }

    for s in hsm.states.values() {
        let ctx = CompTypes { model, comp, payload: None };
        for (label, block) in [("entry", &s.entry), ("exit", &s.exit)] {
            if let Some(b) = block {
                if let Err(e) = typecheck_block(b, &ctx) {
                    sink.push(TypeError, Some(s.id.as_str()), format!("{label}: {e}"));
                }
            }
        }
        let outs: Vec<_> = hsm.out_t(s.id.as_str()).collect();
        if s.kind.is_pseudo() && s.kind != StateKind::Choice && outs.len() > 1 {
            sink.push(PseudoFanOut, Some(s.id.as_str()), format!("{} outgoing transitions", outs.len()));
        }
        if !s.kind.is_pseudo() {
            let mut seen: BTreeSet<&super::MessageRef> = BTreeSet::new();
            for t in &outs {
                for m in &t.triggers {
                    if !seen.insert(m) {
                        sink.push(
                            OverlappingTriggers,
                            Some(t.id.as_str()),
                            format!("`{m}` triggers several transitions from `{}`", s.id),
                        );
                    }
                }
            }
        }
    }
}
