//! Static detection of the model elements that block execution of partial
//! models, component by component, plus the system-level set of inputs that
//! only absent components could have produced.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Map, Value as Json};

use crate::model::{
    Completeness, Component, Direction, Hsm, MessageRef, StateId, StateKind, SystemModel,
    TransitionId, RESERVED_PREFIX,
};
use crate::par::{self, ExecMode};

/// Per-component completeness levels given on the command line, e.g.
/// `CTR=partial,UC=absent,SLD=complete`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Setting(pub BTreeMap<String, Completeness>);

/// Errors of analysis.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
}

impl FromStr for Setting {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, level) = part
                .split_once('=')
                .ok_or_else(|| AnalysisError::InvalidSetting(format!("`{part}` is not NAME=LEVEL")))?;
            let level = level.trim().parse().map_err(AnalysisError::InvalidSetting)?;
            if map.insert(name.trim().to_string(), level).is_some() {
                return Err(AnalysisError::InvalidSetting(format!("`{name}` given twice")));
            }
        }
        Ok(Setting(map))
    }
}

impl Setting {
    /// Setting that marks every component with `level`.
    pub fn uniform(model: &SystemModel, level: Completeness) -> Self {
        Setting(model.components.iter().map(|c| (c.name.clone(), level)).collect())
    }

    /// Copy of the model with the setting's levels applied on top of the
    /// `@level` annotations.
    pub fn apply(&self, model: &SystemModel) -> Result<SystemModel, AnalysisError> {
        let mut m = model.clone();
        for (name, level) in &self.0 {
            let c = m
                .component_mut(name)
                .ok_or_else(|| AnalysisError::InvalidSetting(format!("unknown component `{name}`")))?;
            c.level = *level;
        }
        Ok(m)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Problematic element sets of one component.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ComponentReport {
    pub component: String,
    pub level: Option<Completeness>,
    /// Composites (and the root) without an initial child.
    pub p1: BTreeSet<StateId>,
    /// Composites (and the root) without children.
    pub p2: BTreeSet<StateId>,
    /// Pseudo-states other than choice-points without outgoing transitions.
    pub p3: BTreeSet<StateId>,
    /// Basic states handling no message.
    pub p4: BTreeSet<StateId>,
    /// Basic states with unhandled inputs, and those inputs.
    pub p5: BTreeMap<StateId, BTreeSet<MessageRef>>,
    /// Choice-points (guards may be non-exhaustive).
    pub p6: BTreeSet<StateId>,
    /// True for partial components.
    pub p8: bool,
    /// States other than initial ones without incoming transitions.
    pub p9: BTreeSet<StateId>,
    /// Transitions from basic or composite states without triggers.
    pub p10: BTreeSet<TransitionId>,
    /// All basic states.
    pub p11: BTreeSet<StateId>,
    pub inputs: BTreeSet<MessageRef>,
    pub outputs: BTreeSet<MessageRef>,
}

/// An input of a present component that only an absent one would send.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MissingInput {
    pub receiver: String,
    pub port: String,
    pub message: String,
    pub sender: String,
}

/// Result of analysing a whole system.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AnalysisReport {
    pub components: IndexMap<String, ComponentReport>,
    /// P7 with provenance.
    pub missing_inputs: BTreeSet<MissingInput>,
}

impl AnalysisReport {
    /// P7 as bare message names.
    pub fn p7(&self) -> BTreeSet<String> {
        self.missing_inputs.iter().map(|m| m.message.clone()).collect()
    }

    pub fn component(&self, name: &str) -> Option<&ComponentReport> {
        self.components.get(name)
    }

    /// JSON form: one object per component plus the `P7` list.
    pub fn to_json(&self) -> Json {
        let mut top = Map::new();
        for (name, r) in &self.components {
            top.insert(name.clone(), r.to_json());
        }
        top.insert("P7".into(), json!(self.p7()));
        Json::Object(top)
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list = |s: &mut String, label: &str, items: Vec<String>| {
            if !items.is_empty() {
                s.push_str(&format!("  {label}: {}\n", items.join(", ")));
            }
        };
        for (name, r) in &self.components {
            let lvl = r.level.map(|l| l.to_string()).unwrap_or_default();
            out.push_str(&format!("{name} ({lvl})\n"));
            let ids = |s: &BTreeSet<StateId>| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
            list(&mut out, "P1 missing initial", ids(&r.p1));
            list(&mut out, "P2 empty composite", ids(&r.p2));
            list(&mut out, "P3 broken chain", ids(&r.p3));
            list(&mut out, "P4 deadlock", ids(&r.p4));
            list(
                &mut out,
                "P5 unexpected",
                r.p5
                    .iter()
                    .map(|(s, ms)| {
                        let m: Vec<_> = ms.iter().map(|m| m.message.clone()).collect();
                        format!("{s}{{{}}}", m.join(","))
                    })
                    .collect(),
            );
            list(&mut out, "P6 choice", ids(&r.p6));
            if r.p8 {
                out.push_str("  P8 partial\n");
            }
            list(&mut out, "P9 isolated", ids(&r.p9));
            list(&mut out, "P10 not takeable", r.p10.iter().map(|t| t.to_string()).collect());
            list(&mut out, "P11 basic", ids(&r.p11));
        }
        let p7: Vec<String> = self.p7().into_iter().collect();
        out.push_str(&format!("P7 missing inputs: {}\n", p7.join(", ")));
        out
    }
}

impl ComponentReport {
    pub fn to_json(&self) -> Json {
        let ids = |s: &BTreeSet<StateId>| json!(s.iter().map(|x| x.as_str()).collect::<Vec<_>>());
        let msgs = |s: &BTreeSet<MessageRef>| json!(s.iter().map(|m| m.to_string()).collect::<Vec<_>>());
        let mut p5 = Map::new();
        for (s, ms) in &self.p5 {
            p5.insert(s.to_string(), msgs(ms));
        }
        json!({
            "level": self.level,
            "P1": ids(&self.p1),
            "P2": ids(&self.p2),
            "P3": ids(&self.p3),
            "P4": ids(&self.p4),
            "P5": self.p5.keys().map(|s| s.as_str()).collect::<Vec<_>>(),
            "P5_unhandled": Json::Object(p5),
            "P6": ids(&self.p6),
            "P8": self.p8,
            "P9": ids(&self.p9),
            "P10": self.p10.iter().map(|t| t.as_str()).collect::<Vec<_>>(),
            "P11": ids(&self.p11),
            "inputs": msgs(&self.inputs),
            "outputs": msgs(&self.outputs),
        })
    }

    /// True when the report flags any execution blocker (P1 to P5).
    pub fn has_blocker(&self) -> bool {
        !(self.p1.is_empty()
            && self.p2.is_empty()
            && self.p3.is_empty()
            && self.p4.is_empty()
            && self.p5.is_empty())
    }
}

/// Computes the problematic sets of a state machine regardless of the
/// component's level. Decision points added by refinement are not counted
/// as isolated.
pub fn analyze_hsm(model: &SystemModel, comp: &Component, hsm: &Hsm) -> ComponentReport {
    let inputs = model.inp(comp);
    let mut r = ComponentReport {
        component: comp.name.clone(),
        level: Some(comp.level),
        inputs: inputs.clone(),
        outputs: model.outp(comp),
        p8: comp.level == Completeness::Partial,
        ..Default::default()
    };
    let mut has_in: BTreeSet<&str> = BTreeSet::new();
    let mut has_out: BTreeSet<&str> = BTreeSet::new();
    for t in hsm.transitions.values() {
        has_in.insert(t.des.as_str());
        has_out.insert(t.src.as_str());
    }
    let mut has_children: BTreeSet<&str> = BTreeSet::new();
    let mut has_initial: BTreeSet<&str> = BTreeSet::new();
    for s in hsm.states.values() {
        if let Some(p) = &s.parent {
            if !matches!(s.kind, StateKind::EntryPoint | StateKind::ExitPoint) {
                has_children.insert(p.as_str());
            }
            if s.kind == StateKind::Initial {
                has_initial.insert(p.as_str());
            }
        }
    }
    let root = hsm.root_id();
    for s in hsm.states.values() {
        let id = s.id.as_str();
        match s.kind {
            StateKind::Composite => {
                if !has_initial.contains(id) {
                    r.p1.insert(s.id.clone());
                }
                if !has_children.contains(id) {
                    r.p2.insert(s.id.clone());
                }
            }
            StateKind::Basic => {
                r.p11.insert(s.id.clone());
                let handled = hsm.handled(id).unwrap_or_default();
                if handled.is_empty() {
                    r.p4.insert(s.id.clone());
                }
                let missing: BTreeSet<MessageRef> = inputs.difference(&handled).cloned().collect();
                if !missing.is_empty() {
                    r.p5.insert(s.id.clone(), missing);
                }
            }
            StateKind::Choice => {
                r.p6.insert(s.id.clone());
            }
            StateKind::Initial | StateKind::Junction | StateKind::EntryPoint | StateKind::ExitPoint => {
                if !has_out.contains(id) {
                    r.p3.insert(s.id.clone());
                }
            }
        }
        let added_decision = s.kind == StateKind::Choice && id.starts_with(RESERVED_PREFIX);
        if s.id != *root && s.kind != StateKind::Initial && !added_decision && !has_in.contains(id) {
            r.p9.insert(s.id.clone());
        }
    }
    for t in hsm.transitions.values() {
        let src_kind = hsm.state(t.src.as_str()).map(|s| s.kind);
        if matches!(src_kind, Some(StateKind::Basic | StateKind::Composite)) && t.triggers.is_empty() {
            r.p10.insert(t.id.clone());
        }
    }
    r
}

/// Report of one component according to its level: complete components
/// report nothing, absent ones only their interface.
pub fn analyze_component(model: &SystemModel, comp: &Component) -> ComponentReport {
    match comp.level {
        Completeness::Partial => {
            let empty;
            let hsm = match &comp.behavior {
                Some(h) => h,
                None => {
                    empty = Hsm::empty(format!("{}SM", comp.name));
                    &empty
                }
            };
            analyze_hsm(model, comp, hsm)
        }
        level => ComponentReport {
            component: comp.name.clone(),
            level: Some(level),
            inputs: model.inp(comp),
            outputs: model.outp(comp),
            ..Default::default()
        },
    }
}

/// P7: inputs of present components connected to outputs of absent ones.
pub fn missing_inputs(model: &SystemModel) -> BTreeSet<MissingInput> {
    let mut out = BTreeSet::new();
    for c in &model.connectors {
        for (from, to) in [(&c.a, &c.b), (&c.b, &c.a)] {
            let (Some(sender), Some(receiver)) = (model.component(&from.component), model.component(&to.component))
            else {
                continue;
            };
            if sender.level != Completeness::Absent || receiver.level == Completeness::Absent {
                continue;
            }
            let (Some(sp), Some(rp)) = (sender.port(&from.port), receiver.port(&to.port)) else {
                continue;
            };
            let Some(iface) = model.interface(&sp.interface) else {
                continue;
            };
            for m in &iface.messages {
                if sp.direction_of(m) == Direction::Output && rp.direction_of(m) == Direction::Input {
                    out.insert(MissingInput {
                        receiver: receiver.name.clone(),
                        port: rp.name.clone(),
                        message: m.name.clone(),
                        sender: sender.name.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Analyses a system under a setting.
pub fn analyze(model: &SystemModel, setting: &Setting) -> Result<AnalysisReport, AnalysisError> {
    analyze_with(model, setting, ExecMode::Auto)
}

/// [`analyze`] with an explicit execution mode.
pub fn analyze_with(
    model: &SystemModel,
    setting: &Setting,
    mode: ExecMode,
) -> Result<AnalysisReport, AnalysisError> {
    let model = setting.apply(model)?;
    let reports = par::map(mode, &model.components, |c| analyze_component(&model, c));
    Ok(AnalysisReport {
        components: reports.into_iter().map(|r| (r.component.clone(), r)).collect(),
        missing_inputs: missing_inputs(&model),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setting_parses_and_rejects() {
        let s: Setting = "CTR=partial, UC=absent".parse().unwrap();
        assert_eq!(s.0["UC"], Completeness::Absent);
        assert!("CTR".parse::<Setting>().is_err());
        assert!("CTR=half".parse::<Setting>().is_err());
        assert!("A=partial,A=absent".parse::<Setting>().is_err());
    }
}
