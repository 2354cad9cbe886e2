//! Writing a single-choice rule back into the design model as a transition.

use super::{Command, Rule, Selection, Where};
use crate::analysis::analyze_component;
use crate::model::{
    validate, Hsm, MessageRef, State, StateId, StateKind, SystemModel, Transition,
    TransitionId, Violation,
};
use crate::refine::negated_disjunction_guard;
use crate::text::{ActionBlock, BinOp, Expr, Stmt};

/// Reasons a rule cannot be applied to a model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApplyError {
    #[error("rule `{0}` selects more than one state; applying it would make the model non-deterministic")]
    MultiStateSelection(String),
    #[error("rule `{0}` does not name a concrete state in its where clause")]
    NonConcreteWhere(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{component}` has no state `{state}`")]
    UnknownState { component: String, state: String },
    #[error("state `{0}` exists in several components; qualify the where clause")]
    AmbiguousState(String),
    #[error("cannot express `{0}` in the model")]
    Unsupported(String),
    #[error("the changed model is not well-formed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    WouldViolateWellFormedness(Vec<Violation>),
}

fn find<'h>(hsm: &'h Hsm, name: &str) -> Option<&'h State> {
    hsm.state(name).or_else(|| hsm.find_state(name))
}

fn locate(model: &SystemModel, rule: &Rule, hint: Option<&str>) -> Result<(String, String), ApplyError> {
    match &rule.at {
        Where::Qualified(c, s) => Ok((c.clone(), s.clone())),
        Where::State(s) => {
            if let Some(c) = hint {
                return Ok((c.to_string(), s.clone()));
            }
            let owners: Vec<&str> = model
                .components
                .iter()
                .filter(|c| c.behavior.as_ref().is_some_and(|h| find(h, s).is_some()))
                .map(|c| c.name.as_str())
                .collect();
            match owners.as_slice() {
                [c] => Ok((c.to_string(), s.clone())),
                [] => Err(ApplyError::UnknownState {
                    component: "*".into(),
                    state: s.clone(),
                }),
                _ => Err(ApplyError::AmbiguousState(s.clone())),
            }
        }
        _ => Err(ApplyError::NonConcreteWhere(rule.name.clone())),
    }
}

fn split_condition(when: Option<&Expr>) -> Result<(Vec<String>, Vec<Expr>), ApplyError> {
    let mut receipts = Vec::new();
    let mut rest = Vec::new();
    if let Some(w) = when {
        for c in w.conjuncts() {
            match c {
                Expr::Receipt(m) => receipts.push(m.clone()),
                e if contains_receipt(e) => return Err(ApplyError::Unsupported(e.to_string())),
                e => rest.push(e.clone()),
            }
        }
    }
    Ok((receipts, rest))
}

fn contains_receipt(e: &Expr) -> bool {
    match e {
        Expr::Receipt(_) => true,
        Expr::Unary(_, a) => contains_receipt(a),
        Expr::Binary(_, a, b) => contains_receipt(a) || contains_receipt(b),
        Expr::Random(Some(a)) => contains_receipt(a),
        _ => false,
    }
}

/// Statements of the rule body before its `select`, as model actions.
fn body_statements(model: &SystemModel, component: &str, rule: &Rule) -> Result<Vec<Stmt>, ApplyError> {
    let comp = model
        .component(component)
        .ok_or_else(|| ApplyError::UnknownComponent(component.into()))?;
    let mut out = Vec::new();
    for c in rule.prelude() {
        out.push(match c {
            Command::Assign(v, e) => Stmt::Assign(v.clone(), e.clone()),
            Command::Log(e) => Stmt::Log(e.clone()),
            Command::Send { port, message, args } => {
                let port = match port {
                    Some(p) => p.clone(),
                    None => {
                        let ports: Vec<&str> = model
                            .outp(comp)
                            .into_iter()
                            .filter(|m| &m.message == message)
                            .map(|m| comp.port(&m.port).map(|p| p.name.as_str()).unwrap_or(""))
                            .collect();
                        match ports.as_slice() {
                            [p] => p.to_string(),
                            _ => return Err(ApplyError::Unsupported(c.to_string())),
                        }
                    }
                };
                Stmt::Send {
                    port,
                    message: message.clone(),
                    args: args.clone(),
                }
            }
            Command::Reply {
                message: Some(m),
                args,
            } => Stmt::Reply {
                message: m.clone(),
                args: args.clone(),
            },
            other => return Err(ApplyError::Unsupported(other.to_string())),
        });
    }
    Ok(out)
}

fn fresh_transition(hsm: &Hsm) -> String {
    let n = (1..)
        .find(|n| !hsm.contains_element(&format!("t{n}")))
        .expect("unbounded search");
    format!("t{n}")
}

fn boundary(hsm: &mut Hsm, composite: &StateId, kind: StateKind) -> StateId {
    let suffix = if kind == StateKind::EntryPoint { "en" } else { "ex" };
    let id = hsm.fresh_id(&format!("{composite}_{suffix}"));
    hsm.add_state(State::new(id, kind, Some(composite.clone())))
}

/// Adds a path `src -> des`, leaving and entering composites through new
/// exit and entry points as needed. Returns the first leg.
fn add_path(hsm: &mut Hsm, src: &StateId, des: &StateId) -> Result<TransitionId, ApplyError> {
    let up_of = |h: &Hsm, s: &StateId| -> Vec<StateId> {
        let mut v = Vec::new();
        let mut cur = h.state(s.as_str()).and_then(|x| x.parent.clone());
        while let Some(p) = cur {
            cur = h.state(p.as_str()).and_then(|x| x.parent.clone());
            v.push(p);
        }
        v
    };
    let src_up = up_of(hsm, src);
    let des_up = up_of(hsm, des);
    let leave: Vec<StateId> = src_up.iter().take_while(|c| !des_up.contains(c)).cloned().collect();
    let mut enter: Vec<StateId> = des_up.iter().take_while(|c| !src_up.contains(c)).cloned().collect();
    enter.reverse();
    let mut points = Vec::new();
    for c in &leave {
        points.push(boundary(hsm, c, StateKind::ExitPoint));
    }
    for c in &enter {
        points.push(boundary(hsm, c, StateKind::EntryPoint));
    }
    points.push(des.clone());
    let mut from = src.clone();
    let mut first = None;
    for to in points {
        let id = fresh_transition(hsm);
        let id = hsm.add_transition(Transition::new(id, &from, &to));
        first.get_or_insert(id);
        from = to;
    }
    first.ok_or_else(|| ApplyError::Unsupported("empty path".into()))
}

/// Fixes the partiality a single-choice rule answers: a trigger-less
/// transition named by `using` gains the rule's triggers; otherwise a new
/// transition from the rule's state to the selected one is added. The rule
/// body becomes the transition's leading statements, `receipt` terms its
/// triggers and the remaining condition its guard.
///
/// `component_hint` resolves a `*.s` where clause; without it the state must
/// exist in exactly one component.
pub fn apply_rule_to_model(
    model: &SystemModel,
    rule: &Rule,
    component_hint: Option<&str>,
) -> Result<SystemModel, ApplyError> {
    let alt = match rule.selection() {
        Some(Selection::States(alts)) if alts.len() == 1 => alts[0].clone(),
        _ => return Err(ApplyError::MultiStateSelection(rule.name.clone())),
    };
    let (component, state) = locate(model, rule, component_hint)?;
    let comp = model
        .component(&component)
        .ok_or_else(|| ApplyError::UnknownComponent(component.clone()))?;
    let hsm = comp.behavior.as_ref().ok_or_else(|| ApplyError::UnknownState {
        component: component.clone(),
        state: state.clone(),
    })?;
    let unknown = |s: &str| ApplyError::UnknownState {
        component: component.clone(),
        state: s.to_string(),
    };
    let src = find(hsm, &state).ok_or_else(|| unknown(&state))?.id.clone();
    let des = find(hsm, &alt.state).ok_or_else(|| unknown(&alt.state))?.id.clone();
    let report = analyze_component(model, comp);

    let (receipts, rest) = split_condition(rule.when.as_ref())?;
    let inputs = model.inp(comp);
    let mut triggers: Vec<MessageRef> = Vec::new();
    for m in &receipts {
        let found: Vec<&MessageRef> = inputs.iter().filter(|i| &i.message == m).collect();
        if found.is_empty() {
            return Err(ApplyError::Unsupported(format!("receipt({m}): not an input of {component}")));
        }
        triggers.extend(found.into_iter().cloned());
    }
    let stmts = body_statements(model, &component, rule)?;

    let mut out = model.clone();
    let h = out
        .component_mut(&component)
        .and_then(|c| c.behavior.as_mut())
        .expect("component checked above");
    let reuse = alt
        .using
        .as_ref()
        .filter(|t| report.p10.contains(t.as_str()) && h.transition(t).is_some_and(|t| t.des == des));
    let leg = match reuse {
        Some(t) => TransitionId::new(t.clone()),
        None => add_path(h, &src, &des)?,
    };
    let mut guard = Expr::all(rest);
    if report.p6.contains(&src) {
        // only the transitions that existed before this rule count
        let mut before = h.clone();
        before.transitions.shift_remove(leg.as_str());
        guard = Expr::bin(BinOp::And, guard, negated_disjunction_guard(src.as_str(), &before));
    }
    let t = &mut h.transitions[leg.as_str()];
    for m in triggers {
        if !t.triggers.contains(&m) {
            t.triggers.push(m);
        }
    }
    let guard = simplify_true(guard);
    t.guard = match (t.guard.take(), guard) {
        (g, None) => g,
        (None, g) => g,
        (Some(a), Some(b)) => Some(Expr::bin(BinOp::And, a, b)),
    };
    if !stmts.is_empty() {
        let mut all = stmts;
        if let Some(a) = t.action.take() {
            all.extend(a.stmts);
        }
        t.action = Some(ActionBlock::new(all));
    }
    validate(&out).map_err(ApplyError::WouldViolateWellFormedness)?;
    Ok(out)
}

fn simplify_true(e: Expr) -> Option<Expr> {
    let parts: Vec<Expr> = e
        .conjuncts()
        .into_iter()
        .filter(|c| **c != Expr::Bool(true))
        .cloned()
        .collect();
    (!parts.is_empty()).then(|| Expr::all(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::parse_rules;
    use crate::text::parse_model;

    #[test]
    fn not_takeable_transition_gains_trigger() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let set = parse_rules("rule r1 where state off when receipt(timeout) { select state off using t13 }").unwrap();
        let out = apply_rule_to_model(&m, &set.rules[0], None).unwrap();
        let ctr = out.component("CTR").unwrap();
        let t13 = ctr.behavior.as_ref().unwrap().transition("t13").unwrap();
        assert_eq!(t13.triggers.len(), 1);
        assert_eq!(t13.triggers[0].message, "timeout");
        assert!(!analyze_component(&out, ctr).p10.contains("t13"));
    }

    #[test]
    fn multi_state_selection_is_rejected() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let set =
            parse_rules("rule r6 where state green receipt(off) { select state red|green|yellow|off }").unwrap();
        assert_eq!(
            apply_rule_to_model(&m, &set.rules[0], None),
            Err(ApplyError::MultiStateSelection("r6".into()))
        );
    }

    #[test]
    fn new_transition_within_a_region() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let set = parse_rules("rule r where state yellow when receipt(timeout) { select state red }").unwrap();
        let out = apply_rule_to_model(&m, &set.rules[0], None).unwrap();
        let h = out.component("CTR").unwrap().behavior.as_ref().unwrap();
        let added: Vec<&Transition> = h.transitions.values().filter(|t| t.src.as_str() == "s23").collect();
        assert_eq!(added.len(), 1);
        assert_eq!(added[0].des.as_str(), "s21");
    }
}
