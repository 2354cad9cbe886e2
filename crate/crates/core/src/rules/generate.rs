//! Default rules for every way into a decision point, with bodies narrowed
//! by heuristics over the problematic element sets.

use std::collections::BTreeSet;

use super::select::rule_state_name;
use super::{Alternative, Command, Rule, RuleSet, Selection, Where};
use crate::analysis::ComponentReport;
use crate::model::{Hsm, StateKind, Transition, DBG_MESSAGE};
use crate::refine::{option_reach, ComponentRefinement, Refined, DEC_PREFIX};
use crate::text::Expr;

struct Opt<'a> {
    t: &'a Transition,
    org: Option<&'a str>,
}

/// One rule per decision point, incoming transition and unhandled message
/// (or one condition-free rule for a transition without them). Rules are
/// numbered `r1, r2, ...` in component, nesting and document order.
pub fn generate_default_rules(refined: &Refined) -> RuleSet {
    let mut set = RuleSet::new("default", vec![]);
    let counts = state_name_counts(refined);
    for comp in &refined.model.components {
        let Some(meta) = refined.metadata.components.get(&comp.name) else {
            continue;
        };
        if comp.name == refined.metadata.dbg_agent {
            continue;
        }
        let Some(hsm) = &comp.behavior else { continue };
        let empty = ComponentReport::default();
        let report = refined.report.component(&comp.name).unwrap_or(&empty);
        for sc in hsm.composites_by_depth() {
            let Some(dec) = meta.dec_points.get(&sc) else { continue };
            let options: Vec<Opt> = hsm
                .out_t(dec.as_str())
                .map(|t| Opt {
                    t,
                    org: meta.original(t.id.as_str()),
                })
                .collect();
            let mut seen: BTreeSet<(String, Option<String>)> = BTreeSet::new();
            for t in hsm.in_t(dec.as_str()) {
                let src = &t.src;
                let kind = hsm.state(src.as_str()).map(|s| s.kind);
                if meta.is_added(src.as_str()) && matches!(kind, Some(StateKind::EntryPoint | StateKind::ExitPoint)) {
                    continue;
                }
                let label = hsm.label(src.as_str());
                let name = rule_state_name(src.as_str(), &label);
                let at = if counts.iter().filter(|n| **n == name).count() == 1 {
                    Where::State(name.clone())
                } else {
                    Where::Qualified(comp.name.clone(), name.clone())
                };
                let mut messages: Vec<Option<String>> = Vec::new();
                for m in &t.triggers {
                    if m.message != DBG_MESSAGE && !messages.contains(&Some(m.message.clone())) {
                        messages.push(Some(m.message.clone()));
                    }
                }
                if messages.is_empty() {
                    messages.push(None);
                }
                for m in messages {
                    if !seen.insert((src.to_string(), m.clone())) {
                        continue;
                    }
                    let chosen = rule_body_options(hsm, meta, report, t, m.as_deref(), &options);
                    let alts = render(hsm, &chosen);
                    set.push(Rule {
                        name: set.fresh_name(),
                        at: at.clone(),
                        when: m.map(Expr::Receipt),
                        body: vec![Command::Select(Selection::States(alts))],
                    });
                }
            }
        }
    }
    set
}

/// Names under which rules can refer to states, one entry per state.
fn state_name_counts(refined: &Refined) -> Vec<String> {
    refined
        .model
        .components
        .iter()
        .filter_map(|c| c.behavior.as_ref())
        .flat_map(|h| h.states.values().map(|s| rule_state_name(s.id.as_str(), &s.name)))
        .collect()
}

fn rule_body_options<'a>(
    hsm: &Hsm,
    meta: &ComponentRefinement,
    report: &ComponentReport,
    incoming: &Transition,
    message: Option<&str>,
    options: &'a [Opt<'a>],
) -> Vec<&'a Opt<'a>> {
    let src = incoming.src.as_str();
    let src_org = meta.original(src);
    let all: Vec<&Opt> = options.iter().collect();
    let ends_isolated = |o: &Opt| meta.original(o.t.des.as_str()).is_some_and(|d| report.p9.contains(d));
    let not_takeable = |o: &Opt| o.org.is_some_and(|t| report.p10.contains(t));
    let first_nonempty = |filters: &[&dyn Fn(&Opt) -> bool]| -> Vec<&'a Opt<'a>> {
        for f in filters {
            let v: Vec<&Opt> = all.iter().copied().filter(|o| f(o)).collect();
            if !v.is_empty() {
                return v;
            }
        }
        all.clone()
    };
    let chosen = if src_org.is_some_and(|s| report.p6.contains(s)) {
        // the user's own outgoing transitions already cover their targets
        let decided: BTreeSet<&str> = hsm
            .out_t(src)
            .filter(|t| !t.des.as_str().starts_with(DEC_PREFIX))
            .map(|t| t.des.as_str())
            .collect();
        all.iter().copied().filter(|o| !decided.contains(o.t.des.as_str())).collect()
    } else if message.is_some()
        && src_org.is_some_and(|s| {
            report
                .p5
                .get(s)
                .is_some_and(|ms| ms.iter().any(|m| Some(m.message.as_str()) == message))
        })
    {
        first_nonempty(&[&|o: &Opt| not_takeable(o) && ends_isolated(o), &not_takeable, &ends_isolated])
    } else if src_org.is_some_and(|s| report.p3.contains(s)) {
        first_nonempty(&[&ends_isolated])
    } else {
        all.clone()
    };
    if chosen.is_empty() {
        all
    } else {
        chosen
    }
}

/// Alternatives for options: the target, with `using` for user-defined
/// transitions, or for added boundary crossings the states reached beyond.
fn render(hsm: &Hsm, chosen: &[&Opt]) -> Vec<Alternative> {
    let mut out: Vec<Alternative> = Vec::new();
    for o in chosen {
        let alts: Vec<Alternative> = match o.org {
            Some(t) => vec![Alternative {
                state: rule_state_name(o.t.des.as_str(), &hsm.label(o.t.des.as_str())),
                using: Some(t.to_string()),
            }],
            None => option_reach(hsm, o.t.id.as_str())
                .iter()
                .map(|s| Alternative::new(rule_state_name(s.as_str(), &hsm.label(s.as_str()))))
                .collect(),
        };
        for a in alts {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Setting;
    use crate::refine::refine_model;
    use crate::text::parse_model;

    #[test]
    fn traffic_light_root_rules_pick_the_not_takeable_transition() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        let set = generate_default_rules(&r);
        let off: Vec<String> = set
            .rules
            .iter()
            .filter(|r| r.at == Where::State("off".into()))
            .map(|r| r.body[0].to_string())
            .collect();
        assert_eq!(off, vec!["select state off using t13"; 2]);
    }
}
