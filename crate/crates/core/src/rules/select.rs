//! Rule selection for a decision context, name resolution of `select`
//! alternatives, and conversion of recorded decisions into rules.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{Alternative, Command, Rule, RuleSet, Selection, Where};
use crate::model::Value;
use crate::runtime::{DecisionContext, DecisionOption};
use crate::text::{eval, Env, EvalCtx, Expr};

struct GuardCtx<'a> {
    env: &'a Env,
    last: Option<&'a str>,
}

impl EvalCtx for GuardCtx<'_> {
    fn var(&self, name: &str) -> Option<Value> {
        self.env.get(name).cloned()
    }
    fn receipt(&self, message: &str) -> Option<bool> {
        Some(self.last == Some(message))
    }
    fn random(&mut self, _bound: i64) -> i64 {
        0
    }
}

/// Evaluates a rule condition; evaluation errors count as false.
pub fn condition_holds(when: &Expr, env: &Env, last_message: Option<&str>) -> bool {
    let mut ctx = GuardCtx { env, last: last_message };
    matches!(eval(when, &mut ctx), Ok(Value::Bool(true)))
}

/// First applicable rule: exact `C.s`, then `*.s`, then `C`, then `*`; in
/// file order within each tier. `env` holds the component's variables.
pub fn select_rule<'r>(set: &'r RuleSet, ctx: &DecisionContext, env: &Env) -> Option<&'r Rule> {
    let names = [ctx.state().as_str(), ctx.state_label.as_str()];
    let last = ctx.last_message.as_ref().map(|m| m.message.as_str());
    for tier in set.candidates(&ctx.component, &names) {
        for i in tier {
            let r = &set.rules[i];
            if r.when.as_ref().is_none_or(|w| condition_holds(w, env, last)) {
                return Some(r);
            }
        }
    }
    None
}

/// Failure to map a `select` onto an option.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectError {
    #[error("no option leads to `{0}`")]
    NoSuchState(String),
    #[error("`{state}` is reachable through several options ({}); add `using` with one of them", .transitions.join(", "))]
    Ambiguous { state: String, transitions: Vec<String> },
    #[error("transition `{transition}` is not an option leading to `{state}`")]
    NoSuchTransition { state: String, transition: String },
    #[error("option {0} does not exist")]
    NoSuchOption(usize),
    #[error("there are no options")]
    NoOptions,
}

/// An option chosen for a `select` alternative. `steer` names the state to
/// aim for at the next decision point when the option only leads towards it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub index: usize,
    pub steer: Option<String>,
}

fn names_state(o: &DecisionOption, name: &str) -> bool {
    o.target.as_str() == name || o.target_label == name
}

fn reaches_state(o: &DecisionOption, name: &str) -> bool {
    o.reach.iter().any(|s| s.as_str() == name) || o.labels.iter().any(|l| l == name)
}

/// Resolves one alternative. A unique option into the state wins; among
/// several, a unique refinement-added one wins unless `using` names a
/// transition. Otherwise an option leading towards the state is chosen and
/// the state becomes a steering target.
pub fn resolve_alternative(ctx: &DecisionContext, alt: &Alternative) -> Result<Resolution, SelectError> {
    let name = alt.state.as_str();
    if let Some(t) = &alt.using {
        let o = ctx
            .options
            .iter()
            .find(|o| &o.transition == t || o.org.as_ref() == Some(t))
            .filter(|o| names_state(o, name) || reaches_state(o, name))
            .ok_or_else(|| SelectError::NoSuchTransition {
                state: name.to_string(),
                transition: t.clone(),
            })?;
        let steer = (!names_state(o, name)).then(|| name.to_string());
        return Ok(Resolution { index: o.index, steer });
    }
    let direct: Vec<&DecisionOption> = ctx.options.iter().filter(|o| names_state(o, name)).collect();
    match direct.len() {
        1 => {
            return Ok(Resolution {
                index: direct[0].index,
                steer: None,
            })
        }
        0 => {}
        _ => {
            let added: Vec<&&DecisionOption> = direct.iter().filter(|o| o.org.is_none()).collect();
            if added.len() == 1 {
                return Ok(Resolution {
                    index: added[0].index,
                    steer: None,
                });
            }
            return Err(SelectError::Ambiguous {
                state: name.to_string(),
                transitions: direct.iter().map(|o| o.transition.clone()).collect(),
            });
        }
    }
    let indirect: Vec<&DecisionOption> = ctx.options.iter().filter(|o| reaches_state(o, name)).collect();
    match indirect.len() {
        0 => Err(SelectError::NoSuchState(name.to_string())),
        1 => Ok(Resolution {
            index: indirect[0].index,
            steer: Some(name.to_string()),
        }),
        _ => Err(SelectError::Ambiguous {
            state: name.to_string(),
            transitions: indirect.iter().map(|o| o.transition.clone()).collect(),
        }),
    }
}

/// Resolves every alternative of a selection. `draw(n)` picks in `0..n`
/// for `select state random`.
pub fn resolve_selection(
    ctx: &DecisionContext,
    sel: &Selection,
    draw: &mut dyn FnMut(usize) -> usize,
) -> Result<Vec<Resolution>, SelectError> {
    if ctx.options.is_empty() {
        return Err(SelectError::NoOptions);
    }
    match sel {
        Selection::Random => {
            let k = draw(ctx.options.len());
            Ok(vec![Resolution {
                index: ctx.options[k.min(ctx.options.len() - 1)].index,
                steer: None,
            }])
        }
        Selection::Index(k) => ctx
            .option(*k)
            .map(|o| {
                vec![Resolution {
                    index: o.index,
                    steer: None,
                }]
            })
            .ok_or(SelectError::NoSuchOption(*k)),
        Selection::States(alts) => {
            let mut out: Vec<Resolution> = Vec::new();
            for a in alts {
                let r = resolve_alternative(ctx, a)?;
                if !out.iter().any(|o| o.index == r.index && o.steer == r.steer) {
                    out.push(r);
                }
            }
            Ok(out)
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut ch = s.chars();
    ch.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && ch.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Name under which rules refer to a state: its display name when that is a
/// plain identifier, else its id.
pub fn rule_state_name(id: &str, label: &str) -> String {
    if is_ident(label) {
        label.to_string()
    } else {
        id.to_string()
    }
}

/// Alternative that resolves back to option `index` of `ctx`.
pub fn alternative_for(ctx: &DecisionContext, index: usize) -> Option<Alternative> {
    let o = ctx.option(index)?;
    let plain = Alternative::new(rule_state_name(o.target.as_str(), &o.target_label));
    if resolve_alternative(ctx, &plain).is_ok_and(|r| r.index == index && r.steer.is_none()) {
        return Some(plain);
    }
    Some(Alternative {
        using: Some(o.transition.clone()),
        ..plain
    })
}

/// A decision taken at a decision point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionRecord {
    pub id: usize,
    pub context: DecisionContext,
    /// Commands issued while the decision was pending.
    #[serde(serialize_with = "commands_as_text")]
    pub commands: Vec<Command>,
    /// Option index taken.
    pub decision: usize,
    /// The alternative that expresses the decision.
    #[serde(serialize_with = "display")]
    pub alternative: Alternative,
}

fn commands_as_text<S: serde::Serializer>(c: &[Command], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(c.iter().map(|c| c.to_string()))
}

fn display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Rules built from records, with the contexts whose decisions conflicted.
#[derive(Debug, Clone, PartialEq)]
pub struct SaveOutcome {
    pub rules: RuleSet,
    pub conflicts: Vec<String>,
}

/// One rule per distinct (component, state, last message) context. When
/// decisions for the same context differ, the latest one is kept and the
/// conflict reported.
pub fn save_decisions_as_rules(records: &[&ExecutionRecord]) -> SaveOutcome {
    let mut by_ctx: BTreeMap<(String, String, Option<String>), usize> = BTreeMap::new();
    let mut rules: Vec<(Rule, Alternative)> = Vec::new();
    let mut conflicts = Vec::new();
    for rec in records {
        let ctx = &rec.context;
        let state = rule_state_name(ctx.state().as_str(), &ctx.state_label);
        let last = ctx.last_message.as_ref().map(|m| m.message.clone());
        let key = (ctx.component.clone(), state.clone(), last.clone());
        let mut body: Vec<Command> = rec.commands.iter().filter(|c| c.modifies_state()).cloned().collect();
        body.push(Command::Select(Selection::States(vec![rec.alternative.clone()])));
        match by_ctx.get(&key) {
            Some(&i) => {
                if rules[i].1 != rec.alternative {
                    conflicts.push(format!(
                        "{}.{} on {}: `{}` replaced by `{}` (record {})",
                        key.0,
                        key.1,
                        key.2.as_deref().unwrap_or("start"),
                        rules[i].1,
                        rec.alternative,
                        rec.id
                    ));
                }
                rules[i].0.body = body;
                rules[i].1 = rec.alternative.clone();
            }
            None => {
                by_ctx.insert(key, rules.len());
                rules.push((
                    Rule {
                        name: format!("r{}", rules.len() + 1),
                        at: Where::Qualified(ctx.component.clone(), state),
                        when: last.map(Expr::Receipt),
                        body,
                    },
                    rec.alternative.clone(),
                ));
            }
        }
    }
    SaveOutcome {
        rules: RuleSet::new("saved", rules.into_iter().map(|(r, _)| r).collect()),
        conflicts,
    }
}
