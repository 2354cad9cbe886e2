//! A deliberately plain stepper for one state machine, written separately
//! from the runtime so the two can be compared.

use std::collections::BTreeMap;

use crate::model::{Component, Direction, Hsm, MessageRef, StateKind, SystemModel, Transition, Value};
use crate::text::{eval_guard, exec_actions, ActionBlock, ActionHost, Env, Payload};

/// State, variables and last visited child per composite.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cfg {
    pub state: String,
    pub env: Env,
    pub history: BTreeMap<String, String>,
}

/// Result of one attempted step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    Step {
        rule: u8,
        to: Cfg,
        transition: Option<String>,
        labels: Vec<String>,
        emissions: Vec<String>,
        consumed: bool,
        probe: bool,
    },
    /// A basic state without a message to process.
    Wait,
    /// The message was not accepted and discarded.
    Drop,
    Stuck { rule: u8, reason: String },
}

struct Recorder<'a> {
    model: &'a SystemModel,
    comp: &'a Component,
    reply_port: Option<String>,
    out: Vec<String>,
    probe: bool,
    draw: &'a mut dyn FnMut(i64) -> i64,
}

impl Recorder<'_> {
    fn push(&mut self, port: &str, message: &str, args: Vec<Value>) -> Result<(), String> {
        let Some((decl, dir)) = self.model.port_message(self.comp, port, message) else {
            return Err(format!("no message {port}.{message}"));
        };
        if dir != Direction::Output || decl.params.len() != args.len() {
            return Err(format!("cannot send {port}.{message}"));
        }
        let a: Vec<String> = args.iter().map(|v| v.to_string()).collect();
        self.out.push(format!("{port}.{message}({})", a.join(", ")));
        Ok(())
    }
}

impl ActionHost for Recorder<'_> {
    fn send(&mut self, port: &str, message: &str, args: Vec<Value>) -> Result<(), String> {
        self.push(port, message, args)
    }
    fn reply(&mut self, message: &str, args: Vec<Value>) -> Result<(), String> {
        let p = self.reply_port.clone().ok_or("nothing to reply to")?;
        self.push(&p, message, args)
    }
    fn probe(&mut self) {
        self.probe = true;
    }
    fn random(&mut self, bound: i64) -> i64 {
        (self.draw)(bound)
    }
}

/// Steps one component's state machine.
pub struct NaiveStepper<'a> {
    pub model: &'a SystemModel,
    pub comp: &'a Component,
    pub hsm: &'a Hsm,
    pub drop_unexpected: bool,
}

impl<'a> NaiveStepper<'a> {
    pub fn new(model: &'a SystemModel, comp: &'a Component, drop_unexpected: bool) -> Option<Self> {
        Some(NaiveStepper {
            model,
            comp,
            hsm: comp.behavior.as_ref()?,
            drop_unexpected,
        })
    }

    /// Initial configuration, if the root has an initial state.
    pub fn initial(&self) -> Option<Cfg> {
        let root = self.hsm.states.values().find(|s| s.parent.is_none())?;
        let init = self.children(&root.id.0).into_iter().find(|c| self.kind(c) == StateKind::Initial)?;
        Some(Cfg {
            state: init,
            env: self.comp.vars.iter().map(|v| (v.name.clone(), v.initial_value())).collect(),
            history: BTreeMap::new(),
        })
    }

    pub fn kind(&self, id: &str) -> StateKind {
        self.hsm.states.get(id).map(|s| s.kind).unwrap_or(StateKind::Basic)
    }

    fn parent(&self, id: &str) -> Option<String> {
        self.hsm.states.get(id).and_then(|s| s.parent.as_ref()).map(|p| p.0.clone())
    }

    fn children(&self, id: &str) -> Vec<String> {
        self.hsm
            .states
            .values()
            .filter(|s| s.parent.as_ref().is_some_and(|p| p.0 == id))
            .map(|s| s.id.0.clone())
            .collect()
    }

    fn outs(&self, id: &str) -> Vec<&'a Transition> {
        self.hsm.transitions.values().filter(|t| t.src.0 == id).collect()
    }

    /// The state itself followed by its ancestors.
    fn upwards(&self, id: &str) -> Vec<String> {
        let mut v = vec![id.to_string()];
        while let Some(p) = self.parent(v.last().expect("non-empty")) {
            v.push(p);
        }
        v
    }

    /// Attempts one step. `message` is the head of the queue, if any.
    pub fn step(
        &self,
        cfg: &Cfg,
        message: Option<(&MessageRef, &Payload)>,
        reply_port: Option<&str>,
        draw: &mut dyn FnMut(i64) -> i64,
    ) -> Result<Move, String> {
        let mut env = cfg.env.clone();
        let mut labels = Vec::new();
        let mut rec = Recorder {
            model: self.model,
            comp: self.comp,
            reply_port: reply_port.map(str::to_string),
            out: Vec::new(),
            probe: false,
            draw,
        };
        let mut run = |block: &Option<ActionBlock>, label: String, payload: Option<&Payload>, rec: &mut Recorder| {
            if let Some(b) = block {
                env = exec_actions(&env, b, payload, rec).map_err(|e| format!("{label}: {e}"))?;
                labels.push(label);
            }
            Ok::<(), String>(())
        };
        let here = cfg.state.as_str();
        let (rule, transition, des, consumed) = match self.kind(here) {
            StateKind::Choice => {
                let mut taken = None;
                for t in self.outs(here) {
                    let holds = match &t.guard {
                        Some(g) => eval_guard(g, &cfg.env).map_err(|e| format!("guard of {}: {e}", t.id))?,
                        None => true,
                    };
                    if holds {
                        taken = Some(t);
                        break;
                    }
                }
                let Some(t) = taken else {
                    return Ok(Move::Stuck {
                        rule: 9,
                        reason: "non-exhaustive guards".into(),
                    });
                };
                run(&t.action, format!("act:{}", t.id), None, &mut rec)?;
                (8, Some(t.id.0.clone()), t.des.0.clone(), false)
            }
            StateKind::Initial | StateKind::Junction | StateKind::EntryPoint | StateKind::ExitPoint => {
                let Some(t) = self.outs(here).into_iter().next() else {
                    return Ok(Move::Stuck {
                        rule: 2,
                        reason: "broken chain".into(),
                    });
                };
                run(&t.action, format!("act:{}", t.id), None, &mut rec)?;
                (1, Some(t.id.0.clone()), t.des.0.clone(), false)
            }
            StateKind::Composite => {
                let kids = self.children(here);
                let next = cfg
                    .history
                    .get(here)
                    .cloned()
                    .or_else(|| kids.iter().find(|c| self.kind(c) == StateKind::Initial).cloned());
                let Some(child) = next else {
                    let reason = if kids.is_empty() {
                        "composite without children"
                    } else {
                        "composite without initial state"
                    };
                    return Ok(Move::Stuck {
                        rule: 7,
                        reason: reason.into(),
                    });
                };
                let entry = self.hsm.states[child.as_str()].entry.clone();
                run(&entry, format!("entry:{child}"), None, &mut rec)?;
                (6, None, child, false)
            }
            StateKind::Basic => {
                let levels = self.upwards(here);
                let handles_any = levels
                    .iter()
                    .any(|l| self.outs(l).iter().any(|t| !t.triggers.is_empty()));
                if !handles_any {
                    return Ok(Move::Stuck {
                        rule: 3,
                        reason: "deadlock".into(),
                    });
                }
                let Some((m, payload)) = message else {
                    return Ok(Move::Wait);
                };
                let mut found = None;
                'search: for l in &levels {
                    for t in self.outs(l) {
                        if t.triggers.iter().any(|x| x == m) {
                            found = Some(t);
                            break 'search;
                        }
                    }
                }
                let Some(t) = found else {
                    if self.drop_unexpected {
                        return Ok(Move::Drop);
                    }
                    return Ok(Move::Stuck {
                        rule: 5,
                        reason: format!("unexpected message {m}"),
                    });
                };
                rec.reply_port = Some(m.port.clone());
                for l in &levels {
                    let exit = self.hsm.states[l.as_str()].exit.clone();
                    run(&exit, format!("exit:{l}"), None, &mut rec)?;
                    if *l == t.src.0 {
                        break;
                    }
                }
                run(&t.action, format!("act:{}", t.id), Some(payload), &mut rec)?;
                (4, Some(t.id.0.clone()), t.des.0.clone(), true)
            }
        };
        if rule != 6 {
            let entry = self
                .hsm
                .states
                .get(des.as_str())
                .ok_or_else(|| format!("unknown state {des}"))?
                .entry
                .clone();
            run(&entry, format!("entry:{des}"), None, &mut rec)?;
        }
        let mut history = cfg.history.clone();
        if self.kind(&des) == StateKind::Basic {
            if let Some(p) = self.parent(&des) {
                history.insert(p, des.clone());
            }
        }
        Ok(Move::Step {
            rule,
            to: Cfg {
                state: des,
                env,
                history,
            },
            transition,
            labels,
            emissions: rec.out,
            consumed,
            probe: rec.probe,
        })
    }
}
