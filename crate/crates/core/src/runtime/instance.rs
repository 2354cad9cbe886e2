//! Stepping of a single component instance under the execution rules.

use std::collections::VecDeque;

use serde::Serialize;

use crate::model::{Component, Direction, History, Hsm, MessageRef, StateId, StateKind, SystemModel, Value};
use crate::text::{exec_actions, eval_guard, ActionBlock, ActionHost, Env, ExecError, Payload};

/// Runtime triple of current state, variables and history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Configuration {
    pub sigma: StateId,
    pub env: Env,
    pub history: History,
}

/// A message waiting in, or taken from, an instance queue. `msg.port` is the
/// receiving port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub msg: MessageRef,
    pub payload: Payload,
}

impl Message {
    pub fn new(msg: MessageRef) -> Self {
        Message {
            msg,
            payload: Payload::new(),
        }
    }
}

/// A `send` or `reply` performed while executing actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Emission {
    pub port: String,
    pub message: String,
    pub args: Vec<Value>,
}

impl std::fmt::Display for Emission {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        write!(f, "{}.{}({})", self.port, self.message, args.join(", "))
    }
}

/// Why an instance cannot move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum StuckReason {
    MissingInitialState,
    BrokenChain,
    Deadlock,
    UnexpectedMessage(MessageRef),
    NoChild,
    NoInitial,
    NonExhaustiveGuards,
}

impl StuckReason {
    /// Number of the execution rule that reports this condition.
    pub fn rule(&self) -> u8 {
        match self {
            StuckReason::MissingInitialState => 0,
            StuckReason::BrokenChain => 2,
            StuckReason::Deadlock => 3,
            StuckReason::UnexpectedMessage(_) => 5,
            StuckReason::NoChild | StuckReason::NoInitial => 7,
            StuckReason::NonExhaustiveGuards => 9,
        }
    }
}

impl std::fmt::Display for StuckReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StuckReason::MissingInitialState => write!(f, "missing initial state"),
            StuckReason::BrokenChain => write!(f, "broken chain"),
            StuckReason::Deadlock => write!(f, "deadlock"),
            StuckReason::UnexpectedMessage(m) => write!(f, "unexpected message {m}"),
            StuckReason::NoChild => write!(f, "composite without children"),
            StuckReason::NoInitial => write!(f, "composite without initial state"),
            StuckReason::NonExhaustiveGuards => write!(f, "non-exhaustive guards"),
        }
    }
}

/// What to do with a message no transition accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum UnexpectedPolicy {
    #[default]
    Stuck,
    Drop,
}

impl std::str::FromStr for UnexpectedPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stuck" => Ok(UnexpectedPolicy::Stuck),
            "drop" => Ok(UnexpectedPolicy::Drop),
            other => Err(format!("unknown policy `{other}`, expected stuck or drop")),
        }
    }
}

/// One execution step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub rule: u8,
    pub from: Configuration,
    pub to: Configuration,
    pub transition: Option<String>,
    pub consumed: Option<Message>,
    pub actions: Vec<String>,
    pub emissions: Vec<Emission>,
    pub logs: Vec<String>,
    /// The executed actions requested a decision.
    pub probe: bool,
}

/// Result of attempting one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Step(Box<Step>),
    Stuck(StuckReason),
    /// A basic state with an empty queue.
    NeedsMessage,
    /// The head message was unexpected and discarded.
    Dropped(Message),
}

/// Instance life cycle as seen by the controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Status {
    /// Can step without a message.
    Ready,
    /// At a basic state, waiting for a message.
    Idle,
    /// At a decision point, waiting for a selection.
    Awaiting,
    Stuck(StuckReason),
    Failed(String),
}

/// Per-component runtime state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub component: String,
    pub config: Configuration,
    pub queue: VecDeque<Message>,
    pub status: Status,
    pub last_message: Option<MessageRef>,
    /// Distinct basic states in order of first visit.
    pub visited: Vec<StateId>,
}

/// Failures raised by actions; they halt the owning instance.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ActionError {
    #[error("in {element}: {source}")]
    Exec { element: String, source: ExecError },
    #[error("in guard of {transition}: {message}")]
    Guard { transition: String, message: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
}

/// Draws random numbers for `random()`.
pub type Rng<'a> = &'a mut dyn FnMut(i64) -> i64;

/// Default environment of a component.
pub fn initial_env(comp: &Component) -> Env {
    comp.vars
        .iter()
        .map(|v| (v.name.clone(), v.initial_value()))
        .collect()
}

/// Initial configuration: the initial state directly below the root.
pub fn init_configuration(comp: &Component, hsm: &Hsm) -> Result<Configuration, StuckReason> {
    let init = hsm
        .initial_child(hsm.root_id().as_str())
        .ok_or(StuckReason::MissingInitialState)?;
    Ok(Configuration {
        sigma: init.id.clone(),
        env: initial_env(comp),
        history: History::new(),
    })
}

impl Instance {
    /// Instance in its initial configuration, or stuck if the machine has
    /// no initial state.
    pub fn new(comp: &Component) -> Self {
        let fallback = Configuration {
            sigma: StateId::new(""),
            env: initial_env(comp),
            history: History::new(),
        };
        let (config, status) = match comp.behavior.as_ref().map(|h| init_configuration(comp, h)) {
            Some(Ok(c)) => (c, Status::Ready),
            Some(Err(r)) => (fallback, Status::Stuck(r)),
            None => (fallback, Status::Stuck(StuckReason::MissingInitialState)),
        };
        Instance {
            component: comp.name.clone(),
            config,
            queue: VecDeque::new(),
            status,
            last_message: None,
            visited: Vec::new(),
        }
    }
}

struct Host<'a, 'r> {
    model: &'a SystemModel,
    comp: &'a Component,
    reply_port: Option<String>,
    emissions: Vec<Emission>,
    logs: Vec<String>,
    probe: bool,
    rng: Rng<'r>,
}

impl Host<'_, '_> {
    fn emit(&mut self, port: &str, message: &str, args: Vec<Value>) -> Result<(), String> {
        match self.model.port_message(self.comp, port, message) {
            Some((decl, Direction::Output)) => {
                if decl.params.len() != args.len() {
                    return Err(format!(
                        "{port}.{message} expects {} arguments, got {}",
                        decl.params.len(),
                        args.len()
                    ));
                }
                self.emissions.push(Emission {
                    port: port.to_string(),
                    message: message.to_string(),
                    args,
                });
                Ok(())
            }
            Some(_) => Err(format!("{port}.{message} is not an output")),
            None => Err(format!("no message {port}.{message}")),
        }
    }
}

impl ActionHost for Host<'_, '_> {
    fn send(&mut self, port: &str, message: &str, args: Vec<Value>) -> Result<(), String> {
        self.emit(port, message, args)
    }
    fn reply(&mut self, message: &str, args: Vec<Value>) -> Result<(), String> {
        let port = self.reply_port.clone().ok_or("no message to reply to")?;
        self.emit(&port, message, args)
    }
    fn log(&mut self, value: &Value) {
        self.logs.push(match value {
            Value::Str(s) => s.clone(),
            v => v.to_string(),
        });
    }
    fn probe(&mut self) {
        self.probe = true;
    }
    fn random(&mut self, bound: i64) -> i64 {
        (self.rng)(bound)
    }
}

/// Steps one component. Borrowed view of the model plus the component's
/// state machine.
pub struct Stepper<'a> {
    pub model: &'a SystemModel,
    pub comp: &'a Component,
    pub hsm: &'a Hsm,
    pub policy: UnexpectedPolicy,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a SystemModel, comp: &'a Component, policy: UnexpectedPolicy) -> Option<Self> {
        Some(Stepper {
            model,
            comp,
            hsm: comp.behavior.as_ref()?,
            policy,
        })
    }

    /// Applies the rule matching the kind of the current state.
    pub fn step<'r>(
        &self,
        config: &Configuration,
        queue: &mut VecDeque<Message>,
        reply_port: Option<&'r str>,
        rng: Rng<'r>,
    ) -> Result<StepOutcome, ActionError> {
        let h = self.hsm;
        let s = h
            .state(config.sigma.as_str())
            .ok_or_else(|| ActionError::UnknownState(config.sigma.to_string()))?;
        let mut run = Run {
            env: config.env.clone(),
            actions: Vec::new(),
            host: Host {
                model: self.model,
                comp: self.comp,
                reply_port: reply_port.map(str::to_string),
                emissions: Vec::new(),
                logs: Vec::new(),
                probe: false,
                rng,
            },
        };
        let (rule, t_id, des, consumed) = match s.kind {
            StateKind::Choice => {
                let mut chosen = None;
                for t in h.out_t(s.id.as_str()) {
                    let ok = match &t.guard {
                        None => true,
                        Some(g) => eval_guard(g, &config.env).map_err(|e| ActionError::Guard {
                            transition: t.id.to_string(),
                            message: e.to_string(),
                        })?,
                    };
                    if ok {
                        chosen = Some(t);
                        break;
                    }
                }
                let Some(t) = chosen else {
                    return Ok(StepOutcome::Stuck(StuckReason::NonExhaustiveGuards));
                };
                run.block(&t.action, &format!("act:{}", t.id), None)?;
                (8, Some(t.id.to_string()), t.des.clone(), None)
            }
            k if k.is_pseudo() => {
                let Some(t) = h.out_t(s.id.as_str()).next() else {
                    return Ok(StepOutcome::Stuck(StuckReason::BrokenChain));
                };
                run.block(&t.action, &format!("act:{}", t.id), None)?;
                (1, Some(t.id.to_string()), t.des.clone(), None)
            }
            StateKind::Composite => {
                let next = h.next_s(s.id.as_str(), &config.history).expect("composite");
                let Some(child) = next else {
                    let reason = if h.children(s.id.as_str()).next().is_none() {
                        StuckReason::NoChild
                    } else {
                        StuckReason::NoInitial
                    };
                    return Ok(StepOutcome::Stuck(reason));
                };
                let entered = h
                    .state(child.as_str())
                    .ok_or_else(|| ActionError::UnknownState(child.to_string()))?;
                run.block(&entered.entry, &format!("entry:{child}"), None)?;
                (6, None, child, None)
            }
            _ => {
                if h.deadlock(s.id.as_str()).unwrap_or(false) {
                    return Ok(StepOutcome::Stuck(StuckReason::Deadlock));
                }
                let Some(head) = queue.front() else {
                    return Ok(StepOutcome::NeedsMessage);
                };
                let t = h.next_t(s.id.as_str(), &head.msg).expect("basic state");
                let Some(t) = t else {
                    return Ok(match self.policy {
                        UnexpectedPolicy::Stuck => {
                            StepOutcome::Stuck(StuckReason::UnexpectedMessage(head.msg.clone()))
                        }
                        UnexpectedPolicy::Drop => {
                            StepOutcome::Dropped(queue.pop_front().expect("head exists"))
                        }
                    });
                };
                let msg = queue.pop_front().expect("head exists");
                run.host.reply_port = Some(msg.msg.port.clone());
                let exited = h.up_s(s.id.as_str(), t).expect("t leaves an ancestor");
                for x in &exited {
                    let st = &h.states[x.as_str()];
                    run.block(&st.exit, &format!("exit:{x}"), None)?;
                }
                run.block(&t.action, &format!("act:{}", t.id), Some(&msg.payload))?;
                (4, Some(t.id.to_string()), t.des.clone(), Some(msg))
            }
        };
        if rule != 6 {
            let d = h
                .state(des.as_str())
                .ok_or_else(|| ActionError::UnknownState(des.to_string()))?;
            run.block(&d.entry, &format!("entry:{des}"), None)?;
        }
        let history = h.u_h(des.as_str(), &config.history).expect("known state");
        let Run { env, actions, host, .. } = run;
        Ok(StepOutcome::Step(Box::new(Step {
            rule,
            from: config.clone(),
            to: Configuration {
                sigma: des,
                env,
                history,
            },
            transition: t_id,
            consumed,
            actions,
            emissions: host.emissions,
            logs: host.logs,
            probe: host.probe,
        })))
    }
}

struct Run<'a, 'r> {
    env: Env,
    actions: Vec<String>,
    host: Host<'a, 'r>,
}

impl Run<'_, '_> {
    fn block(&mut self, b: &Option<ActionBlock>, label: &str, payload: Option<&Payload>) -> Result<(), ActionError> {
        let Some(b) = b else { return Ok(()) };
        self.env = exec_actions(&self.env, b, payload, &mut self.host).map_err(|e| ActionError::Exec {
            element: label.to_string(),
            source: e,
        })?;
        self.actions.push(label.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_model;

    #[test]
    fn timeout_in_red_fires_t22() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let ctr = m.component("CTR").unwrap();
        let st = Stepper::new(&m, ctr, UnexpectedPolicy::Stuck).unwrap();
        let mut cfg = init_configuration(ctr, st.hsm).unwrap();
        cfg.sigma = StateId::new("s21");
        let mut q = VecDeque::from([Message::new(MessageRef::new("timer", "timeout"))]);
        let mut rng = |_| 0;
        match st.step(&cfg, &mut q, None, &mut rng).unwrap() {
            StepOutcome::Step(s) => {
                assert_eq!(s.rule, 4);
                assert_eq!(s.transition.as_deref(), Some("t22"));
                assert_eq!(s.to.sigma.as_str(), "s22");
                assert_eq!(s.to.env["cycles"], Value::Int(1));
                assert_eq!(s.actions, ["act:t22", "entry:s22"]);
                assert_eq!(s.emissions.len(), 2);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn yellow_is_a_deadlock() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let ctr = m.component("CTR").unwrap();
        let st = Stepper::new(&m, ctr, UnexpectedPolicy::Stuck).unwrap();
        let mut cfg = init_configuration(ctr, st.hsm).unwrap();
        cfg.sigma = StateId::new("s23");
        let mut q = VecDeque::from([Message::new(MessageRef::new("UCPort", "on"))]);
        let out = st.step(&cfg, &mut q, None, &mut |_| 0).unwrap();
        assert_eq!(out, StepOutcome::Stuck(StuckReason::Deadlock));
    }
}
