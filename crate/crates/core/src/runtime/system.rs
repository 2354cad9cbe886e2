//! The controller: schedules instances, routes messages over connectors,
//! serves timers from a virtual clock and pauses at decision points.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::instance::{
    Configuration, Emission, Instance, Message, Status, Step, StepOutcome, Stepper, UnexpectedPolicy,
};
use crate::model::{
    Direction, MessageRef, PortRef, StateId, StateKind, SystemModel, Value, DBG_MESSAGE, RESERVED_PREFIX,
    START_TIMER, TIMEOUT,
};
use crate::refine::{option_reach, Refined, DBG_PORT, SEL_VAR};
use crate::text::{Env, Payload};

/// Limits and policies of a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub max_steps: Option<usize>,
    pub max_vtime: Option<u64>,
    pub seed: u64,
    pub policy: UnexpectedPolicy,
    /// Components that are never stepped.
    pub passive: BTreeSet<String>,
    /// Keep full steps with configurations, not only trace records.
    pub record_steps: bool,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HaltReason {
    /// Nothing left to deliver and no pending timer.
    Quiescent,
    MaxSteps,
    MaxVTime,
    Quit,
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HaltReason::Quiescent => "quiescent",
            HaltReason::MaxSteps => "step limit reached",
            HaltReason::MaxVTime => "time limit reached",
            HaltReason::Quit => "quit",
        })
    }
}

/// One way to continue from a decision point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionOption {
    /// Value of the selection variable that enables this option.
    pub index: usize,
    pub transition: String,
    pub target: StateId,
    pub target_label: String,
    /// States this option ultimately leads to, with their display names.
    pub reach: Vec<StateId>,
    pub labels: Vec<String>,
    /// The original transition, for options that existed before refinement.
    pub org: Option<String>,
}

/// Runtime information at a decision point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionContext {
    pub component: String,
    pub dec_point: StateId,
    /// Configuration before the transition that entered the decision point.
    pub gamma: Configuration,
    /// Display name of the state where the decision was requested.
    pub state_label: String,
    pub last_message: Option<MessageRef>,
    pub options: Vec<DecisionOption>,
}

impl DecisionContext {
    /// The state where the decision was requested.
    pub fn state(&self) -> &StateId {
        &self.gamma.sigma
    }

    pub fn option(&self, index: usize) -> Option<&DecisionOption> {
        self.options.iter().find(|o| o.index == index)
    }
}

/// Result of driving the run until the next point of interest.
#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    Decision(DecisionContext),
    Halted(HaltReason),
}

/// One line of the serialized trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub component: String,
    pub rule: u8,
    pub from: String,
    pub to: String,
    pub actions: Vec<String>,
    pub emissions: Vec<String>,
    pub vtime: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
}

/// Errors of run control operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{0}` is not waiting for a decision")]
    NotAwaiting(String),
    #[error("option {index} does not exist ({count} options)")]
    InvalidOption { index: usize, count: usize },
    #[error("component `{0}` has no debug port")]
    NoDebugPort(String),
    #[error("component `{component}` cannot {dir} message `{message}`")]
    UnknownMessage {
        component: String,
        message: String,
        dir: &'static str,
    },
    #[error("port {0} is not connected")]
    Unconnected(String),
    #[error("wrong number of arguments for `{message}`: expected {expected}, got {got}")]
    Arity {
        message: String,
        expected: usize,
        got: usize,
    },
    #[error("no message to reply to")]
    NoReplyTarget,
}

#[derive(Debug, Clone, Default)]
struct VirtualClock {
    now: u64,
    seq: u64,
    pending: BinaryHeap<Reverse<(u64, u64, usize, String)>>,
}

impl VirtualClock {
    fn start(&mut self, owner: usize, port: &str, delay: i64) {
        self.seq += 1;
        let deadline = self.now.saturating_add(delay.max(0) as u64);
        self.pending
            .push(Reverse((deadline, self.seq, owner, port.to_string())));
    }

    fn next_deadline(&self) -> Option<u64> {
        self.pending.peek().map(|Reverse((d, ..))| *d)
    }

    /// Moves time to the next deadline and returns the expired timers in
    /// creation order.
    fn fire(&mut self) -> Vec<(usize, String)> {
        let Some(d) = self.next_deadline() else {
            return Vec::new();
        };
        self.now = self.now.max(d);
        let mut out = Vec::new();
        while self.next_deadline() == Some(d) {
            let Reverse((_, _, owner, port)) = self.pending.pop().expect("peeked");
            out.push((owner, port));
        }
        out
    }
}

/// A resumable execution of a whole system.
#[derive(Debug, Clone)]
pub struct SystemRun {
    model: SystemModel,
    opts: RunOptions,
    instances: Vec<Instance>,
    active: Option<usize>,
    pending_start: VecDeque<usize>,
    external: VecDeque<(usize, Message)>,
    fifo: VecDeque<(usize, Message)>,
    clock: VirtualClock,
    rng: ChaCha8Rng,
    trace: Vec<TraceRecord>,
    steps: Vec<(usize, Step)>,
    contexts: BTreeMap<usize, DecisionContext>,
    deferred: BTreeSet<usize>,
    halted: Option<HaltReason>,
}

impl SystemRun {
    pub fn new(model: SystemModel, opts: RunOptions) -> Self {
        let mut instances: Vec<Instance> = model.components.iter().map(Instance::new).collect();
        let mut pending_start = VecDeque::new();
        for (i, inst) in instances.iter_mut().enumerate() {
            if opts.passive.contains(&inst.component) {
                inst.status = Status::Idle;
            } else {
                pending_start.push_back(i);
            }
        }
        SystemRun {
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            model,
            opts,
            instances,
            active: None,
            pending_start,
            external: VecDeque::new(),
            fifo: VecDeque::new(),
            clock: VirtualClock::default(),
            trace: Vec::new(),
            steps: Vec::new(),
            contexts: BTreeMap::new(),
            deferred: BTreeSet::new(),
            halted: None,
        }
    }

    /// Run of a refined system; the debug agent is kept passive.
    pub fn for_refined(refined: &Refined, mut opts: RunOptions) -> Self {
        opts.passive.insert(refined.metadata.dbg_agent.clone());
        SystemRun::new(refined.model.clone(), opts)
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Full steps, when `record_steps` is set.
    pub fn steps(&self) -> &[(usize, Step)] {
        &self.steps
    }

    pub fn now(&self) -> u64 {
        self.clock.now
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn instance(&self, component: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.component == component)
    }

    fn index(&self, component: &str) -> Result<usize, RunError> {
        self.model
            .component_index(component)
            .ok_or_else(|| RunError::UnknownComponent(component.to_string()))
    }

    pub fn env(&self, component: &str) -> Result<&Env, RunError> {
        Ok(&self.instances[self.index(component)?].config.env)
    }

    pub fn env_mut(&mut self, component: &str) -> Result<&mut Env, RunError> {
        let i = self.index(component)?;
        Ok(&mut self.instances[i].config.env)
    }

    pub fn visited(&self, component: &str) -> Result<&[StateId], RunError> {
        Ok(&self.instances[self.index(component)?].visited)
    }

    /// Decision currently waiting for an answer, if the run is paused.
    pub fn pending(&self) -> Option<&DecisionContext> {
        self.active
            .filter(|a| self.instances[*a].status == Status::Awaiting && !self.deferred.contains(a))
            .and_then(|a| self.contexts.get(&a))
    }

    /// Draws from the run's seeded generator in `0..bound`.
    pub fn random(&mut self, bound: i64) -> i64 {
        if bound <= 0 {
            return 0;
        }
        self.rng.random_range(0..bound)
    }

    fn limit_reached(&self) -> bool {
        self.opts.max_steps.is_some_and(|m| self.trace.len() >= m)
    }

    /// Drives the run until a decision is needed or it halts.
    pub fn advance(&mut self) -> Advance {
        if let Some(h) = self.halted {
            return Advance::Halted(h);
        }
        loop {
            if let Some(a) = self.active {
                match self.instances[a].status {
                    Status::Awaiting if !self.deferred.contains(&a) => {
                        if let Some(ctx) = self.contexts.get(&a) {
                            return Advance::Decision(ctx.clone());
                        }
                        self.active = None;
                    }
                    Status::Ready => {
                        if let Some(h) = self.try_step(a) {
                            return self.halt(h);
                        }
                        continue;
                    }
                    Status::Idle if !self.instances[a].queue.is_empty() => {
                        self.instances[a].status = Status::Ready;
                        continue;
                    }
                    _ => self.active = None,
                }
            }
            if let Some(i) = self.pending_start.pop_front() {
                if let Status::Stuck(r) = &self.instances[i].status {
                    if self.limit_reached() {
                        return self.halt(HaltReason::MaxSteps);
                    }
                    let outcome = Some(format!("stuck: {r}"));
                    let name = self.instances[i].component.clone();
                    self.push_record(TraceRecord {
                        step: 0,
                        component: name,
                        rule: r.rule(),
                        from: String::new(),
                        to: String::new(),
                        actions: vec![],
                        emissions: vec![],
                        vtime: self.clock.now,
                        message: None,
                        outcome,
                    });
                    continue;
                }
                self.active = Some(i);
                continue;
            }
            if let Some((i, m)) = self.external.pop_front().or_else(|| self.fifo.pop_front()) {
                self.deliver(i, m);
                continue;
            }
            if let Some(&d) = self.deferred.iter().next() {
                self.deferred.remove(&d);
                self.active = Some(d);
                continue;
            }
            if let Some(deadline) = self.clock.next_deadline() {
                if self.opts.max_vtime.is_some_and(|m| deadline > m) {
                    return self.halt(HaltReason::MaxVTime);
                }
                for (owner, port) in self.clock.fire() {
                    self.fifo
                        .push_back((owner, Message::new(MessageRef::new(port, TIMEOUT))));
                }
                continue;
            }
            return self.halt(HaltReason::Quiescent);
        }
    }

    fn halt(&mut self, h: HaltReason) -> Advance {
        if h != HaltReason::Quiescent {
            self.halted = Some(h);
        }
        Advance::Halted(h)
    }

    /// Ends the run.
    pub fn quit(&mut self) {
        self.halted = Some(HaltReason::Quit);
    }

    pub fn halted(&self) -> Option<HaltReason> {
        self.halted
    }

    fn deliver(&mut self, i: usize, m: Message) {
        let inst = &mut self.instances[i];
        if self.opts.passive.contains(&inst.component) {
            return;
        }
        inst.queue.push_back(m);
        if inst.status == Status::Idle {
            inst.status = Status::Ready;
            self.active = Some(i);
        }
    }

    /// Steps instance `i` once. Returns a halt reason when a limit stops the run.
    fn try_step(&mut self, i: usize) -> Option<HaltReason> {
        if self.limit_reached() {
            return Some(HaltReason::MaxSteps);
        }
        let comp = &self.model.components[i];
        let Some(stepper) = Stepper::new(&self.model, comp, self.opts.policy) else {
            self.instances[i].status = Status::Idle;
            return None;
        };
        let inst = &mut self.instances[i];
        let reply_port = inst.last_message.as_ref().map(|m| m.port.clone());
        let rng = &mut self.rng;
        let mut draw = |b: i64| if b <= 0 { 0 } else { rng.random_range(0..b) };
        let outcome = stepper.step(&inst.config, &mut inst.queue, reply_port.as_deref(), &mut draw);
        let vtime = self.clock.now;
        let sigma = inst.config.sigma.to_string();
        match outcome {
            Err(e) => {
                inst.status = Status::Failed(e.to_string());
                let name = inst.component.clone();
                self.push_record(TraceRecord {
                    step: 0,
                    component: name,
                    rule: 0,
                    from: sigma.clone(),
                    to: sigma,
                    actions: vec![],
                    emissions: vec![],
                    vtime,
                    message: None,
                    outcome: Some(format!("error: {e}")),
                });
            }
            Ok(StepOutcome::NeedsMessage) => {
                inst.status = Status::Idle;
            }
            Ok(StepOutcome::Stuck(r)) => {
                let message = match &r {
                    super::StuckReason::UnexpectedMessage(m) => Some(m.to_string()),
                    _ => None,
                };
                inst.status = Status::Stuck(r.clone());
                let name = inst.component.clone();
                self.push_record(TraceRecord {
                    step: 0,
                    component: name,
                    rule: r.rule(),
                    from: sigma.clone(),
                    to: sigma,
                    actions: vec![],
                    emissions: vec![],
                    vtime,
                    message,
                    outcome: Some(format!("stuck: {r}")),
                });
            }
            Ok(StepOutcome::Dropped(m)) => {
                let name = inst.component.clone();
                self.push_record(TraceRecord {
                    step: 0,
                    component: name,
                    rule: 5,
                    from: sigma.clone(),
                    to: sigma,
                    actions: vec![],
                    emissions: vec![],
                    vtime,
                    message: Some(m.msg.to_string()),
                    outcome: Some("dropped".into()),
                });
            }
            Ok(StepOutcome::Step(step)) => self.apply_step(i, *step),
        }
        None
    }

    fn apply_step(&mut self, i: usize, step: Step) {
        let hsm = self.model.components[i].behavior.as_ref().expect("stepped");
        let inst = &mut self.instances[i];
        inst.config = step.to.clone();
        if let Some(m) = &step.consumed {
            inst.last_message = Some(m.msg.clone());
        }
        let kind = hsm.state(step.to.sigma.as_str()).map(|s| s.kind);
        if kind == Some(StateKind::Basic) && !inst.visited.contains(&step.to.sigma) {
            inst.visited.push(step.to.sigma.clone());
        }
        if step.probe && kind == Some(StateKind::Choice) {
            let dec = step.to.sigma.clone();
            let options = hsm
                .out_t(dec.as_str())
                .enumerate()
                .map(|(k, t)| {
                    let reach = option_reach(hsm, t.id.as_str());
                    DecisionOption {
                        index: k + 1,
                        transition: t.id.to_string(),
                        target: t.des.clone(),
                        target_label: hsm.label(t.des.as_str()),
                        labels: reach.iter().map(|s| hsm.label(s.as_str())).collect(),
                        reach,
                        org: (!t.id.as_str().starts_with(RESERVED_PREFIX)).then(|| t.id.to_string()),
                    }
                })
                .collect();
            self.contexts.insert(
                i,
                DecisionContext {
                    component: inst.component.clone(),
                    dec_point: dec,
                    gamma: step.from.clone(),
                    state_label: hsm.label(step.from.sigma.as_str()),
                    last_message: inst.last_message.clone(),
                    options,
                },
            );
            inst.status = Status::Awaiting;
        } else {
            inst.status = Status::Ready;
        }
        let name = inst.component.clone();
        let mut emitted = Vec::new();
        let mut outcome = None;
        for e in &step.emissions {
            emitted.push(e.to_string());
            if let Err(err) = self.route(i, e) {
                outcome = Some(format!("routing error: {err}"));
            }
        }
        self.push_record(TraceRecord {
            step: 0,
            component: name,
            rule: step.rule,
            from: step.from.sigma.to_string(),
            to: step.to.sigma.to_string(),
            actions: step.actions.clone(),
            emissions: emitted,
            vtime: self.clock.now,
            message: step.consumed.as_ref().map(|m| m.msg.to_string()),
            outcome,
        });
        if self.opts.record_steps {
            self.steps.push((i, step));
        }
    }

    fn push_record(&mut self, mut r: TraceRecord) {
        r.step = self.trace.len() + 1;
        self.trace.push(r);
    }

    /// Routes an emission of component `i` to its peer or the clock.
    fn route(&mut self, i: usize, e: &Emission) -> Result<(), RunError> {
        let comp = &self.model.components[i];
        if self.model.is_timer_port(comp, &e.port) && e.message == START_TIMER {
            let delay = match e.args.first() {
                Some(Value::Int(d)) => *d,
                _ => 0,
            };
            self.clock.start(i, &e.port, delay);
            return Ok(());
        }
        let (j, m) = self.resolve_peer(i, &e.port, &e.message, &e.args)?;
        self.fifo.push_back((j, m));
        Ok(())
    }

    fn resolve_peer(
        &self,
        i: usize,
        port: &str,
        message: &str,
        args: &[Value],
    ) -> Result<(usize, Message), RunError> {
        let comp = &self.model.components[i];
        let end = PortRef::new(&comp.name, port);
        let peer = self
            .model
            .peer(&end)
            .ok_or_else(|| RunError::Unconnected(format!("{}.{port}", comp.name)))?;
        let j = self.index(&peer.component)?;
        let receiver = &self.model.components[j];
        let (decl, _) = self
            .model
            .port_message(receiver, &peer.port, message)
            .ok_or_else(|| RunError::UnknownMessage {
                component: receiver.name.clone(),
                message: message.to_string(),
                dir: "receive",
            })?;
        if decl.params.len() != args.len() {
            return Err(RunError::Arity {
                message: message.to_string(),
                expected: decl.params.len(),
                got: args.len(),
            });
        }
        let payload: Payload = decl
            .params
            .iter()
            .map(|(n, _)| n.clone())
            .zip(args.iter().cloned())
            .collect();
        Ok((
            j,
            Message {
                msg: MessageRef::new(peer.port.clone(), message),
                payload,
            },
        ))
    }

    /// Answers the pending decision of `component` with option `index`.
    pub fn resume(&mut self, component: &str, index: usize) -> Result<(), RunError> {
        let i = self.index(component)?;
        if self.instances[i].status != Status::Awaiting {
            return Err(RunError::NotAwaiting(component.to_string()));
        }
        let ctx = self
            .contexts
            .get(&i)
            .ok_or_else(|| RunError::NotAwaiting(component.to_string()))?;
        if ctx.option(index).is_none() {
            return Err(RunError::InvalidOption {
                index,
                count: ctx.options.len(),
            });
        }
        self.contexts.remove(&i);
        let inst = &mut self.instances[i];
        inst.config
            .env
            .insert(SEL_VAR.to_string(), Value::Int(index as i64));
        inst.status = Status::Ready;
        self.deferred.remove(&i);
        self.active = Some(i);
        Ok(())
    }

    /// Postpones the pending decision of `component` until nothing else can run.
    pub fn defer(&mut self, component: &str) -> Result<(), RunError> {
        let i = self.index(component)?;
        if self.instances[i].status != Status::Awaiting {
            return Err(RunError::NotAwaiting(component.to_string()));
        }
        self.deferred.insert(i);
        if self.active == Some(i) {
            self.active = None;
        }
        Ok(())
    }

    fn event(&mut self, component: &str, outcome: String) {
        let sigma = self
            .instance(component)
            .map(|i| i.config.sigma.to_string())
            .unwrap_or_default();
        let vtime = self.clock.now;
        self.push_record(TraceRecord {
            step: 0,
            component: component.to_string(),
            rule: 0,
            from: sigma.clone(),
            to: sigma,
            actions: vec![],
            emissions: vec![],
            vtime,
            message: None,
            outcome: Some(outcome),
        });
    }

    /// Delivers `message` (or the debug message when `None`) to `component`
    /// ahead of regular traffic.
    pub fn inject(&mut self, component: &str, message: Option<&str>, args: Vec<Value>) -> Result<MessageRef, RunError> {
        let i = self.index(component)?;
        let comp = &self.model.components[i];
        let (msg, payload) = match message {
            None | Some(DBG_MESSAGE) if comp.port(DBG_PORT).is_some() && args.is_empty() => {
                (MessageRef::new(DBG_PORT, DBG_MESSAGE), Payload::new())
            }
            None => return Err(RunError::NoDebugPort(component.to_string())),
            Some(m) => {
                let r = self
                    .model
                    .resolve_message(comp, m, Direction::Input)
                    .map_err(|_| RunError::UnknownMessage {
                        component: component.to_string(),
                        message: m.to_string(),
                        dir: "receive",
                    })?;
                let (decl, _) = self.model.port_message(comp, &r.port, m).expect("resolved");
                if decl.params.len() != args.len() {
                    return Err(RunError::Arity {
                        message: m.to_string(),
                        expected: decl.params.len(),
                        got: args.len(),
                    });
                }
                let payload = decl.params.iter().map(|(n, _)| n.clone()).zip(args).collect();
                (r, payload)
            }
        };
        self.external.push_back((
            i,
            Message {
                msg: msg.clone(),
                payload,
            },
        ));
        self.event(component, format!("inject {msg}"));
        Ok(msg)
    }

    /// Sends `message` on behalf of `component` through its connectors.
    /// Without a port the unique output port carrying the message is used.
    pub fn send_from(
        &mut self,
        component: &str,
        port: Option<&str>,
        message: &str,
        args: Vec<Value>,
    ) -> Result<PortRef, RunError> {
        let i = self.index(component)?;
        let comp = &self.model.components[i];
        let port = match port {
            Some(p) => match self.model.port_message(comp, p, message) {
                Some((_, Direction::Output)) => p.to_string(),
                _ => {
                    return Err(RunError::UnknownMessage {
                        component: component.to_string(),
                        message: format!("{p}.{message}"),
                        dir: "send",
                    })
                }
            },
            None => {
                self.model
                    .resolve_message(comp, message, Direction::Output)
                    .map_err(|_| RunError::UnknownMessage {
                        component: component.to_string(),
                        message: message.to_string(),
                        dir: "send",
                    })?
                    .port
            }
        };
        let e = Emission {
            port: port.clone(),
            message: message.to_string(),
            args,
        };
        if self.model.is_timer_port(comp, &port) && message == START_TIMER {
            self.route(i, &e)?;
            self.event(component, format!("send {e}"));
            return Ok(PortRef::new(component, port));
        }
        let (j, m) = self.resolve_peer(i, &port, message, &e.args)?;
        let to = PortRef::new(&self.model.components[j].name, m.msg.port.clone());
        self.external.push_back((j, m));
        self.event(component, format!("send {e}"));
        Ok(to)
    }

    /// Sends `message` back on the port of the last message `component`
    /// received.
    pub fn reply_from(&mut self, component: &str, message: &str, args: Vec<Value>) -> Result<PortRef, RunError> {
        let i = self.index(component)?;
        let port = self.instances[i]
            .last_message
            .as_ref()
            .map(|m| m.port.clone())
            .ok_or(RunError::NoReplyTarget)?;
        self.send_from(component, Some(&port), message, args)
    }

    /// Output messages `component` could reply with on the port of its last
    /// received message.
    pub fn reply_candidates(&self, component: &str) -> Result<Vec<String>, RunError> {
        let i = self.index(component)?;
        let comp = &self.model.components[i];
        let Some(port) = self.instances[i].last_message.as_ref().map(|m| m.port.clone()) else {
            return Ok(vec![]);
        };
        Ok(self
            .model
            .outp(comp)
            .into_iter()
            .filter(|m| m.port == port)
            .map(|m| m.message)
            .collect())
    }

    /// Serializes the trace as line-delimited JSON.
    pub fn trace_jsonl(&self) -> String {
        trace_jsonl(&self.trace)
    }
}

/// Line-delimited JSON form of a trace.
pub fn trace_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

/// Answer of an input provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Select(usize),
    Defer,
    Quit,
}

/// Source of decisions at decision points.
pub trait InputProvider {
    type Error;
    fn decide(&mut self, run: &mut SystemRun, ctx: &DecisionContext) -> Result<Decision, Self::Error>;
}

/// Drives `run` to its end, asking `provider` at every decision point.
pub fn run_with<P: InputProvider>(run: &mut SystemRun, provider: &mut P) -> Result<HaltReason, P::Error>
where
    P::Error: From<RunError>,
{
    loop {
        match run.advance() {
            Advance::Halted(h) => return Ok(h),
            Advance::Decision(ctx) => match provider.decide(run, &ctx)? {
                Decision::Select(k) => run.resume(&ctx.component, k)?,
                Decision::Defer => run.defer(&ctx.component)?,
                Decision::Quit => {
                    run.quit();
                    return Ok(HaltReason::Quit);
                }
            },
        }
    }
}

/// Provider that always takes the option with a fixed position, or quits
/// when there are no options.
#[derive(Debug, Clone, Copy)]
pub struct FirstOption;

impl InputProvider for FirstOption {
    type Error = RunError;
    fn decide(&mut self, _run: &mut SystemRun, ctx: &DecisionContext) -> Result<Decision, RunError> {
        Ok(ctx
            .options
            .first()
            .map(|o| Decision::Select(o.index))
            .unwrap_or(Decision::Quit))
    }
}

/// Provider that picks options uniformly at random from the run's generator.
#[derive(Debug, Clone, Copy)]
pub struct RandomOption;

impl InputProvider for RandomOption {
    type Error = RunError;
    fn decide(&mut self, run: &mut SystemRun, ctx: &DecisionContext) -> Result<Decision, RunError> {
        if ctx.options.is_empty() {
            return Ok(Decision::Quit);
        }
        let k = run.random(ctx.options.len() as i64) as usize;
        Ok(Decision::Select(ctx.options[k].index))
    }
}
