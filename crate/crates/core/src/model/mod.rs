//! Structural model of a component-based system whose components carry
//! hierarchical state machines.
//!
//! Element maps are [`IndexMap`]s so that declaration order is preserved for
//! serialization and for order-sensitive semantics (first enabled
//! transition, option numbering).

mod query;
mod validate;

pub use query::{History, QueryError, Scope};
pub use validate::{validate, Violation, ViolationKind};

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::text::{ActionBlock, Expr};

/// Prefix reserved for identifiers introduced by refinement.
pub const RESERVED_PREFIX: &str = "__pmx_";
/// Name of the interface carrying the debug message.
pub const DBG_INTERFACE: &str = "dbg_int";
/// Name of the debug message.
pub const DBG_MESSAGE: &str = "dbg";
/// Name of the timing interface served by the runtime.
pub const TIMING_INTERFACE: &str = "timing";
/// Message that starts a timer (sent by components).
pub const START_TIMER: &str = "startTimer";
/// Message delivered when a timer fires.
pub const TIMEOUT: &str = "timeout";

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(
    /// Identifier of a state, unique within its state machine.
    StateId
);
id_type!(
    /// Identifier of a transition, unique within its state machine.
    TransitionId
);

/// Scalar types of the action language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Int,
    Bool,
    Str,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Int => "int",
            ValueType::Bool => "bool",
            ValueType::Str => "string",
        })
    }
}

/// Runtime values of the action language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
}

impl Value {
    pub fn ty(&self) -> ValueType {
        match self {
            Value::Int(_) => ValueType::Int,
            Value::Bool(_) => ValueType::Bool,
            Value::Str(_) => ValueType::Str,
        }
    }

    /// Default value of a type.
    pub fn default_of(ty: ValueType) -> Value {
        match ty {
            ValueType::Int => Value::Int(0),
            ValueType::Bool => Value::Bool(false),
            ValueType::Str => Value::Str(String::new()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{}", crate::text::quote(s)),
        }
    }
}

/// Direction of a message relative to the base (non-conjugated) side of an
/// interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Input => Direction::Output,
            Direction::Output => Direction::Input,
        }
    }
}

/// One message of an interface together with its payload signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageDecl {
    pub name: String,
    pub direction: Direction,
    pub params: Vec<(String, ValueType)>,
}

/// A named set of directed messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interface {
    pub name: String,
    pub messages: Vec<MessageDecl>,
}

impl Interface {
    pub fn message(&self, name: &str) -> Option<&MessageDecl> {
        self.messages.iter().find(|m| m.name == name)
    }
}

/// A typed communication endpoint of a component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub interface: String,
    pub conjugated: bool,
}

impl Port {
    /// Direction of `msg` as seen by the owner of this port.
    pub fn direction_of(&self, msg: &MessageDecl) -> Direction {
        if self.conjugated {
            msg.direction.flip()
        } else {
            msg.direction
        }
    }
}

/// A component variable with optional initial value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: ValueType,
    pub init: Option<Value>,
}

impl VarDecl {
    pub fn initial_value(&self) -> Value {
        self.init.clone().unwrap_or_else(|| Value::default_of(self.ty))
    }
}

/// How much of a component is specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Completeness {
    Complete,
    Partial,
    Absent,
}

impl fmt::Display for Completeness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Completeness::Complete => "complete",
            Completeness::Partial => "partial",
            Completeness::Absent => "absent",
        })
    }
}

impl std::str::FromStr for Completeness {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complete" => Ok(Completeness::Complete),
            "partial" => Ok(Completeness::Partial),
            "absent" => Ok(Completeness::Absent),
            other => Err(format!("unknown completeness level `{other}`")),
        }
    }
}

/// Kinds of states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Basic,
    Composite,
    Initial,
    Choice,
    Junction,
    EntryPoint,
    ExitPoint,
}

impl StateKind {
    pub fn is_pseudo(self) -> bool {
        !matches!(self, StateKind::Basic | StateKind::Composite)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            StateKind::Basic => "state",
            StateKind::Composite => "composite",
            StateKind::Initial => "initial",
            StateKind::Choice => "choice",
            StateKind::Junction => "junction",
            StateKind::EntryPoint => "entrypoint",
            StateKind::ExitPoint => "exitpoint",
        }
    }
}

/// A state of a state machine. The root is stored as a composite without
/// parent.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub id: StateId,
    pub name: String,
    pub kind: StateKind,
    pub parent: Option<StateId>,
    pub entry: Option<ActionBlock>,
    pub exit: Option<ActionBlock>,
}

impl State {
    pub fn new(id: impl Into<String>, kind: StateKind, parent: Option<StateId>) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id: StateId(id),
            kind,
            parent,
            entry: None,
            exit: None,
        }
    }
}

/// A port-qualified message, used for triggers and input sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageRef {
    pub port: String,
    pub message: String,
}

impl MessageRef {
    pub fn new(port: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            port: port.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for MessageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.port, self.message)
    }
}

/// A transition `(src, guard, triggers, action, des)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: TransitionId,
    pub src: StateId,
    pub des: StateId,
    pub triggers: Vec<MessageRef>,
    pub guard: Option<Expr>,
    pub action: Option<ActionBlock>,
}

impl Transition {
    pub fn new(id: impl Into<String>, src: &StateId, des: &StateId) -> Self {
        Self {
            id: TransitionId(id.into()),
            src: src.clone(),
            des: des.clone(),
            triggers: Vec::new(),
            guard: None,
            action: None,
        }
    }
}

/// A hierarchical state machine. `states` always contains the root first.
#[derive(Debug, Clone, PartialEq)]
pub struct Hsm {
    pub states: IndexMap<StateId, State>,
    pub transitions: IndexMap<TransitionId, Transition>,
}

impl Hsm {
    /// A machine holding only its root composite.
    pub fn empty(root: impl Into<String>) -> Self {
        let root = State::new(root, StateKind::Composite, None);
        let mut states = IndexMap::new();
        states.insert(root.id.clone(), root);
        Self {
            states,
            transitions: IndexMap::new(),
        }
    }

    pub fn root_id(&self) -> &StateId {
        self.states
            .first()
            .map(|(k, _)| k)
            .expect("state machine always holds its root")
    }

    pub fn state(&self, id: &str) -> Option<&State> {
        self.states.get(id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.get(id)
    }

    /// Finds a state by id or by display name.
    pub fn find_state(&self, name: &str) -> Option<&State> {
        self.states
            .get(name)
            .or_else(|| self.states.values().find(|s| s.name == name))
    }

    /// Display name of a state, or the id itself when unknown.
    pub fn label(&self, id: &str) -> String {
        self.states
            .get(id)
            .map(|s| s.name.clone())
            .unwrap_or_else(|| id.to_string())
    }

    /// Adds a state; returns its id.
    pub fn add_state(&mut self, state: State) -> StateId {
        let id = state.id.clone();
        self.states.insert(id.clone(), state);
        id
    }

    pub fn add_transition(&mut self, t: Transition) -> TransitionId {
        let id = t.id.clone();
        self.transitions.insert(id.clone(), t);
        id
    }

    /// Returns true when `id` names a state or a transition.
    pub fn contains_element(&self, id: &str) -> bool {
        self.states.contains_key(id) || self.transitions.contains_key(id)
    }

    /// Generates an element id `{base}` or `{base}_{n}` not used yet.
    pub fn fresh_id(&self, base: &str) -> String {
        if !self.contains_element(base) {
            return base.to_string();
        }
        (1..)
            .map(|n| format!("{base}_{n}"))
            .find(|c| !self.contains_element(c))
            .expect("unbounded search")
    }
}

/// A component: ports, variables, optional behaviour and completeness
/// annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub level: Completeness,
    pub ports: Vec<Port>,
    pub vars: Vec<VarDecl>,
    pub behavior: Option<Hsm>,
}

impl Component {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            level: Completeness::Complete,
            ports: Vec::new(),
            vars: Vec::new(),
            behavior: None,
        }
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }
}

/// One end of a connector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub component: String,
    pub port: String,
}

impl PortRef {
    pub fn new(component: impl Into<String>, port: impl Into<String>) -> Self {
        Self {
            component: component.into(),
            port: port.into(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

/// Binds two ports of the same interface, exactly one end conjugated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connector {
    pub a: PortRef,
    pub b: PortRef,
}

/// The whole system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub interfaces: Vec<Interface>,
    pub components: Vec<Component>,
    pub connectors: Vec<Connector>,
    /// Component containment pairs `(parent, child)`.
    pub containment: Vec<(String, String)>,
}

impl SystemModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            interfaces: Vec::new(),
            components: Vec::new(),
            connectors: Vec::new(),
            containment: Vec::new(),
        }
    }

    pub fn interface(&self, name: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.name == name)
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn component_mut(&mut self, name: &str) -> Option<&mut Component> {
        self.components.iter_mut().find(|c| c.name == name)
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    /// Messages the component may receive: `inp(c)`.
    pub fn inp(&self, component: &Component) -> BTreeSet<MessageRef> {
        self.port_messages(component, Direction::Input)
    }

    /// Messages the component may send.
    pub fn outp(&self, component: &Component) -> BTreeSet<MessageRef> {
        self.port_messages(component, Direction::Output)
    }

    fn port_messages(&self, component: &Component, dir: Direction) -> BTreeSet<MessageRef> {
        let mut out = BTreeSet::new();
        for port in &component.ports {
            if let Some(iface) = self.interface(&port.interface) {
                for m in &iface.messages {
                    if port.direction_of(m) == dir {
                        out.insert(MessageRef::new(&port.name, &m.name));
                    }
                }
            }
        }
        out
    }

    /// Looks up the declaration of `message` on `port` of `component`, with
    /// its direction as seen by the component.
    pub fn port_message(
        &self,
        component: &Component,
        port: &str,
        message: &str,
    ) -> Option<(&MessageDecl, Direction)> {
        let port = component.port(port)?;
        let iface = self.interface(&port.interface)?;
        let decl = iface.message(message)?;
        Some((decl, port.direction_of(decl)))
    }

    /// Resolves a bare message name to the unique port on which the component
    /// receives (`Input`) or sends (`Output`) it.
    pub fn resolve_message(
        &self,
        component: &Component,
        message: &str,
        dir: Direction,
    ) -> Result<MessageRef, ResolveError> {
        let matches: Vec<MessageRef> = self
            .port_messages(component, dir)
            .into_iter()
            .filter(|m| m.message == message)
            .collect();
        match matches.len() {
            0 => Err(ResolveError::Unknown(message.to_string())),
            1 => Ok(matches.into_iter().next().expect("one match")),
            _ => Err(ResolveError::Ambiguous(
                message.to_string(),
                matches.iter().map(|m| m.port.clone()).collect(),
            )),
        }
    }

    /// The far end of the connector attached to `end`, if any.
    pub fn peer(&self, end: &PortRef) -> Option<&PortRef> {
        self.connectors.iter().find_map(|c| {
            if &c.a == end {
                Some(&c.b)
            } else if &c.b == end {
                Some(&c.a)
            } else {
                None
            }
        })
    }

    /// Ports of the component typed by the timing interface.
    pub fn is_timer_port(&self, component: &Component, port: &str) -> bool {
        component
            .port(port)
            .is_some_and(|p| p.interface == TIMING_INTERFACE)
    }
}

/// Failure to resolve a bare message name to a port.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("no port carries message `{0}` in that direction")]
    Unknown(String),
    #[error("message `{0}` is ambiguous between ports {1:?}")]
    Ambiguous(String, Vec<String>),
}
