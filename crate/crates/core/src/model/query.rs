//! Structural queries over a state machine: containment, incoming and
//! outgoing transitions, handled messages, and the helpers used by the
//! execution rules.

use std::collections::{BTreeMap, BTreeSet};

use super::{Hsm, MessageRef, State, StateId, StateKind, Transition, TransitionId};

/// Last visited basic child of each composite.
pub type History = BTreeMap<StateId, StateId>;

/// Errors raised by structural queries.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("`{id}` is a {found:?} state, expected {expected}")]
    WrongKind {
        id: String,
        found: StateKind,
        expected: &'static str,
    },
    #[error("`{state}` does not lie below the source `{src}` of `{transition}`")]
    Unrelated {
        state: String,
        src: String,
        transition: String,
    },
}

/// Which side of a composite boundary a state occupies for the purpose of
/// the "same parent" well-formedness rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// As the source of a transition.
    Outgoing,
    /// As the destination of a transition.
    Incoming,
}

impl Hsm {
    fn get(&self, id: &str) -> Result<&State, QueryError> {
        self.states
            .get(id)
            .ok_or_else(|| QueryError::UnknownElement(id.to_string()))
    }

    /// Direct parent of a state; `None` for the root.
    pub fn parent(&self, id: &str) -> Result<Option<&StateId>, QueryError> {
        Ok(self.get(id)?.parent.as_ref())
    }

    /// Ancestors of a state, nearest first, ending at the root.
    pub fn parents(&self, id: &str) -> Result<Vec<StateId>, QueryError> {
        let mut out = Vec::new();
        let mut cur = self.get(id)?.parent.clone();
        while let Some(p) = cur {
            cur = self.get(p.as_str())?.parent.clone();
            out.push(p);
        }
        Ok(out)
    }

    /// Direct children in declaration order.
    pub fn children(&self, id: &str) -> impl Iterator<Item = &State> + '_ {
        let id = id.to_string();
        self.states
            .values()
            .filter(move |s| s.parent.as_ref().is_some_and(|p| *p.as_str() == *id))
    }

    /// All states strictly below `id`, in declaration order.
    pub fn descendants(&self, id: &str) -> Result<Vec<StateId>, QueryError> {
        self.get(id)?;
        Ok(self
            .states
            .values()
            .filter(|s| s.id.as_str() != id && self.is_below(s.id.as_str(), id))
            .map(|s| s.id.clone())
            .collect())
    }

    /// True when `id` lies strictly below `ancestor`.
    pub fn is_below(&self, id: &str, ancestor: &str) -> bool {
        let mut cur = self.states.get(id).and_then(|s| s.parent.as_ref());
        while let Some(p) = cur {
            if p.as_str() == ancestor {
                return true;
            }
            cur = self.states.get(p.as_str()).and_then(|s| s.parent.as_ref());
        }
        false
    }

    /// Nesting depth: 0 for the root.
    pub fn depth(&self, id: &str) -> Result<usize, QueryError> {
        Ok(self.parents(id)?.len())
    }

    /// Transitions with `des = id`.
    pub fn in_t(&self, id: &str) -> impl Iterator<Item = &Transition> + '_ {
        let id = id.to_string();
        self.transitions.values().filter(move |t| *t.des.as_str() == *id)
    }

    /// Transitions with `src = id`, in declaration order.
    pub fn out_t(&self, id: &str) -> impl Iterator<Item = &Transition> + '_ {
        let id = id.to_string();
        self.transitions.values().filter(move |t| *t.src.as_str() == *id)
    }

    /// Messages handled at a basic state: triggers of its own outgoing
    /// transitions and those of its ancestors.
    pub fn handled(&self, id: &str) -> Result<BTreeSet<MessageRef>, QueryError> {
        let s = self.get(id)?;
        if s.kind != StateKind::Basic {
            return Err(QueryError::WrongKind {
                id: id.to_string(),
                found: s.kind,
                expected: "basic",
            });
        }
        let mut out = BTreeSet::new();
        let mut levels = vec![s.id.clone()];
        levels.extend(self.parents(id)?);
        for lvl in &levels {
            for t in self.out_t(lvl.as_str()) {
                out.extend(t.triggers.iter().cloned());
            }
        }
        Ok(out)
    }

    /// A basic state that handles no message.
    pub fn deadlock(&self, id: &str) -> Result<bool, QueryError> {
        Ok(self.handled(id)?.is_empty())
    }

    /// First transition triggered by `msg`, searching the state and then its
    /// ancestors bottom-up, in declaration order at each level.
    pub fn next_t(&self, id: &str, msg: &MessageRef) -> Result<Option<&Transition>, QueryError> {
        self.get(id)?;
        let mut levels = vec![StateId::new(id)];
        levels.extend(self.parents(id)?);
        for lvl in &levels {
            if let Some(t) = self
                .out_t(lvl.as_str())
                .find(|t| t.triggers.contains(msg))
            {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }

    /// The child to enter when control reaches a composite: the history
    /// entry if any, otherwise the initial child.
    pub fn next_s(&self, id: &str, history: &History) -> Result<Option<StateId>, QueryError> {
        let s = self.get(id)?;
        if s.kind != StateKind::Composite {
            return Err(QueryError::WrongKind {
                id: id.to_string(),
                found: s.kind,
                expected: "composite",
            });
        }
        if let Some(h) = history.get(id) {
            return Ok(Some(h.clone()));
        }
        Ok(self.initial_child(id).map(|c| c.id.clone()))
    }

    /// The initial pseudo-state directly below a composite.
    pub fn initial_child(&self, id: &str) -> Option<&State> {
        self.children(id).find(|c| c.kind == StateKind::Initial)
    }

    /// States exited when `t` fires from `id`: from `id` up to and including
    /// `t.src`, bottom-up.
    pub fn up_s(&self, id: &str, t: &Transition) -> Result<Vec<StateId>, QueryError> {
        self.get(id)?;
        let mut out = vec![StateId::new(id)];
        if id == t.src.as_str() {
            return Ok(out);
        }
        for p in self.parents(id)? {
            let done = p == t.src;
            out.push(p);
            if done {
                return Ok(out);
            }
        }
        Err(QueryError::Unrelated {
            state: id.to_string(),
            src: t.src.to_string(),
            transition: t.id.to_string(),
        })
    }

    /// History update on entering `id`: a basic state becomes the history of
    /// its parent.
    pub fn u_h(&self, id: &str, history: &History) -> Result<History, QueryError> {
        let s = self.get(id)?;
        let mut h = history.clone();
        if s.kind == StateKind::Basic {
            if let Some(p) = &s.parent {
                h.insert(p.clone(), s.id.clone());
            }
        }
        Ok(h)
    }

    /// The composite whose interior a state occupies when it is used as the
    /// source (`Outgoing`) or destination (`Incoming`) of a transition.
    ///
    /// Entry points lie outside their composite when entered and inside when
    /// left; exit points the other way round.
    pub fn scope(&self, id: &str, side: Scope) -> Result<Option<StateId>, QueryError> {
        let s = self.get(id)?;
        let parent = s.parent.clone();
        let outer = || -> Result<Option<StateId>, QueryError> {
            match &parent {
                Some(p) => Ok(self.get(p.as_str())?.parent.clone()),
                None => Ok(None),
            }
        };
        match (s.kind, side) {
            (StateKind::EntryPoint, Scope::Incoming) | (StateKind::ExitPoint, Scope::Outgoing) => {
                outer()
            }
            _ => Ok(parent),
        }
    }

    /// Transition ids in declaration order.
    pub fn transition_ids(&self) -> impl Iterator<Item = &TransitionId> {
        self.transitions.keys()
    }

    /// Composites including the root, ordered root first and then by
    /// increasing depth, declaration order within a depth.
    pub fn composites_by_depth(&self) -> Vec<StateId> {
        let mut v: Vec<(usize, usize, StateId)> = self
            .states
            .values()
            .enumerate()
            .filter(|(_, s)| s.kind == StateKind::Composite)
            .map(|(i, s)| (self.depth(s.id.as_str()).unwrap_or(0), i, s.id.clone()))
            .collect();
        v.sort();
        v.into_iter().map(|(_, _, id)| id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{State, StateKind, Transition};

    fn sample() -> Hsm {
        let mut h = Hsm::empty("M");
        let root = h.root_id().clone();
        let a = h.add_state(State::new("a", StateKind::Basic, Some(root.clone())));
        let c = h.add_state(State::new("c", StateKind::Composite, Some(root.clone())));
        let b = h.add_state(State::new("b", StateKind::Basic, Some(c.clone())));
        let mut t = Transition::new("t1", &c, &a);
        t.triggers.push(MessageRef::new("p", "x"));
        h.add_transition(t);
        let mut t = Transition::new("t2", &a, &c);
        t.triggers.push(MessageRef::new("p", "y"));
        h.add_transition(t);
        let _ = b;
        h
    }

    #[test]
    fn handled_includes_ancestors() {
        let h = sample();
        let got = h.handled("b").unwrap();
        assert_eq!(got.into_iter().map(|m| m.message).collect::<Vec<_>>(), ["x"]);
        assert!(h.handled("c").is_err());
    }

    #[test]
    fn up_s_walks_to_source() {
        let h = sample();
        let t = h.transition("t1").unwrap();
        let ids: Vec<_> = h.up_s("b", t).unwrap().into_iter().map(|s| s.0).collect();
        assert_eq!(ids, ["b", "c"]);
        let t2 = h.transition("t2").unwrap();
        assert!(h.up_s("b", t2).is_err());
    }

    #[test]
    fn history_tracks_basic_children() {
        let h = sample();
        let hist = h.u_h("b", &History::new()).unwrap();
        assert_eq!(hist.get("c").map(|s| s.as_str()), Some("b"));
        assert_eq!(h.next_s("c", &hist).unwrap().unwrap().as_str(), "b");
        assert_eq!(h.next_s("c", &History::new()).unwrap(), None);
    }

    #[test]
    fn unknown_elements_are_reported() {
        let h = sample();
        assert!(matches!(h.parents("zz"), Err(QueryError::UnknownElement(_))));
    }
}
