//! Seeded random removal of states and transitions.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{StateId, SystemModel};

/// Errors of mutation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutateError {
    #[error("removal percentage {0} is outside 0..=90")]
    PercentOutOfRange(u32),
}

/// A removable element: component index and element id.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Element {
    State(usize, StateId),
    Transition(usize, String),
}

/// Removes `ceil(percent% * n)` of the `n` non-root states and transitions
/// of all state machines, visiting them in an order shuffled from `seed`.
/// Removing a state also removes everything it contains and every
/// transition touching any removed state; those count towards the quota,
/// which may be overshot by the last cascade.
pub fn mutate(model: &SystemModel, percent: u32, seed: u64) -> Result<SystemModel, MutateError> {
    if percent > 90 {
        return Err(MutateError::PercentOutOfRange(percent));
    }
    let mut elements = Vec::new();
    for (ci, comp) in model.components.iter().enumerate() {
        let Some(h) = &comp.behavior else { continue };
        let root = h.root_id().clone();
        elements.extend(h.states.keys().filter(|s| **s != root).map(|s| Element::State(ci, s.clone())));
        elements.extend(h.transitions.keys().map(|t| Element::Transition(ci, t.0.clone())));
    }
    let n = (elements.len() * percent as usize).div_ceil(100);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    elements.shuffle(&mut rng);
    let mut out = model.clone();
    let mut removed = 0;
    for e in elements {
        if removed >= n {
            break;
        }
        match e {
            Element::Transition(ci, t) => {
                if let Some(h) = out.components[ci].behavior.as_mut() {
                    if h.transitions.shift_remove(t.as_str()).is_some() {
                        removed += 1;
                    }
                }
            }
            Element::State(ci, s) => {
                if let Some(h) = out.components[ci].behavior.as_mut() {
                    if !h.states.contains_key(&s) {
                        continue;
                    }
                    let mut gone: BTreeSet<StateId> = h.descendants(s.as_str()).unwrap_or_default().into_iter().collect();
                    gone.insert(s);
                    let before = h.states.len() + h.transitions.len();
                    h.states.retain(|id, _| !gone.contains(id));
                    h.transitions.retain(|_, t| !gone.contains(&t.src) && !gone.contains(&t.des));
                    removed += before - h.states.len() - h.transitions.len();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{parse_model, serialize};

    #[test]
    fn zero_percent_is_the_identity() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        assert_eq!(mutate(&m, 0, 3).unwrap(), m);
    }

    #[test]
    fn same_seed_gives_byte_identical_output() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let a = serialize(&mutate(&m, 50, 7).unwrap());
        let b = serialize(&mutate(&m, 50, 7).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, serialize(&m));
    }

    #[test]
    fn percent_above_ninety_is_rejected() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        assert_eq!(mutate(&m, 91, 1).unwrap_err(), MutateError::PercentOutOfRange(91));
    }
}
