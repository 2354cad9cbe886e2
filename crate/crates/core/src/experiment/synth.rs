//! Seeded generators of large models, rule scripts and decision contexts
//! for timing experiments.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{MessageRef, StateId};
use crate::runtime::{Configuration, DecisionContext};
use crate::text::Env;

/// Messages of the generated interface.
pub const SYNTH_MESSAGES: usize = 12;
const STATES_PER_COMPONENT: usize = 35;

/// Number of components [`synthetic_model_text`] splits `states` over.
pub fn synthetic_component_count(states: usize) -> usize {
    states.div_ceil(STATES_PER_COMPONENT).max(1)
}

/// Source text of a system whose state machines hold `states` states
/// (pseudo-states included, roots excluded) and about `transitions`
/// transitions, split over components of 35 states. Every component is
/// partial; some composites lack an initial state and many basic states
/// handle only part of the input.
pub fn synthetic_model_text(states: usize, transitions: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = synthetic_component_count(states);
    let mut out = String::from("system Synthetic {\n  interface SynthP {\n");
    for m in 0..SYNTH_MESSAGES {
        let _ = writeln!(out, "    in m{m}();");
    }
    out.push_str("  }\n");
    for c in 0..comps {
        let s = states / comps + usize::from(c < states % comps);
        let t = transitions / comps + usize::from(c < transitions % comps);
        component(&mut out, c, s, t, &mut rng);
    }
    out.push_str("}\n");
    out
}

struct Region {
    /// Id of the containing state; `None` for the root.
    owner: Option<String>,
    initial: Option<String>,
    /// Basic and composite children.
    children: Vec<String>,
    body: String,
}

fn component(out: &mut String, c: usize, states: usize, transitions: usize, rng: &mut ChaCha8Rng) {
    let mut regions = vec![Region {
        owner: None,
        initial: Some(format!("c{c}_i")),
        children: vec![],
        body: String::new(),
    }];
    let mut left = states.saturating_sub(1);
    let mut k = 0;
    // composites of one initial and five basic states, the rest at the root
    while left >= 12 {
        let id = format!("c{c}_g{k}");
        let has_initial = (c + k) % 4 != 3;
        let mut region = Region {
            owner: Some(id.clone()),
            initial: has_initial.then(|| format!("{id}_i")),
            children: vec![],
            body: String::new(),
        };
        for b in 0..5 {
            region.children.push(format!("{id}_s{b}"));
        }
        regions[0].children.push(id);
        left -= 6 + usize::from(has_initial);
        regions.push(region);
        k += 1;
    }
    for b in 0..left {
        regions[0].children.push(format!("c{c}_s{b}"));
    }
    let mut lines: Vec<String> = Vec::new();
    let mut n = 0;
    let mut used: std::collections::HashSet<(String, usize)> = std::collections::HashSet::new();
    for r in &regions {
        if let (Some(i), Some(first)) = (&r.initial, r.children.first()) {
            if n < transitions {
                lines.push(format!("transition c{c}_t{n}: {i} -> {first};"));
                n += 1;
            }
        }
    }
    let mut attempts = 0;
    while n < transitions && attempts < transitions * 20 {
        attempts += 1;
        let r = &regions[rng.random_range(0..regions.len())];
        if r.children.len() < 2 {
            continue;
        }
        let src = &r.children[rng.random_range(0..r.children.len())];
        let des = &r.children[rng.random_range(0..r.children.len())];
        let m = rng.random_range(0..SYNTH_MESSAGES);
        if !used.insert((src.clone(), m)) {
            continue;
        }
        let action = if n % 3 == 0 { " / { n = n + 1; }" } else { "" };
        lines.push(format!("transition c{c}_t{n}: {src} -> {des} on m{m}{action};"));
        n += 1;
    }
    let _ = writeln!(out, "  @level partial\n  component C{c} {{\n    port p: SynthP;\n    var n: int = 0;");
    let _ = writeln!(out, "    statemachine C{c}SM {{");
    let mut body = String::new();
    for r in regions.iter_mut().rev() {
        let mut text = String::new();
        if let Some(i) = &r.initial {
            let _ = writeln!(text, "initial {i};");
        }
        for ch in &r.children {
            if ch.contains("_g") && !ch.contains("_s") {
                continue;
            }
            let _ = writeln!(text, "state {ch};");
        }
        r.body = text;
    }
    let root = &regions[0];
    if let Some(i) = &root.initial {
        let _ = writeln!(body, "      initial {i};");
    }
    for ch in &root.children {
        match regions.iter().find(|r| r.owner.as_deref() == Some(ch.as_str())) {
            Some(r) => {
                let _ = writeln!(body, "      composite {ch} {{");
                for l in r.body.lines() {
                    let _ = writeln!(body, "        {l}");
                }
                body.push_str("      }\n");
            }
            None => {
                let _ = writeln!(body, "      state {ch};");
            }
        }
    }
    for l in lines {
        let _ = writeln!(body, "      {l}");
    }
    out.push_str(&body);
    out.push_str("    }\n  }\n");
}

/// A rule script of `count` rules over `components` x `states`, each with
/// `lines` lines: header, assignments, a `select` and the closing brace.
pub fn synthetic_rules_text(count: usize, lines: usize, components: usize, states: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(count * lines * 16);
    for r in 0..count {
        let c = rng.random_range(0..components.max(1));
        let s = rng.random_range(0..states.max(1));
        let m = rng.random_range(0..SYNTH_MESSAGES);
        let _ = writeln!(out, "rule r{r} where state C{c}.c{c}_s{s} when (receipt(m{m})) {{");
        for l in 0..lines.saturating_sub(3) {
            let _ = writeln!(out, "    v{} = {} + {}", l % 7, l, r % 11);
        }
        let _ = writeln!(out, "    select state c{c}_s{}\n}}", (s + 1) % states.max(1));
    }
    out
}

/// Random decision contexts matching [`synthetic_rules_text`] names.
pub fn random_contexts(count: usize, components: usize, states: usize, seed: u64) -> Vec<(DecisionContext, Env)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = rng.random_range(0..components.max(1));
            let s = format!("c{c}_s{}", rng.random_range(0..states.max(1)));
            let m = rng.random_range(0..SYNTH_MESSAGES);
            let ctx = DecisionContext {
                component: format!("C{c}"),
                dec_point: StateId::new(format!("__pmx_dec_C{c}SM")),
                gamma: Configuration {
                    sigma: StateId::new(s.clone()),
                    env: Env::new(),
                    history: Default::default(),
                },
                state_label: s,
                last_message: Some(MessageRef::new("p", format!("m{m}"))),
                options: vec![],
            };
            (ctx, Env::new())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_model;

    #[test]
    fn synthetic_model_has_the_requested_size() {
        let m = parse_model(&synthetic_model_text(350, 620, 1)).unwrap();
        let hsms: Vec<_> = m.components.iter().filter_map(|c| c.behavior.as_ref()).collect();
        let states: usize = hsms.iter().map(|h| h.states.len() - 1).sum();
        let transitions: usize = hsms.iter().map(|h| h.transitions.len()).sum();
        assert_eq!(states, 350);
        assert_eq!(transitions, 620);
    }

    #[test]
    fn synthetic_rules_parse() {
        let set = crate::rules::parse_rules(&synthetic_rules_text(20, 10, 10, 13, 1)).unwrap();
        assert_eq!(set.len(), 20);
    }
}
