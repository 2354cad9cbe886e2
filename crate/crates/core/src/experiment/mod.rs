//! Experiment harness: seeded mutants, refinement overhead per removal
//! level, synthetic workloads and timing statistics.

mod mutate;
mod synth;

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::analysis::Setting;
use crate::model::{Completeness, SystemModel};
use crate::par::{self, ExecMode};
use crate::refine::{refine_model, Refined};

pub use mutate::{mutate, MutateError};
pub use synth::{
    random_contexts, synthetic_component_count, synthetic_model_text, synthetic_rules_text, SYNTH_MESSAGES,
};

/// States and transitions of all state machines, roots excluded.
pub fn element_counts(model: &SystemModel) -> (usize, usize) {
    model
        .components
        .iter()
        .filter_map(|c| c.behavior.as_ref())
        .fold((0, 0), |(s, t), h| (s + h.states.len() - 1, t + h.transitions.len()))
}

/// Elements added by refinement relative to the original model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overhead {
    pub original_states: usize,
    pub original_transitions: usize,
    pub added_states: usize,
    pub added_transitions: usize,
}

impl Overhead {
    /// Counts added elements of user components; the debug agent is left
    /// out since it does not depend on the model.
    pub fn of(original: &SystemModel, refined: &Refined) -> Self {
        let (original_states, original_transitions) = element_counts(original);
        let mut added_states = 0;
        let mut added_transitions = 0;
        for comp in &refined.model.components {
            if comp.name == refined.metadata.dbg_agent {
                continue;
            }
            let (Some(h), Some(meta)) = (&comp.behavior, refined.metadata.components.get(&comp.name)) else {
                continue;
            };
            let root = h.root_id();
            added_states += meta.added.iter().filter(|a| h.states.contains_key(a.as_str()) && *a != root.as_str()).count();
            added_transitions += meta.added.iter().filter(|a| h.transitions.contains_key(a.as_str())).count();
        }
        Overhead {
            original_states,
            original_transitions,
            added_states,
            added_transitions,
        }
    }

    pub fn state_percent(&self) -> Option<f64> {
        percent(self.added_states, self.original_states)
    }

    pub fn transition_percent(&self) -> Option<f64> {
        percent(self.added_transitions, self.original_transitions)
    }
}

fn percent(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

/// Setting marking every component with a state machine as partial.
pub fn partial_setting(model: &SystemModel) -> Setting {
    let mut s = Setting::default();
    for c in &model.components {
        let level = if c.behavior.is_some() { Completeness::Partial } else { c.level };
        s.0.insert(c.name.clone(), level);
    }
    s
}

/// Median of the samples; `None` when empty.
pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Summary of one removal level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub percent: u32,
    pub mutants: usize,
    pub median_state_percent: f64,
    pub median_transition_percent: f64,
}

/// A mutant that could not be refined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub base: String,
    pub percent: u32,
    pub seed: u64,
    pub error: String,
}

/// Result of [`overhead_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub levels: Vec<LevelSummary>,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    /// Median added-transition percentage never drops as removal grows.
    pub fn transitions_non_decreasing(&self) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].median_transition_percent >= w[0].median_transition_percent)
    }

    /// At every level more transitions than states are added, relatively.
    pub fn transitions_exceed_states(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.median_transition_percent > l.median_state_percent)
    }
}

/// Refines `seeds` mutants of every base model at every removal level,
/// with all behaviour-carrying components partial, and reports the median
/// overhead per level. Mutants left without elements are skipped.
pub fn overhead_sweep(bases: &[(String, SystemModel)], levels: &[u32], seeds: &[u64], mode: ExecMode) -> SweepReport {
    let jobs: Vec<(usize, u32, u64)> = bases
        .iter()
        .enumerate()
        .flat_map(|(b, _)| levels.iter().flat_map(move |l| seeds.iter().map(move |s| (b, *l, *s))))
        .collect();
    let results = par::map(mode, &jobs, |(b, level, seed)| {
        let base = &bases[*b].1;
        let m = mutate(base, *level, *seed).map_err(|e| e.to_string())?;
        let r = refine_model(&m, &partial_setting(&m)).map_err(|e| e.to_string())?;
        Ok::<_, String>(Overhead::of(&m, &r))
    });
    let mut failures = Vec::new();
    let mut levels_out = Vec::new();
    for level in levels {
        let mut sp = Vec::new();
        let mut tp = Vec::new();
        for ((b, l, seed), r) in jobs.iter().zip(&results) {
            if l != level {
                continue;
            }
            match r {
                Ok(o) => {
                    if let (Some(s), Some(t)) = (o.state_percent(), o.transition_percent()) {
                        sp.push(s);
                        tp.push(t);
                    }
                }
                Err(e) => failures.push(SweepFailure {
                    base: bases[*b].0.clone(),
                    percent: *l,
                    seed: *seed,
                    error: e.clone(),
                }),
            }
        }
        levels_out.push(LevelSummary {
            percent: *level,
            mutants: sp.len(),
            median_state_percent: median(&sp).unwrap_or(0.0),
            median_transition_percent: median(&tp).unwrap_or(0.0),
        });
    }
    SweepReport {
        levels: levels_out,
        failures,
    }
}

/// Minimum, median and maximum of repeated timings, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub runs: usize,
    pub min_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
}

impl Timing {
    pub fn from_durations(d: &[Duration]) -> Self {
        let ms: Vec<f64> = d.iter().map(|d| d.as_secs_f64() * 1000.0).collect();
        Timing {
            runs: ms.len(),
            min_ms: ms.iter().copied().fold(f64::INFINITY, f64::min),
            median_ms: median(&ms).unwrap_or(0.0),
            max_ms: ms.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Times `runs` calls of `f`.
pub fn time_runs<R>(runs: usize, mut f: impl FnMut() -> R) -> Timing {
    let mut d = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        std::hint::black_box(f());
        d.push(start.elapsed());
    }
    Timing::from_durations(&d)
}

/// Size of the largest state machine as counted by the oracle bounds.
pub fn largest_machine(model: &SystemModel) -> usize {
    model
        .components
        .iter()
        .filter_map(|c| c.behavior.as_ref())
        .map(crate::oracle::state_count)
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_model;

    #[test]
    fn median_of_even_and_odd_samples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn traffic_light_overhead_counts_added_elements() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &partial_setting(&m)).unwrap();
        let o = Overhead::of(&m, &r);
        assert_eq!(o.original_states, parse_model(crate::TRAFFIC_LIGHT).map(|m| element_counts(&m).0).unwrap());
        assert!(o.added_states > 0 && o.added_transitions > o.added_states);
    }
}
