//! Mutation fuzzing, refinement invariants over mutants and the overhead
//! trend.

use proptest::prelude::*;

use pmx_core::analysis::analyze;
use pmx_core::experiment::{
    element_counts, mutate, overhead_sweep, partial_setting, synthetic_model_text, Overhead,
};
use pmx_core::model::{validate, SystemModel};
use pmx_core::par::ExecMode;
use pmx_core::refine::refine_model;
use pmx_core::text::parse_model;

fn bases() -> Vec<(String, SystemModel)> {
    pmx_core::EXAMPLES
        .iter()
        .map(|(n, s)| (n.to_string(), parse_model(s).unwrap()))
        .collect()
}

#[test]
fn mutants_of_every_seed_stay_analyzable_and_refinable() {
    for (name, base) in bases() {
        for seed in 1..=100u64 {
            let percent = (seed as u32 * 7) % 91;
            let m = mutate(&base, percent, seed).unwrap();
            validate(&m).unwrap_or_else(|v| panic!("{name} {percent}% seed {seed}: {v:?}"));
            let st = partial_setting(&m);
            analyze(&m, &st).unwrap();
            let r = refine_model(&m, &st).unwrap_or_else(|e| panic!("{name} {percent}% seed {seed}: {e}"));
            validate(&r.model).unwrap_or_else(|v| panic!("{name} {percent}% seed {seed}: {v:?}"));
        }
    }
}

#[test]
fn added_transitions_grow_with_removal_and_outnumber_added_states() {
    let mut corpus = bases();
    for k in 1..=3u64 {
        corpus.push((format!("synthetic{k}"), parse_model(&synthetic_model_text(140, 248, k)).unwrap()));
    }
    let levels: Vec<u32> = (1..=9).map(|x| x * 10).collect();
    let seeds: Vec<u64> = (1..=30).collect();
    let rep = overhead_sweep(&corpus, &levels, &seeds, ExecMode::Auto);
    assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    assert!(rep.transitions_non_decreasing(), "{:?}", rep.levels);
    assert!(rep.transitions_exceed_states(), "{:?}", rep.levels);
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let corpus = bases();
    let levels = [20, 60];
    let seeds = [1, 2, 3];
    let a = overhead_sweep(&corpus, &levels, &seeds, ExecMode::Sequential);
    let b = overhead_sweep(&corpus, &levels, &seeds, ExecMode::Auto);
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn removal_meets_the_quota(percent in 0u32..=90, seed in any::<u64>(), base in 0usize..3) {
        let m = parse_model(pmx_core::EXAMPLES[base].1).unwrap();
        let (s0, t0) = element_counts(&m);
        let mutant = mutate(&m, percent, seed).unwrap();
        let (s1, t1) = element_counts(&mutant);
        let quota = ((s0 + t0) * percent as usize).div_ceil(100);
        prop_assert!(s1 <= s0 && t1 <= t0);
        prop_assert!((s0 + t0) - (s1 + t1) >= quota);
        prop_assert_eq!(mutate(&m, percent, seed).unwrap(), mutant);
    }

    #[test]
    fn refinement_only_adds_elements(percent in 0u32..=90, seed in any::<u64>(), base in 0usize..3) {
        let m = mutate(&parse_model(pmx_core::EXAMPLES[base].1).unwrap(), percent, seed).unwrap();
        let st = partial_setting(&m);
        let r = refine_model(&m, &st).unwrap();
        prop_assert_eq!(r.model.components.len(), m.components.len() + 1);
        for c in m.components.iter() {
            let Some(h) = &c.behavior else { continue };
            let rh = r.model.component(&c.name).unwrap().behavior.as_ref().unwrap();
            for s in h.states.keys() {
                prop_assert!(rh.states.contains_key(s), "{}.{} lost", c.name, s);
            }
            for t in h.transitions.keys() {
                prop_assert!(rh.transitions.contains_key(t), "{}.{} lost", c.name, t);
            }
        }
        let o = Overhead::of(&m, &r);
        prop_assert!(o.added_states + o.original_states >= o.original_states);
    }
}
