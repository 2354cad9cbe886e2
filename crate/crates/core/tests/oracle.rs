//! Bounded checks on the fixtures, including deliberately broken
//! refinements the checks must reject.

use pmx_core::analysis::Setting;
use pmx_core::model::{MessageRef, SystemModel};
use pmx_core::oracle::{
    check_progress, check_reachability, check_simulation, cross_check, enumerate_traces, reach_targets, run_checks,
    Bounds, Check,
};
use pmx_core::refine::{refine_model, Refined, DEC_PREFIX};
use pmx_core::runtime::UnexpectedPolicy;
use pmx_core::text::{parse_expr_str, parse_model};

fn model(src: &str) -> SystemModel {
    parse_model(src).unwrap()
}

fn refined(m: &SystemModel) -> Refined {
    refine_model(m, &Setting::default()).unwrap()
}

fn labels(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn controller_traces_at_depth_two() {
    let m = model(pmx_core::TRAFFIC_LIGHT);
    let set = enumerate_traces(&m, "CTR", None, 2, &Bounds::default()).unwrap();
    // one path survives two inputs: on, then timeout; every other input is
    // unexpected and ends the path
    let longest = labels(&["entry:s11", "act:t12", "entry:s21", "act:t22", "entry:s22"]);
    assert_eq!(set.len(), 6);
    assert_eq!(set.maximal(), vec![&longest]);
}

#[test]
fn restricted_alphabet_limits_the_traces() {
    let m = model(pmx_core::TRAFFIC_LIGHT);
    let only_on = [MessageRef::new("UCPort", "on")];
    let set = enumerate_traces(&m, "CTR", Some(&only_on), 3, &Bounds::default()).unwrap();
    assert_eq!(set.maximal(), vec![&labels(&["entry:s11", "act:t12", "entry:s21"])]);
}

#[test]
fn every_fixture_passes_every_check() {
    for (name, src) in pmx_core::EXAMPLES {
        let m = model(src);
        let r = refined(&m);
        let original = Setting::default().apply(&m).unwrap();
        for c in run_checks(&original, &r, Check::All, 4, UnexpectedPolicy::Stuck, &Bounds::default()) {
            assert!(c.passed(), "{name}: {:?}", c.failures());
        }
    }
}

#[test]
fn refined_fixtures_make_progress_when_unexpected_messages_are_dropped() {
    for (name, src) in pmx_core::EXAMPLES {
        let m = model(src);
        let r = refined(&m);
        for c in m.components.iter().filter(|c| c.behavior.is_some()) {
            let p = check_progress(&r.model, &c.name, 4, UnexpectedPolicy::Drop, &Bounds::default()).unwrap();
            assert!(p.passed(), "{name}.{}: {:?}", c.name, p.stuck);
            let x = cross_check(&r.model, &c.name, 3, UnexpectedPolicy::Drop, &Bounds::default()).unwrap();
            assert!(x.passed(), "{name}.{}: {:?}", c.name, x.divergences);
        }
    }
}

#[test]
fn unrefined_vending_machine_gets_stuck() {
    let m = model(pmx_core::VENDING);
    let p = check_progress(&m, "VM", 4, UnexpectedPolicy::Stuck, &Bounds::default()).unwrap();
    assert!(!p.passed());
}

/// The vending machine's choice with its fallback moved first and made
/// unconditional, so it pre-empts the designed branches.
fn corrupted_vending() -> (SystemModel, Refined) {
    let m = model(pmx_core::VENDING);
    let mut r = refined(&m);
    let h = r.model.component_mut("VM").unwrap().behavior.as_mut().unwrap();
    let id = h
        .transitions
        .values()
        .find(|t| t.src.as_str() == "enough" && t.des.as_str().starts_with(DEC_PREFIX))
        .expect("the choice has a fallback")
        .id
        .clone();
    let (idx, _, t) = h.transitions.get_full_mut(id.as_str()).unwrap();
    t.guard = Some(parse_expr_str("true").unwrap());
    h.transitions.move_index(idx, 0);
    (m, r)
}

#[test]
fn unconditional_fallback_breaks_simulation() {
    let (m, r) = corrupted_vending();
    let sim = check_simulation(&m, &r, "VM", 4, &Bounds::default()).unwrap();
    let cx = sim.counterexample.expect("the corrupted choice diverges");
    assert!(!cx.inputs.is_empty());
}

#[test]
fn faithful_fallback_keeps_simulation() {
    let m = model(pmx_core::VENDING);
    let r = refined(&m);
    let sim = check_simulation(&m, &r, "VM", 4, &Bounds::default()).unwrap();
    assert!(sim.passed(), "{:?}", sim.counterexample);
}

#[test]
fn reachability_witnesses_lead_to_their_targets() {
    let m = model(pmx_core::TRAFFIC_LIGHT);
    let r = refined(&m);
    let h = r.model.component("CTR").unwrap().behavior.as_ref().unwrap();
    let targets = reach_targets(h, r.metadata.components.get("CTR"));
    assert!(targets.states.contains("s23") && targets.transitions.contains("t13"));
    let rep = check_reachability(&r.model, "CTR", "s23", &targets, &Bounds::default()).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert!(rep.witnesses.contains_key("s21"));
}

#[test]
fn large_machines_are_refused() {
    let m = model(pmx_core::TRAFFIC_LIGHT);
    let tight = Bounds {
        max_states: 3,
        ..Bounds::default()
    };
    assert!(check_progress(&m, "CTR", 2, UnexpectedPolicy::Stuck, &tight).is_err());
}
