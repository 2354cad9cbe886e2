//! Problematic element sets and the refined structure of the fixtures.

use pmx_core::analysis::{analyze, Setting};
use pmx_core::model::{validate, StateKind, SystemModel};
use pmx_core::refine::{refine_model, DEC_PREFIX};
use pmx_core::text::{parse_model, serialize};

fn traffic_light() -> SystemModel {
    parse_model(pmx_core::TRAFFIC_LIGHT).unwrap()
}

fn setting() -> Setting {
    "CTR=partial,UC=absent,SLD=complete".parse().unwrap()
}

fn component_block<'a>(text: &'a str, name: &str) -> &'a str {
    let head = format!("  component {name} {{");
    let start = text.find(&head).unwrap();
    let end = start + text[start..].find("\n  }\n").unwrap() + 5;
    &text[start..end]
}

#[test]
fn yellow_is_a_deadlock_and_without_outgoing_transitions() {
    let r = analyze(&traffic_light(), &setting()).unwrap();
    let ctr = r.component("CTR").unwrap();
    assert!(ctr.p4.iter().any(|s| s.as_str() == "s23"), "{ctr:?}");
    assert!(ctr.p11.iter().any(|s| s.as_str() == "s23"), "{ctr:?}");
    assert!(ctr.p8);
    assert!(ctr.p10.iter().any(|t| t.as_str() == "t13"));
    assert!(!r.component("SLD").unwrap().p8);
}

#[test]
fn inputs_only_an_absent_component_can_produce_are_reported() {
    let r = analyze(&traffic_light(), &setting()).unwrap();
    let p7: Vec<String> = r.p7().into_iter().collect();
    assert_eq!(p7.len(), 2, "{p7:?}");
    assert!(p7.iter().any(|m| m.ends_with("on")) && p7.iter().any(|m| m.ends_with("off")), "{p7:?}");
}

#[test]
fn every_choice_point_of_a_partial_component_is_flagged() {
    for (name, src) in pmx_core::EXAMPLES {
        let m = parse_model(src).unwrap();
        let r = analyze(&m, &Setting::default()).unwrap();
        for c in m.components.iter().filter(|c| c.level == pmx_core::model::Completeness::Partial) {
            let Some(h) = &c.behavior else { continue };
            let choices: Vec<&str> = h
                .states
                .values()
                .filter(|s| s.kind == StateKind::Choice)
                .map(|s| s.id.as_str())
                .collect();
            let p6: Vec<&str> = r.component(&c.name).unwrap().p6.iter().map(|s| s.as_str()).collect();
            assert_eq!(p6, choices, "{name}.{}", c.name);
        }
    }
}

#[test]
fn refined_controller_matches_the_golden_structure() {
    let r = refine_model(&traffic_light(), &setting()).unwrap();
    let text = serialize(&r.model);
    let golden = include_str!("golden/ctr_refined.pmx");
    assert_eq!(component_block(&text, "CTR"), golden);
}

#[test]
fn refinement_adds_one_component_and_keeps_complete_ones() {
    let m = traffic_light();
    let r = refine_model(&m, &setting()).unwrap();
    validate(&r.model).unwrap();
    assert_eq!(r.model.components.len(), m.components.len() + 1);
    assert_eq!(r.metadata.dbg_agent, "dbg_agent");
    let before = serialize(&m);
    let after = serialize(&r.model);
    assert_eq!(component_block(&before, "SLD"), component_block(&after, "SLD"));
    let uc = r.model.component("UC").unwrap().behavior.as_ref().expect("generic machine");
    assert!(uc.states.values().any(|s| s.kind == StateKind::Choice && s.id.as_str().starts_with(DEC_PREFIX)));
}

#[test]
fn every_composite_gets_its_own_decision_point() {
    let r = refine_model(&traffic_light(), &setting()).unwrap();
    let meta = &r.metadata.components["CTR"];
    let h = r.model.component("CTR").unwrap().behavior.as_ref().unwrap();
    let composites: Vec<String> = h
        .states
        .values()
        .filter(|s| s.kind == StateKind::Composite)
        .map(|s| s.id.to_string())
        .collect();
    for c in &composites {
        let dec = meta.dec_points.get(c.as_str()).unwrap_or_else(|| panic!("no decision point for {c}"));
        assert_eq!(h.parent(dec.as_str()).unwrap().map(|p| p.to_string()).as_ref(), Some(c));
    }
    // yellow now leaves to the composite's decision point, and t13 leaves
    // from the root's
    assert!(h.out_t("s23").any(|t| t.des.as_str() == "__pmx_dec_c11"));
    assert!(h.in_t("__pmx_dec_c11").any(|t| t.src.as_str() == "s23"));
    assert_eq!(h.transition("t13").unwrap().src.as_str(), "__pmx_dec_CTRSM");
}

#[test]
fn refined_models_have_no_stuck_sets_left() {
    for (name, src) in pmx_core::EXAMPLES {
        let m = parse_model(src).unwrap();
        let st = Setting::default();
        let r = refine_model(&m, &st).unwrap();
        let again = analyze(&r.model, &Setting::default()).unwrap();
        for c in r.model.components.iter().filter(|c| c.behavior.is_some()) {
            let rep = again.component(&c.name).unwrap();
            assert!(
                rep.p1.is_empty() && rep.p2.is_empty() && rep.p3.is_empty() && rep.p4.is_empty() && rep.p5.is_empty(),
                "{name}.{}: {rep:?}",
                c.name
            );
        }
    }
}
