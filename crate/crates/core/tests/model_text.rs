//! Helper queries on the shipped fixture and text round-trips.

use std::collections::BTreeSet;

use proptest::prelude::*;

use pmx_core::analysis::Setting;
use pmx_core::experiment::{mutate, synthetic_model_text};
use pmx_core::model::{Hsm, MessageRef, SystemModel};
use pmx_core::refine::refine_model;
use pmx_core::text::{parse_model, serialize};

fn traffic_light() -> SystemModel {
    parse_model(pmx_core::TRAFFIC_LIGHT).unwrap()
}

fn ctrsm(m: &SystemModel) -> &Hsm {
    m.component("CTR").unwrap().behavior.as_ref().unwrap()
}

fn ids<'a>(it: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    it.into_iter().map(str::to_string).collect()
}

#[test]
fn fixture_has_the_published_structure() {
    let m = traffic_light();
    let names: Vec<&str> = m.components.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["UC", "CTR", "SLD"]);
    let msgs = |i: &str| -> Vec<String> {
        m.interface(i).unwrap().messages.iter().map(|x| x.name.clone()).collect()
    };
    assert_eq!(msgs("ControlP"), ["on", "off"]);
    assert_eq!(msgs("StopLightP"), ["red", "green", "yellow", "on", "off"]);
}

#[test]
fn helper_functions_reproduce_the_published_examples() {
    let m = traffic_light();
    let uc = m.component("UC").unwrap();
    let inp: BTreeSet<String> = m.inp(uc).iter().map(|r| r.message.clone()).collect();
    assert_eq!(inp, ids(["on", "off"]));

    let h = ctrsm(&m);
    let in_t: BTreeSet<String> = h.in_t("en1").map(|t| t.id.to_string()).collect();
    assert_eq!(in_t, ids(["t12"]));
    let out_t: BTreeSet<String> = h.out_t("en1").map(|t| t.id.to_string()).collect();
    assert_eq!(out_t, ids(["t21"]));
    let handled: BTreeSet<String> = h.handled("s11").unwrap().iter().map(|r| r.message.clone()).collect();
    assert_eq!(handled, ids(["on"]));

    let root = h.root_id().to_string();
    let below: BTreeSet<String> = h.descendants(&root).unwrap().iter().map(|s| s.to_string()).collect();
    assert_eq!(below, ids(["s11", "s21", "s22", "s23", "en1", "in11", "c11"]));

    assert_eq!(h.parent("s21").unwrap().map(|p| p.to_string()), Some("c11".to_string()));
    let parents: Vec<String> = h.parents("s21").unwrap().iter().map(|s| s.to_string()).collect();
    assert_eq!(parents, ["c11".to_string(), root.clone()]);

    assert!(h.deadlock("s23").unwrap());
    assert!(!h.deadlock("s11").unwrap());

    let on = MessageRef::new("UCPort", "on");
    let timeout = MessageRef::new("timer", "timeout");
    assert!(h.next_t("s21", &on).unwrap().is_none());
    assert_eq!(h.next_t("s21", &timeout).unwrap().map(|t| t.id.to_string()), Some("t22".into()));

    let t13 = h.transition("t13").unwrap();
    let up: Vec<String> = h.up_s("s21", t13).unwrap().iter().map(|s| s.to_string()).collect();
    assert_eq!(up, ["s21", "c11"]);
}

#[test]
fn shipped_models_round_trip() {
    for (name, src) in pmx_core::EXAMPLES {
        let m = parse_model(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let text = serialize(&m);
        let back = parse_model(&text).unwrap();
        assert_eq!(back, m, "{name}");
        assert_eq!(serialize(&back), text, "{name}");
    }
}

#[test]
fn refined_models_with_reserved_names_round_trip() {
    for (name, src) in pmx_core::EXAMPLES {
        let m = parse_model(src).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        let text = serialize(&r.model);
        let back = parse_model(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(back, r.model, "{name}");
    }
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_model("system S {\n  component C {\n    var x: int = ;\n  }\n}").unwrap_err();
    assert!(err.to_string().contains("3:"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_models_round_trip(states in 20usize..90, extra in 0usize..60, seed in 0u64..1000) {
        let m = parse_model(&synthetic_model_text(states, states + extra, seed)).unwrap();
        let text = serialize(&m);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(serialize(&back), text);
    }

    #[test]
    fn mutants_round_trip(percent in 0u32..=90, seed in 0u64..500, base in 0usize..3) {
        let m = parse_model(pmx_core::EXAMPLES[base].1).unwrap();
        let mutant = mutate(&m, percent, seed).unwrap();
        let back = parse_model(&serialize(&mutant)).unwrap();
        prop_assert_eq!(back, mutant);
    }
}
