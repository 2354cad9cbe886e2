//! Default rules, rule application and replay of recorded decisions.

use pmx_core::analysis::{analyze, Setting};
use pmx_core::refine::{refine_model, Refined};
use pmx_core::rules::{
    apply_rule_to_model, generate_default_rules, parse_rules, save_decisions_as_rules, ApplyError, Where,
};
use pmx_core::runtime::{RunOptions, SystemRun, TraceRecord};
use pmx_core::session::{Mode, ScriptedSource, Session, SessionError};
use pmx_core::text::parse_model;
use pmx_core::model::SystemModel;

fn traffic_light() -> SystemModel {
    parse_model(pmx_core::TRAFFIC_LIGHT).unwrap()
}

fn setting() -> Setting {
    "CTR=partial,UC=absent".parse().unwrap()
}

fn refined() -> Refined {
    refine_model(&traffic_light(), &setting()).unwrap()
}

/// CTR rules as `(state, message, body)`.
fn ctr_rules(r: &Refined) -> Vec<(String, Option<String>, String)> {
    let names = ["off", "red", "green", "yellow", "__pmx_init_c11"];
    generate_default_rules(r)
        .rules
        .iter()
        .filter_map(|rule| {
            let Where::State(s) = &rule.at else { return None };
            if !names.contains(&s.as_str()) {
                return None;
            }
            let when = rule.when.as_ref().map(|w| w.to_string());
            Some((s.clone(), when, rule.body[0].to_string()))
        })
        .collect()
}

#[test]
fn default_rules_contain_the_six_published_ones() {
    let r = refined();
    let rules = ctr_rules(&r);
    let all = "select state red|green|yellow|off";
    let single = "select state off using t13";
    let expected = [
        ("off", "receipt(timeout)", single),
        ("off", "receipt(off)", single),
        ("yellow", "receipt(timeout)", all),
        ("yellow", "receipt(off)", all),
        ("red", "receipt(off)", all),
        ("green", "receipt(off)", all),
    ];
    for (state, when, body) in expected {
        assert!(
            rules
                .iter()
                .any(|(s, w, b)| s == state && w.as_deref() == Some(when) && b == body),
            "missing {state} {when} {body} in {rules:?}"
        );
    }
    // the only other controller rules answer `on` inside the composite and
    // its added initial state
    let extra: Vec<_> = rules
        .iter()
        .filter(|(s, w, b)| !expected.iter().any(|(es, ew, eb)| s == es && w.as_deref() == Some(*ew) && b == eb))
        .collect();
    assert_eq!(extra.len(), 4, "{extra:?}");
    for (s, w, b) in extra {
        assert_eq!(b, all);
        assert!(w.as_deref() == Some("receipt(on)") || (s == "__pmx_init_c11" && w.is_none()), "{s} {w:?}");
    }
}

#[test]
fn generated_rules_parse_back_identically() {
    let set = generate_default_rules(&refined());
    let text = set.to_string();
    let back = parse_rules(&text).unwrap();
    assert_eq!(back.to_string(), text);
    assert_eq!(back.len(), set.len());
}

const LISTING: &str = "\
rule r1 where state off when receipt(timeout) { select state off using t13 }
rule r6 where state green receipt(off) { select state red|green|yellow|off }
";

#[test]
fn applying_the_single_choice_rule_makes_t13_takeable() {
    let m = traffic_light();
    let before = analyze(&m, &setting()).unwrap();
    assert!(before.component("CTR").unwrap().p10.iter().any(|t| t.as_str() == "t13"));
    let set = parse_rules(LISTING).unwrap();
    let changed = apply_rule_to_model(&m, set.get("r1").unwrap(), None).unwrap();
    let after = analyze(&changed, &setting()).unwrap();
    assert!(!after.component("CTR").unwrap().p10.iter().any(|t| t.as_str() == "t13"));
    pmx_core::model::validate(&changed).unwrap();
}

#[test]
fn applying_a_multi_choice_rule_is_rejected() {
    let set = parse_rules(LISTING).unwrap();
    let err = apply_rule_to_model(&traffic_light(), set.get("r6").unwrap(), None).unwrap_err();
    assert_eq!(err, ApplyError::MultiStateSelection("r6".into()));
}

fn opts(max_steps: usize) -> RunOptions {
    RunOptions {
        max_steps: Some(max_steps),
        seed: 3,
        ..RunOptions::default()
    }
}

type Outcome = (Vec<TraceRecord>, Session<ScriptedSource>, Result<pmx_core::runtime::HaltReason, SessionError>);

fn interactive(lines: &[&str], max_steps: usize) -> Outcome {
    let r = refined();
    let mut run = SystemRun::for_refined(&r, opts(max_steps));
    let mut s = Session::new(Mode::Interactive, parse_rules("").unwrap(), ScriptedSource::new(lines.to_vec()));
    let h = s.run(&mut run);
    (run.trace().to_vec(), s, h)
}

#[test]
fn saved_decisions_replay_to_the_same_trace() {
    let mut lines = vec!["send ctrPort.on()", "select option 1"];
    lines.extend(std::iter::repeat_n("select state red", 12));
    let (trace, session, halted) = interactive(&lines, 60);
    assert_eq!(halted, Ok(pmx_core::runtime::HaltReason::MaxSteps));
    let recs: Vec<_> = session.records().iter().collect();
    assert!(recs.len() >= 3, "{recs:?}");
    let saved = save_decisions_as_rules(&recs);
    assert!(saved.conflicts.is_empty(), "{:?}", saved.conflicts);

    // the saved rules travel as text
    let rules = parse_rules(&saved.rules.to_string()).unwrap();
    let r = refined();
    let mut run = SystemRun::for_refined(&r, opts(60));
    let mut batch = Session::new(Mode::Batch, rules, ScriptedSource::new(Vec::<String>::new()));
    assert_eq!(batch.run(&mut run), Ok(pmx_core::runtime::HaltReason::MaxSteps));
    assert_eq!(batch.source.prompts, 0);
    assert_eq!(run.trace(), trace.as_slice());
}

#[test]
fn steering_at_yellow_reaches_red_and_drives_the_light() {
    let (trace, _, _) = interactive(&["select option 1", "inject CTR on", "continue", "select state red", "quit"], 100);
    let i = trace
        .iter()
        .position(|r| r.component == "CTR" && r.from == "__pmx_dec_c11")
        .expect("a decision in the composite");
    assert_eq!(trace[i].to, "s21");
    assert!(trace[i].actions.contains(&"entry:s21".to_string()));
    assert!(trace[i..]
        .iter()
        .any(|r| r.component == "SLD" && r.message.as_deref() == Some("ctrl.red")));
}

#[test]
fn session_without_answers_closes_with_a_pending_decision() {
    let (_, _, halted) = interactive(&[], 20);
    assert_eq!(halted, Err(SessionError::Closed));
}

mod selection {
    use pmx_core::experiment::{random_contexts, synthetic_rules_text};
    use pmx_core::rules::{parse_rules, select_rule};
    use proptest::prelude::*;

    const TIERS: &str = "\
rule anywhere where component * { select state random }
rule comp where component C0 { select state random }
rule bare where state c0_s1 when (receipt(m3)) { select state random }
rule exact where state C0.c0_s1 when (receipt(m3)) { select state random }
rule exact_other where state C0.c0_s1 when (receipt(m4)) { select state random }
";

    fn ctx(component: usize, state: usize, message: usize) -> pmx_core::runtime::DecisionContext {
        let (mut ctx, _) = random_contexts(1, 1, 1, 0).pop().unwrap();
        ctx.component = format!("C{component}");
        ctx.gamma.sigma = pmx_core::model::StateId::new(format!("c0_s{state}"));
        ctx.state_label = format!("c0_s{state}");
        ctx.last_message = Some(pmx_core::model::MessageRef::new("p", format!("m{message}")));
        ctx
    }

    fn picked(set: &pmx_core::rules::RuleSet, c: usize, s: usize, m: usize) -> Option<String> {
        select_rule(set, &ctx(c, s, m), &Default::default()).map(|r| r.name.clone())
    }

    #[test]
    fn most_specific_where_wins() {
        let set = parse_rules(TIERS).unwrap();
        assert_eq!(picked(&set, 0, 1, 3).as_deref(), Some("exact"));
        assert_eq!(picked(&set, 0, 1, 4).as_deref(), Some("exact_other"));
        assert_eq!(picked(&set, 0, 1, 5).as_deref(), Some("comp"));
        assert_eq!(picked(&set, 1, 1, 3).as_deref(), Some("bare"));
        assert_eq!(picked(&set, 1, 2, 3).as_deref(), Some("anywhere"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rule_text_round_trips(count in 1usize..40, lines in 3usize..12, seed in any::<u64>()) {
            let text = synthetic_rules_text(count, lines, 4, 6, seed);
            let set = parse_rules(&text).unwrap();
            prop_assert_eq!(set.len(), count);
            let again = parse_rules(&set.to_string()).unwrap();
            prop_assert_eq!(again.to_string(), set.to_string());
        }

        #[test]
        fn selected_rule_is_applicable_and_first_of_its_tier(seed in any::<u64>()) {
            let set = parse_rules(&synthetic_rules_text(60, 4, 3, 5, seed)).unwrap();
            for (ctx, env) in random_contexts(40, 3, 5, seed ^ 1) {
                let expected = set.rules.iter().find(|r| {
                    r.at.to_string() == format!("state {}.{}", ctx.component, ctx.state_label)
                        && r.when.as_ref().map(|w| w.to_string())
                            == Some(format!("receipt({})", ctx.last_message.as_ref().unwrap().message))
                });
                let got = select_rule(&set, &ctx, &env);
                prop_assert_eq!(got.map(|r| &r.name), expected.map(|r| &r.name));
            }
        }
    }
}
