//! Execution of complete models: timer-driven cycling, limits and
//! determinism.

use pmx_core::model::SystemModel;
use pmx_core::runtime::{HaltReason, RunOptions, SystemRun, TraceRecord, UnexpectedPolicy};
use pmx_core::rules::parse_rules;
use pmx_core::session::{Mode, ScriptedSource, Session};
use pmx_core::text::parse_model;

/// The traffic light with yellow returning to red and every component
/// complete.
fn cycling_light() -> SystemModel {
    let src = pmx_core::TRAFFIC_LIGHT
        .replace("@level partial\n  component CTR", "@level complete\n  component CTR")
        .replace(
            "transition t23: s22 -> s23 on timeout;",
            "transition t23: s22 -> s23 on timeout;\n      transition t24: s23 -> s21 on timeout;",
        );
    parse_model(&src).unwrap()
}

fn run(opts: RunOptions, switch_on: bool) -> (Vec<TraceRecord>, HaltReason) {
    let mut r = SystemRun::new(cycling_light(), opts);
    if switch_on {
        r.inject("CTR", Some("on"), vec![]).unwrap();
    }
    let mut s = Session::new(Mode::Batch, parse_rules("").unwrap(), ScriptedSource::default());
    let h = s.run(&mut r).unwrap();
    (r.trace().to_vec(), h)
}

fn ctr_states(trace: &[TraceRecord]) -> Vec<(String, u64)> {
    trace
        .iter()
        .filter(|r| r.component == "CTR" && r.rule != 0)
        .map(|r| (r.to.clone(), r.vtime))
        .collect()
}

#[test]
fn timer_drives_the_light_through_its_cycle() {
    let (trace, halted) = run(
        RunOptions {
            max_vtime: Some(30),
            ..RunOptions::default()
        },
        true,
    );
    assert_eq!(halted, HaltReason::MaxVTime);
    let states: Vec<(String, u64)> = ctr_states(&trace)
        .into_iter()
        .filter(|(s, _)| ["s21", "s22", "s23"].contains(&s.as_str()))
        .collect();
    let expected: Vec<(String, u64)> = [("s21", 0), ("s22", 5), ("s23", 10), ("s21", 12), ("s22", 17), ("s23", 22), ("s21", 24), ("s22", 29)]
        .iter()
        .map(|(s, t)| (s.to_string(), *t))
        .collect();
    assert_eq!(states, expected);
    let cycles = trace.iter().filter(|r| r.actions.contains(&"act:t22".to_string())).count();
    assert_eq!(cycles, 3);
}

#[test]
fn light_sends_every_colour_to_the_driver() {
    let (trace, _) = run(
        RunOptions {
            max_vtime: Some(12),
            ..RunOptions::default()
        },
        true,
    );
    let received: Vec<&str> = trace
        .iter()
        .filter(|r| r.component == "SLD")
        .filter_map(|r| r.message.as_deref())
        .collect();
    assert_eq!(received, ["ctrl.off", "ctrl.on", "ctrl.red", "ctrl.green", "ctrl.yellow", "ctrl.red"]);
}

#[test]
fn without_input_the_light_stays_off_and_quiesces() {
    let (trace, halted) = run(RunOptions::default(), false);
    assert_eq!(halted, HaltReason::Quiescent);
    assert_eq!(ctr_states(&trace).last().unwrap().0, "s11");
}

#[test]
fn step_limit_counts_every_trace_record() {
    let limited = |n, switch_on| {
        run(
            RunOptions {
                max_steps: Some(n),
                ..RunOptions::default()
            },
            switch_on,
        )
    };
    assert_eq!(limited(0, false), (vec![], HaltReason::MaxSteps));
    // an injection is a numbered step too
    for n in [1, 4, 7] {
        let (trace, halted) = limited(n, true);
        assert_eq!(halted, HaltReason::MaxSteps);
        assert_eq!(trace.len(), n);
        assert_eq!(trace[0].outcome.as_deref(), Some("inject UCPort.on"));
    }
}

#[test]
fn unexpected_message_policy_decides_between_stuck_and_drop() {
    let outcome = |policy| {
        let mut r = SystemRun::new(
            cycling_light(),
            RunOptions {
                policy,
                ..RunOptions::default()
            },
        );
        r.inject("CTR", Some("off"), vec![]).unwrap();
        let mut s = Session::new(Mode::Batch, parse_rules("").unwrap(), ScriptedSource::default());
        s.run(&mut r).unwrap();
        r.trace()
            .iter()
            .filter(|x| x.component == "CTR")
            .filter_map(|x| x.outcome.clone().map(|o| (x.rule, o)))
            .collect::<Vec<_>>()
    };
    let stuck = outcome(UnexpectedPolicy::Stuck);
    assert!(stuck.iter().any(|(rule, o)| *rule == 5 && o.starts_with("stuck")), "{stuck:?}");
    let dropped = outcome(UnexpectedPolicy::Drop);
    assert!(!dropped.iter().any(|(_, o)| o.starts_with("stuck")), "{dropped:?}");
}

#[test]
fn same_seed_gives_the_same_trace() {
    let opts = RunOptions {
        max_vtime: Some(40),
        seed: 11,
        ..RunOptions::default()
    };
    assert_eq!(run(opts.clone(), true), run(opts, true));
}
