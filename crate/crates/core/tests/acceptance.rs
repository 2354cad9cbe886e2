//! Acceptance suite: one PASS or FAIL line per criterion, each with its
//! measured time against its budget. Exits non-zero when any criterion
//! fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pmx_core::analysis::{analyze, analyze_with, Setting};
use pmx_core::experiment::{
    mutate, overhead_sweep, partial_setting, random_contexts, synthetic_component_count, synthetic_model_text,
    synthetic_rules_text, time_runs, Timing,
};
use pmx_core::model::{validate, Completeness, MessageRef, StateKind, SystemModel};
use pmx_core::oracle::{check_progress, cross_check, run_checks, state_count, Bounds, Check};
use pmx_core::par::ExecMode;
use pmx_core::refine::{refine_model, Refined};
use pmx_core::rules::{
    apply_rule_to_model, generate_default_rules, parse_rules, save_decisions_as_rules, select_rule, ApplyError, Where,
};
use pmx_core::runtime::{HaltReason, RunOptions, SystemRun, UnexpectedPolicy};
use pmx_core::session::{Mode, ScriptedSource, Session};
use pmx_core::text::{parse_model, serialize};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn traffic_light() -> SystemModel {
    parse_model(pmx_core::TRAFFIC_LIGHT).expect("the shipped model parses")
}

fn ctr_setting() -> Setting {
    "CTR=partial,UC=absent,SLD=complete".parse().expect("valid setting")
}

fn ctr_refined() -> Refined {
    refine_model(&traffic_light(), &ctr_setting()).expect("the shipped model refines")
}

fn set_of<'a>(it: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    it.into_iter().map(str::to_string).collect()
}

fn helper_functions() -> Outcome {
    let m = traffic_light();
    let uc = m.component("UC").ok_or("no UC")?;
    let h = m
        .component("CTR")
        .and_then(|c| c.behavior.as_ref())
        .ok_or("no CTR machine")?;
    let root = h.root_id().to_string();
    let on = MessageRef::new("UCPort", "on");
    let timeout = MessageRef::new("timer", "timeout");
    let e = |e: pmx_core::model::QueryError| e.to_string();
    let t13 = h.transition("t13").ok_or("no t13")?;
    let examples: Vec<(&str, bool)> = vec![
        ("inp(UC)", m.inp(uc).iter().map(|r| r.message.as_str()).collect::<BTreeSet<_>>() == ["on", "off"].into()),
        ("in_t(en1)", h.in_t("en1").map(|t| t.id.to_string()).collect::<BTreeSet<_>>() == set_of(["t12"])),
        ("out_t(en1)", h.out_t("en1").map(|t| t.id.to_string()).collect::<BTreeSet<_>>() == set_of(["t21"])),
        (
            "handled(s11)",
            h.handled("s11").map_err(e)?.iter().map(|r| r.message.as_str()).collect::<BTreeSet<_>>() == ["on"].into(),
        ),
        (
            "child(root)",
            h.descendants(&root).map_err(e)?.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>()
                == set_of(["s11", "s21", "s22", "s23", "en1", "in11", "c11"]),
        ),
        ("parent(s21)", h.parent("s21").map_err(e)?.map(|p| p.to_string()).as_deref() == Some("c11")),
        (
            "parents(s21)",
            h.parents("s21").map_err(e)?.iter().map(|s| s.to_string()).collect::<Vec<_>>() == ["c11".to_string(), root],
        ),
        ("deadlock(s23)", h.deadlock("s23").map_err(e)?),
        ("deadlock(s11)", !h.deadlock("s11").map_err(e)?),
        ("next_t(s21, on)", h.next_t("s21", &on).map_err(e)?.is_none()),
        (
            "next_t(s21, timeout)",
            h.next_t("s21", &timeout).map_err(e)?.map(|t| t.id.to_string()).as_deref() == Some("t22"),
        ),
        (
            "up_s(s21, t13)",
            h.up_s("s21", t13).map_err(e)?.iter().map(|s| s.to_string()).collect::<Vec<_>>() == ["s21", "c11"],
        ),
    ];
    let wrong: Vec<&str> = examples.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    ensure(wrong.is_empty(), || format!("wrong: {}", wrong.join(", ")))?;
    Ok(format!("{}/{} examples", examples.len(), examples.len()))
}

fn analysis_sets() -> Outcome {
    let m = traffic_light();
    let st = ctr_setting();
    let r = analyze(&m, &st).map_err(|e| e.to_string())?;
    let ctr = r.component("CTR").ok_or("no CTR report")?;
    ensure(ctr.p4.iter().any(|s| s.as_str() == "s23"), || format!("s23 not in P4 {:?}", ctr.p4))?;
    ensure(ctr.p11.iter().any(|s| s.as_str() == "s23"), || format!("s23 not in P11 {:?}", ctr.p11))?;
    let applied = st.apply(&m).map_err(|e| e.to_string())?;
    for c in &applied.components {
        let Some(h) = &c.behavior else { continue };
        let rep = r.component(&c.name).ok_or("missing report")?;
        let partial = c.level == Completeness::Partial;
        ensure(rep.p8 == partial, || format!("P8 of {} is {}", c.name, rep.p8))?;
        if partial {
            let choices: Vec<&str> = h
                .states
                .values()
                .filter(|s| s.kind == StateKind::Choice)
                .map(|s| s.id.as_str())
                .collect();
            let p6: Vec<&str> = rep.p6.iter().map(|s| s.as_str()).collect();
            ensure(p6 == choices, || format!("P6 of {} is {p6:?}, choices {choices:?}", c.name))?;
        }
    }
    let p7: BTreeSet<String> = r
        .p7()
        .into_iter()
        .map(|m| m.rsplit('.').next().unwrap_or_default().to_string())
        .collect();
    ensure(p7 == set_of(["on", "off"]), || format!("P7 is {p7:?}"))?;
    Ok("s23 in P4 and P11, P6, P7 and P8 as expected".into())
}

fn component_block<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    let head = format!("  component {name} {{");
    let start = text.find(&head)?;
    let end = start + text[start..].find("\n  }\n")? + 5;
    Some(&text[start..end])
}

fn refinement_golden() -> Outcome {
    let m = traffic_light();
    let r = ctr_refined();
    let text = serialize(&r.model);
    let golden = include_str!("golden/ctr_refined.pmx");
    ensure(component_block(&text, "CTR") == Some(golden), || "CTR block differs from the golden file".into())?;
    let h = r
        .model
        .component("CTR")
        .and_then(|c| c.behavior.as_ref())
        .ok_or("no CTR machine")?;
    let meta = r.metadata.components.get("CTR").ok_or("no CTR metadata")?;
    for s in h.states.values().filter(|s| s.kind == StateKind::Composite) {
        let dec = meta
            .dec_points
            .get(s.id.as_str())
            .ok_or_else(|| format!("no decision point in {}", s.id))?;
        let parent = h.parent(dec.as_str()).map_err(|e| e.to_string())?.map(|p| p.to_string());
        ensure(parent.as_deref() == Some(s.id.as_str()), || format!("{dec} not inside {}", s.id))?;
    }
    ensure(h.out_t("s23").any(|t| t.des.as_str() == "__pmx_dec_c11"), || "yellow does not reach the decision point".into())?;
    ensure(h.out_t("__pmx_dec_c11").any(|t| t.des.as_str() == "s23"), || "the decision point does not reach yellow".into())?;
    ensure(
        h.transition("t13").map(|t| t.src.as_str()) == Some("__pmx_dec_CTRSM"),
        || "t13 not retargeted".into(),
    )?;
    for (name, src) in pmx_core::EXAMPLES {
        let m = parse_model(src).map_err(|e| e.to_string())?;
        let r = refine_model(&m, &Setting::default()).map_err(|e| e.to_string())?;
        validate(&r.model).map_err(|v| format!("{name}: {v:?}"))?;
        ensure(r.model.components.len() == m.components.len() + 1, || format!("{name}: component count"))?;
    }
    ensure(r.model.components.len() == m.components.len() + 1, || "component count".into())?;
    Ok("golden CTR block matches, refined fixtures validate".into())
}

/// Seeded mutants of the traffic light, 10% to 50% removal.
fn traffic_light_mutants() -> Result<Vec<(String, SystemModel)>, String> {
    let base = traffic_light();
    (1..=50u64)
        .map(|seed| {
            let percent = 10 + (seed as u32 % 5) * 10;
            let m = mutate(&base, percent, seed).map_err(|e| format!("seed {seed}: {e}"))?;
            Ok((format!("{percent}% seed {seed}"), m))
        })
        .collect()
}

fn formal_properties() -> Outcome {
    let bounds = Bounds::default();
    let mut corpus = vec![("traffic light".to_string(), traffic_light(), ctr_setting())];
    for (name, m) in traffic_light_mutants()? {
        let st = partial_setting(&m);
        corpus.push((name, m, st));
    }
    let (mut checked, mut reach_runs, mut controls) = (0, 0, 0);
    for (name, m, st) in &corpus {
        let original = st.apply(m).map_err(|e| format!("{name}: {e}"))?;
        let refined = refine_model(m, st).map_err(|e| format!("{name}: {e}"))?;
        for c in run_checks(&original, &refined, Check::All, 4, UnexpectedPolicy::Stuck, &bounds) {
            ensure(c.passed(), || format!("{name}: {}", c.failures().join("; ")))?;
            checked += 1;
            reach_runs += c.reachability.len();
        }
        let report = analyze(m, st).map_err(|e| e.to_string())?;
        for c in original.components.iter().filter(|c| c.behavior.is_some()) {
            let defective = report.component(&c.name).is_some_and(|r| r.has_blocker());
            if !defective || state_count(c.behavior.as_ref().expect("filtered")) > bounds.max_states {
                continue;
            }
            let p = check_progress(&original, &c.name, 4, UnexpectedPolicy::Stuck, &bounds)
                .map_err(|e| format!("{name}.{}: {e}", c.name))?;
            ensure(!p.passed(), || format!("unrefined {name}.{} never gets stuck", c.name))?;
            controls += 1;
        }
    }
    Ok(format!(
        "{} models, {checked} components, {reach_runs} reachability runs, {controls} unrefined machines stuck",
        corpus.len()
    ))
}

/// CTR rules as `(state, receipt, body)`.
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
            Some((s.clone(), when, rule.body.first()?.to_string()))
        })
        .collect()
}

fn default_rules() -> Outcome {
    let rules = ctr_rules(&ctr_refined());
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
        ensure(
            rules
                .iter()
                .any(|(s, w, b)| s == state && w.as_deref() == Some(when) && b == body),
            || format!("missing `{body}` at {state} on {when}"),
        )?;
    }
    Ok(format!("6 published rules among {} controller rules", rules.len()))
}

const LISTING: &str = "\
rule r1 where state off when receipt(timeout) { select state off using t13 }
rule r6 where state green receipt(off) { select state red|green|yellow|off }
";

fn round_trips() -> Outcome {
    let r = ctr_refined();
    let opts = RunOptions {
        max_steps: Some(60),
        seed: 3,
        ..RunOptions::default()
    };
    let mut lines = vec!["send ctrPort.on()", "select option 1"];
    lines.extend(std::iter::repeat_n("select state red", 12));
    let mut run = SystemRun::for_refined(&r, opts.clone());
    let empty = parse_rules("").map_err(|e| e.to_string())?;
    let mut s = Session::new(Mode::Interactive, empty, ScriptedSource::new(lines));
    ensure(s.run(&mut run) == Ok(HaltReason::MaxSteps), || "interactive run did not reach the step limit".into())?;
    let recs: Vec<_> = s.records().iter().collect();
    let saved = save_decisions_as_rules(&recs);
    ensure(saved.conflicts.is_empty(), || format!("conflicts {:?}", saved.conflicts))?;
    let rules = parse_rules(&saved.rules.to_string()).map_err(|e| e.to_string())?;
    let mut replay = SystemRun::for_refined(&r, opts);
    let mut batch = Session::new(Mode::Batch, rules, ScriptedSource::new(Vec::<String>::new()));
    ensure(batch.run(&mut replay) == Ok(HaltReason::MaxSteps), || "replay did not reach the step limit".into())?;
    ensure(batch.source.prompts == 0, || "replay asked for input".into())?;
    ensure(replay.trace() == run.trace(), || "replayed trace differs".into())?;

    let m = traffic_light();
    let set = parse_rules(LISTING).map_err(|e| e.to_string())?;
    let changed = apply_rule_to_model(&m, set.get("r1").ok_or("no r1")?, None).map_err(|e| e.to_string())?;
    let after = analyze(&changed, &ctr_setting()).map_err(|e| e.to_string())?;
    let ctr = after.component("CTR").ok_or("no CTR report")?;
    ensure(!ctr.p10.iter().any(|t| t.as_str() == "t13"), || "t13 still in P10 after r1".into())?;
    let rejected = apply_rule_to_model(&m, set.get("r6").ok_or("no r6")?, None);
    ensure(
        rejected == Err(ApplyError::MultiStateSelection("r6".into())),
        || format!("r6 gave {rejected:?}"),
    )?;
    Ok(format!("{} steps replayed, r1 applied, r6 rejected", run.trace().len()))
}

fn overhead_trend() -> Outcome {
    let mut corpus: Vec<(String, SystemModel)> = pmx_core::EXAMPLES
        .iter()
        .map(|(n, s)| Ok((n.to_string(), parse_model(s).map_err(|e| e.to_string())?)))
        .collect::<Result<_, String>>()?;
    for k in 1..=3u64 {
        let m = parse_model(&synthetic_model_text(140, 248, k)).map_err(|e| e.to_string())?;
        corpus.push((format!("synthetic{k}"), m));
    }
    let levels: Vec<u32> = (1..=9).map(|x| x * 10).collect();
    let seeds: Vec<u64> = (1..=30).collect();
    let rep = overhead_sweep(&corpus, &levels, &seeds, ExecMode::Auto);
    ensure(rep.failures.is_empty(), || format!("{:?}", rep.failures))?;
    ensure(rep.transitions_non_decreasing(), || format!("transition medians not monotone: {:?}", rep.levels))?;
    ensure(rep.transitions_exceed_states(), || format!("transitions below states: {:?}", rep.levels))?;
    let first = rep.levels.first().ok_or("no levels")?;
    let last = rep.levels.last().ok_or("no levels")?;
    Ok(format!(
        "{} bases, transitions {:.0}% -> {:.0}%, states {:.0}% -> {:.0}%",
        corpus.len(),
        first.median_transition_percent,
        last.median_transition_percent,
        first.median_state_percent,
        last.median_state_percent
    ))
}

fn performance() -> Outcome {
    let (states, transitions, runs) = (350, 620, 20);
    let model = parse_model(&synthetic_model_text(states, transitions, 1)).map_err(|e| e.to_string())?;
    let setting = Setting::default();
    let analysis = time_runs(runs, || analyze_with(&model, &setting, ExecMode::Auto));
    let refine = time_runs(runs, || refine_model(&model, &setting));
    let comps = synthetic_component_count(states);
    let per_comp = states / comps;
    let script = synthetic_rules_text(10_000, 100, comps, per_comp, 1);
    let load = time_runs(3, || parse_rules(&script));
    let set = parse_rules(&script).map_err(|e| e.to_string())?;
    let contexts = random_contexts(1000, comps, per_comp, 1);
    let mut picks = Vec::with_capacity(contexts.len());
    for (ctx, env) in &contexts {
        let start = Instant::now();
        std::hint::black_box(select_rule(&set, ctx, env));
        picks.push(start.elapsed());
    }
    let select = Timing::from_durations(&picks);
    let rows = [
        ("analysis", analysis.median_ms, 2_000.0),
        ("refinement", refine.median_ms, 15_000.0),
        ("10k rules", load.median_ms, 2_000.0),
        ("selection", select.median_ms, 1.0),
    ];
    let summary: Vec<String> = rows
        .iter()
        .map(|(n, ms, bound)| format!("{n} {ms:.3} ms (< {bound} ms)"))
        .collect();
    let over: Vec<&str> = rows.iter().filter(|(_, ms, b)| ms >= b).map(|(n, _, _)| *n).collect();
    ensure(over.is_empty(), || format!("over bound: {}; {}", over.join(", "), summary.join(", ")))?;
    Ok(format!("medians {}", summary.join(", ")))
}

fn dual_stepper() -> Outcome {
    let bounds = Bounds::default();
    let mut compared = 0;
    for (name, src) in pmx_core::EXAMPLES {
        let m = parse_model(src).map_err(|e| e.to_string())?;
        let r = refine_model(&m, &Setting::default()).map_err(|e| e.to_string())?;
        let original = Setting::default().apply(&m).map_err(|e| e.to_string())?;
        for model in [&original, &r.model] {
            for c in model.components.iter().filter(|c| c.behavior.is_some()) {
                if c.name == r.metadata.dbg_agent {
                    continue;
                }
                for policy in [UnexpectedPolicy::Stuck, UnexpectedPolicy::Drop] {
                    let x = cross_check(model, &c.name, 3, policy, &bounds).map_err(|e| format!("{name}.{}: {e}", c.name))?;
                    ensure(x.passed(), || format!("{name}.{}: {}", c.name, x.divergences.join("; ")))?;
                    compared += x.compared;
                }
            }
        }
    }
    Ok(format!("{compared} steps compared, 0 divergences"))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: [Criterion; 9] = [
        ("helper functions", secs(1), helper_functions),
        ("analysis correctness", secs(1), analysis_sets),
        ("refinement golden", secs(1), refinement_golden),
        ("formal properties", secs(300), formal_properties),
        ("default rules", secs(1), default_rules),
        ("automation round trips", secs(10), round_trips),
        ("overhead trend", secs(300), overhead_trend),
        ("performance", secs(600), performance),
        ("dual stepper", secs(300), dual_stepper),
    ];
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    println!("acceptance ({profile} build)");
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > budget => Err(format!("took {took:.2?}, budget {budget:?}")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += outcome.is_err() as usize;
        println!("{tag} {name:<24} {took:>10.2?}  {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
