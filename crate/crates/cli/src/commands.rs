//! Implementation of every subcommand.

use std::fs;
use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value as Json};

use pmx_core::analysis::{analyze_with, Setting};
use pmx_core::experiment::{
    mutate, random_contexts, synthetic_component_count, synthetic_model_text, synthetic_rules_text, time_runs,
    Timing,
};
use pmx_core::model::SystemModel;
use pmx_core::oracle::{check_progress, run_checks, Bounds, Check, ComponentChecks};
use pmx_core::par::ExecMode;
use pmx_core::refine::{refine_model, Refined};
use pmx_core::rules::{apply_rule_to_model, generate_default_rules, parse_rules, parse_rules_named, select_rule, RuleSet};
use pmx_core::runtime::{HaltReason, RunOptions, SystemRun, TraceRecord, UnexpectedPolicy};
use pmx_core::session::{CommandSource, Mode, Prompt, Response, Session, SessionError};
use pmx_core::text::{parse_model, serialize};

use crate::bridge::serve_session;
use crate::error::{CliError, CliResult};
use crate::stdio::StdioSource;
use crate::{Cli, Command, ModelArgs, Report, SessionArgs};

pub fn execute(cli: &Cli) -> CliResult<Report> {
    match &cli.command {
        Command::Analyze { model } => analyze(model),
        Command::Refine {
            model,
            output,
            metadata,
        } => refine(model, output.as_deref(), metadata.as_deref()),
        Command::Run {
            model,
            session,
            trace,
            script,
        } => run(cli, model, session, trace.as_deref(), script.as_deref()),
        Command::GenRules { model, output } => gen_rules(model, output.as_deref()),
        Command::ApplyRule {
            model,
            rules,
            rule,
            component,
            output,
        } => apply_rule(model, rules, rule, component.as_deref(), output.as_deref()),
        Command::Verify {
            model,
            check,
            depth,
            component,
            unrefined,
            max_states,
            sequential,
            policy,
        } => {
            let mut bounds = Bounds::default();
            if let Some(m) = max_states {
                bounds.max_states = *m;
            }
            if *sequential {
                bounds.mode = ExecMode::Sequential;
            }
            let opts = VerifyOptions {
                check: check.parse().map_err(CliError::Usage)?,
                depth: *depth,
                component: component.as_deref(),
                unrefined: *unrefined,
                policy: policy.parse().map_err(CliError::Usage)?,
                bounds,
            };
            verify(model, &opts)
        }
        Command::Mutate {
            model,
            percent,
            output,
        } => mutate_model(model, *percent, cli.seed, output.as_deref()),
        Command::Bench {
            runs,
            rules,
            rule_lines,
            states,
            transitions,
            sequential,
        } => {
            let mode = if *sequential { ExecMode::Sequential } else { ExecMode::Auto };
            bench(*runs, *rules, *rule_lines, *states, *transitions, cli.seed, mode)
        }
        Command::Serve {
            model,
            session,
            listen,
        } => serve(cli, model, session, listen),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_model(path: &Path) -> CliResult<SystemModel> {
    let src = read(path)?;
    parse_model(&src).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_setting(args: &ModelArgs) -> CliResult<Setting> {
    match &args.setting {
        Some(s) => s.parse().map_err(|e: pmx_core::analysis::AnalysisError| CliError::Usage(e.to_string())),
        None => Ok(Setting::default()),
    }
}

fn load(args: &ModelArgs) -> CliResult<(SystemModel, Setting)> {
    let model = load_model(&args.model)?;
    let setting = load_setting(args)?;
    Ok((model, setting))
}

fn refine_loaded(model: &SystemModel, setting: &Setting) -> CliResult<Refined> {
    refine_model(model, setting).map_err(|e| CliError::Parse(e.to_string()))
}

fn load_rules(path: &Path) -> CliResult<RuleSet> {
    let src = read(path)?;
    parse_rules_named(&path.display().to_string(), &src)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Writes `text` to `output`, or returns it as the report text.
fn emit(output: Option<&Path>, text: String, what: &str) -> CliResult<(String, Json)> {
    match output {
        Some(p) => {
            write(p, &text)?;
            Ok((format!("{what} written to {}\n", p.display()), json!(p.display().to_string())))
        }
        None => Ok((text.clone(), json!(text))),
    }
}

fn analyze(args: &ModelArgs) -> CliResult<Report> {
    let (model, setting) = load(args)?;
    let report = analyze_with(&model, &setting, ExecMode::Auto).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Report::ok(report.to_text(), report.to_json()))
}

fn refine(args: &ModelArgs, output: Option<&Path>, metadata: Option<&Path>) -> CliResult<Report> {
    let (model, setting) = load(args)?;
    let refined = refine_loaded(&model, &setting)?;
    let meta = refined.metadata.to_json();
    if let Some(p) = metadata {
        write(p, &serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
    }
    let (text, model_json) = emit(output, serialize(&refined.model), "refined model")?;
    Ok(Report::ok(text, json!({ "model": model_json, "metadata": meta })))
}

fn gen_rules(args: &ModelArgs, output: Option<&Path>) -> CliResult<Report> {
    let (model, setting) = load(args)?;
    let refined = refine_loaded(&model, &setting)?;
    let set = generate_default_rules(&refined);
    let names: Vec<&str> = set.rules.iter().map(|r| r.name.as_str()).collect();
    let count = set.len();
    let (text, rules) = emit(output, set.to_string(), "rules")?;
    Ok(Report::ok(text, json!({ "rules": rules, "names": names, "count": count })))
}

fn apply_rule(
    args: &ModelArgs,
    rules: &Path,
    rule: &str,
    component: Option<&str>,
    output: Option<&Path>,
) -> CliResult<Report> {
    let model = load_model(&args.model)?;
    let set = load_rules(rules)?;
    let r = set
        .get(rule)
        .ok_or_else(|| CliError::Usage(format!("no rule `{rule}` in {}", rules.display())))?;
    let changed = apply_rule_to_model(&model, r, component).map_err(|e| CliError::Failure(e.to_string()))?;
    let (text, model_json) = emit(output, serialize(&changed), "model")?;
    Ok(Report::ok(text, json!({ "rule": rule, "model": model_json })))
}

fn mutate_model(path: &Path, percent: u32, seed: u64, output: Option<&Path>) -> CliResult<Report> {
    let model = load_model(path)?;
    let mutant = mutate(&model, percent, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let (states, transitions) = pmx_core::experiment::element_counts(&mutant);
    let (text, model_json) = emit(output, serialize(&mutant), "mutant")?;
    Ok(Report::ok(
        text,
        json!({
            "percent": percent,
            "seed": seed,
            "states": states,
            "transitions": transitions,
            "model": model_json,
        }),
    ))
}

struct VerifyOptions<'a> {
    check: Check,
    depth: usize,
    component: Option<&'a str>,
    unrefined: bool,
    policy: UnexpectedPolicy,
    bounds: Bounds,
}

fn verify(args: &ModelArgs, opts: &VerifyOptions) -> CliResult<Report> {
    let (model, setting) = load(args)?;
    let original = setting.apply(&model).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(c) = opts.component {
        if original.component(c).is_none() {
            return Err(CliError::Usage(format!("no component `{c}`")));
        }
    }
    let wanted = |name: &str| opts.component.is_none_or(|c| c == name);
    if opts.unrefined {
        return Ok(verify_unrefined(&original, opts, &wanted));
    }
    let refined = refine_loaded(&model, &setting)?;
    let results: Vec<ComponentChecks> =
        run_checks(&original, &refined, opts.check, opts.depth, opts.policy, &opts.bounds)
            .into_iter()
            .filter(|c| wanted(&c.component))
            .collect();
    let mut text = String::new();
    for c in &results {
        if c.passed() {
            text.push_str(&format!("{}: pass\n", c.component));
        } else {
            for f in c.failures() {
                text.push_str(&format!("FAIL {f}\n"));
            }
        }
    }
    let ok = results.iter().all(ComponentChecks::passed);
    text.push_str(if ok { "verification passed\n" } else { "verification failed\n" });
    Ok(Report {
        text,
        json: json!({ "passed": ok, "depth": opts.depth, "components": results }),
        ok,
    })
}

/// Progress of the model as given. A stuck configuration is the expected
/// finding for a partial model, so the report only fails on errors.
fn verify_unrefined(model: &SystemModel, opts: &VerifyOptions, wanted: &dyn Fn(&str) -> bool) -> Report {
    let mut text = String::new();
    let mut out = Vec::new();
    let mut ok = true;
    for c in model.components.iter().filter(|c| c.behavior.is_some() && wanted(&c.name)) {
        match check_progress(model, &c.name, opts.depth, opts.policy, &opts.bounds) {
            Ok(r) => {
                match &r.stuck {
                    Some(w) => text.push_str(&format!(
                        "{}: stuck in {} after [{}] by rule {} ({})\n",
                        c.name,
                        w.state,
                        w.inputs.join(", "),
                        w.rule,
                        w.reason
                    )),
                    None => text.push_str(&format!("{}: no stuck configuration\n", c.name)),
                }
                out.push(json!({ "component": c.name, "progress": r }));
            }
            Err(e) => {
                ok = false;
                text.push_str(&format!("FAIL {}: {e}\n", c.name));
                out.push(json!({ "component": c.name, "error": e.to_string() }));
            }
        }
    }
    Report {
        text,
        json: json!({ "unrefined": true, "depth": opts.depth, "components": out }),
        ok,
    }
}

/// Records every command line handed to the session.
struct Logged<S> {
    inner: S,
    lines: Vec<String>,
}

impl<S: CommandSource> CommandSource for Logged<S> {
    fn next_line(&mut self, prompt: &Prompt) -> Option<String> {
        let l = self.inner.next_line(prompt)?;
        self.lines.push(l.clone());
        Some(l)
    }
    fn respond(&mut self, r: &Response) {
        self.inner.respond(r)
    }
    fn note(&mut self, line: &str) {
        self.inner.note(line)
    }
    fn observe(&mut self, trace: &[TraceRecord]) {
        self.inner.observe(trace)
    }
}

/// Everything a run needs besides its command source.
struct Prepared {
    original: SystemModel,
    refined: Refined,
    rules: RuleSet,
    mode: Mode,
    opts: RunOptions,
}

fn prepare(cli: &Cli, model: &ModelArgs, session: &SessionArgs) -> CliResult<Prepared> {
    let (original, setting) = load(model)?;
    let refined = refine_loaded(&original, &setting)?;
    let rules = match &session.rules {
        Some(p) => load_rules(p)?,
        None => RuleSet::new("none", vec![]),
    };
    let mode = match &session.mode {
        Some(m) => m.parse().map_err(CliError::Usage)?,
        None if session.rules.is_some() => Mode::Batch,
        None => Mode::Interactive,
    };
    let opts = RunOptions {
        max_steps: cli.max_steps,
        max_vtime: cli.max_vtime,
        seed: cli.seed,
        policy: session.policy.parse().map_err(CliError::Usage)?,
        ..RunOptions::default()
    };
    Ok(Prepared {
        original,
        refined,
        rules,
        mode,
        opts,
    })
}

fn trace_lines(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

fn write_command_log(path: Option<&Path>, lines: &[String]) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut text = lines.join("\n");
            if !text.is_empty() {
                text.push('\n');
            }
            write(p, &text)
        }
        None => Ok(()),
    }
}

fn outcome_report(
    outcome: Result<HaltReason, SessionError>,
    trace: &[TraceRecord],
    trace_path: Option<&Path>,
    format: crate::Format,
) -> CliResult<Report> {
    let halted = match outcome {
        Ok(h) => h,
        Err(e) => return Err(CliError::Failure(format!("run failed after {} steps: {e}", trace.len()))),
    };
    let summary = json!({
        "halted": halted,
        "reason": halted.to_string(),
        "steps": trace.len(),
        "trace": trace_path.map(|p| p.display().to_string()),
    });
    let text = format!("halted ({halted}) after {} steps\n", trace.len());
    if trace_path.is_some() {
        return Ok(Report::ok(text, summary));
    }
    // the trace owns stdout; the summary goes to stderr
    match format {
        crate::Format::Text => eprint!("{text}"),
        crate::Format::Json => eprintln!("{summary}"),
    }
    Ok(Report::ok("", Json::Null))
}

fn run(
    cli: &Cli,
    model: &ModelArgs,
    session: &SessionArgs,
    trace_path: Option<&Path>,
    script: Option<&Path>,
) -> CliResult<Report> {
    let p = prepare(cli, model, session)?;
    let mut run = SystemRun::for_refined(&p.refined, p.opts.clone());
    let (outcome, lines) = match script {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            let source = StdioSource::new(BufReader::new(file), std::io::stderr());
            run_session(&p, &mut run, source)
        }
        None => {
            let stdin = std::io::stdin();
            let source = StdioSource::new(BufReader::new(stdin.lock()), std::io::stderr());
            run_session(&p, &mut run, source)
        }
    };
    let trace = trace_lines(run.trace());
    match trace_path {
        Some(path) => write(path, &trace)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(trace.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(PathBuf::from("<stdout>"), e))?;
        }
    }
    write_command_log(session.command_log.as_deref(), &lines)?;
    outcome_report(outcome, run.trace(), trace_path, cli.format)
}

fn run_session<S: CommandSource>(
    p: &Prepared,
    run: &mut SystemRun,
    source: S,
) -> (Result<HaltReason, SessionError>, Vec<String>) {
    let logged = Logged {
        inner: source,
        lines: Vec::new(),
    };
    let mut session = Session::new(p.mode, p.rules.clone(), logged).with_design_model(p.original.clone());
    let outcome = session.run(run);
    (outcome, session.source.lines)
}

fn serve(cli: &Cli, model: &ModelArgs, session: &SessionArgs, listen: &str) -> CliResult<Report> {
    let p = prepare(cli, model, session)?;
    let listener = TcpListener::bind(listen).map_err(|e| CliError::Usage(format!("cannot listen on {listen}: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::Usage(format!("cannot listen on {listen}: {e}")))?;
    // the address line lets a front-end or test find the port
    println!("listening on {addr}");
    let _ = std::io::stdout().flush();
    let mut run = SystemRun::for_refined(&p.refined, p.opts.clone());
    let (outcome, lines) = serve_session(listener, &p.refined, &mut run, |source| {
        Session::new(p.mode, p.rules.clone(), source).with_design_model(p.original.clone())
    })
    .map_err(|e| CliError::Failure(format!("bridge connection failed: {e}")))?;
    write_command_log(session.command_log.as_deref(), &lines)?;
    let steps = run.trace().len();
    let halted = outcome.map_err(|e| CliError::Failure(format!("run failed after {steps} steps: {e}")))?;
    Ok(Report::ok(
        format!("halted ({halted}) after {steps} steps\n"),
        json!({ "halted": halted, "reason": halted.to_string(), "steps": steps }),
    ))
}

/// Acceptance bounds for the medians, in milliseconds.
const ANALYSIS_BOUND_MS: f64 = 2_000.0;
const REFINE_BOUND_MS: f64 = 15_000.0;
const LOAD_BOUND_MS: f64 = 2_000.0;
const SELECT_BOUND_MS: f64 = 1.0;
const SELECT_CONTEXTS: usize = 1000;

fn bench(
    runs: usize,
    rules: usize,
    rule_lines: usize,
    states: usize,
    transitions: usize,
    seed: u64,
    mode: ExecMode,
) -> CliResult<Report> {
    let runs = runs.max(1);
    let model = parse_model(&synthetic_model_text(states, transitions, seed))
        .map_err(|e| CliError::Failure(format!("generated model does not load: {e}")))?;
    let setting = Setting::default();
    let analysis = time_runs(runs, || analyze_with(&model, &setting, mode).expect("levels come from the model"));
    let refine = time_runs(runs, || refine_model(&model, &setting).expect("generated models refine"));
    let comps = synthetic_component_count(states);
    let per_comp = states / comps;
    let script = synthetic_rules_text(rules, rule_lines, comps, per_comp, seed);
    let load = time_runs(runs, || parse_rules(&script).expect("generated rules parse"));
    let set = parse_rules(&script).map_err(|e| CliError::Failure(format!("generated rules do not parse: {e}")))?;
    let contexts = random_contexts(SELECT_CONTEXTS, comps, per_comp, seed);
    let mut picks = Vec::with_capacity(runs * contexts.len());
    for _ in 0..runs {
        for (ctx, env) in &contexts {
            let start = Instant::now();
            std::hint::black_box(select_rule(&set, ctx, env));
            picks.push(start.elapsed());
        }
    }
    let select = Timing::from_durations(&picks);
    let rows: [(&str, Timing, f64); 4] = [
        ("analysis", analysis, ANALYSIS_BOUND_MS),
        ("refinement", refine, REFINE_BOUND_MS),
        ("rule loading", load, LOAD_BOUND_MS),
        ("rule selection", select, SELECT_BOUND_MS),
    ];
    let mut text = format!(
        "{states} states, {transitions} transitions, {rules} rules of {rule_lines} lines, {runs} runs, {}\n",
        if mode.is_parallel() { "parallel" } else { "sequential" }
    );
    let mut items = Vec::new();
    for (name, t, bound) in rows {
        let within = t.median_ms < bound;
        text.push_str(&format!(
            "{name:<15} min {:>10.4} ms  median {:>10.4} ms  max {:>10.4} ms  bound {bound} ms  {}\n",
            t.min_ms,
            t.median_ms,
            t.max_ms,
            if within { "within" } else { "EXCEEDED" }
        ));
        items.push(json!({ "name": name, "timing": t, "bound_ms": bound, "within": within }));
    }
    Ok(Report::ok(
        text,
        json!({
            "states": states,
            "transitions": transitions,
            "rules": rules,
            "rule_lines": rule_lines,
            "runs": runs,
            "parallel": mode.is_parallel(),
            "results": items,
        }),
    ))
}
