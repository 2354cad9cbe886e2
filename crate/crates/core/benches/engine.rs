//! Sequential against parallel evaluation of the independent work items:
//! per-component analysis, bounded progress checks and the mutation sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pmx_core::analysis::{analyze_with, Setting};
use pmx_core::experiment::{overhead_sweep, synthetic_model_text};
use pmx_core::model::SystemModel;
use pmx_core::oracle::{check_progress_all, Bounds};
use pmx_core::par::ExecMode;
use pmx_core::refine::refine_model;
use pmx_core::runtime::UnexpectedPolicy;
use pmx_core::text::parse_model;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Auto)];

fn analysis(c: &mut Criterion) {
    let model = parse_model(&synthetic_model_text(350, 620, 1)).unwrap();
    let setting = Setting::default();
    let mut g = c.benchmark_group("analysis_350_states");
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| analyze_with(&model, &setting, mode).unwrap())
        });
    }
    g.finish();
}

fn progress(c: &mut Criterion) {
    let refined: Vec<SystemModel> = pmx_core::EXAMPLES
        .iter()
        .map(|(_, s)| refine_model(&parse_model(s).unwrap(), &Setting::default()).unwrap().model)
        .collect();
    let mut g = c.benchmark_group("progress_depth_4");
    g.sample_size(10);
    for (name, mode) in MODES {
        let bounds = Bounds {
            mode,
            ..Bounds::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                for m in &refined {
                    check_progress_all(m, &["dbg_agent"], 4, UnexpectedPolicy::Stuck, &bounds);
                }
            })
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let bases: Vec<(String, SystemModel)> = pmx_core::EXAMPLES
        .iter()
        .map(|(n, s)| (n.to_string(), parse_model(s).unwrap()))
        .collect();
    let levels = [10, 30, 50, 70, 90];
    let seeds: Vec<u64> = (1..=10).collect();
    let mut g = c.benchmark_group("overhead_sweep");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| overhead_sweep(&bases, &levels, &seeds, mode))
        });
    }
    g.finish();
}

criterion_group!(benches, analysis, progress, sweep);
criterion_main!(benches);
