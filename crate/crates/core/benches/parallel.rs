use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fermi_core::baselines::constant_sweep;
use fermi_core::kb::{load_kb, KnowledgeBase};
use fermi_core::metrics::{score_batch, GoldTarget, Prediction};
use fermi_core::par::Execution;
use fermi_core::synthgen::{generate_dataset, GenConfig};
use fermi_core::tasks::{build_task, TaskKind};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn kb() -> KnowledgeBase {
    load_kb(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sample_kb.txt")).unwrap()
}

fn cfg(size: usize) -> GenConfig {
    GenConfig {
        size,
        decompose_fraction: 0.5,
        seed: 1,
    }
}

fn bench_generate(c: &mut Criterion) {
    let kb = kb();
    let mut g = c.benchmark_group("generate_1200");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_dataset(&kb, &cfg(1200), exec).unwrap())
        });
    }
    g.finish();
}

fn bench_score(c: &mut Criterion) {
    let data = generate_dataset(&kb(), &cfg(1200), Execution::default()).unwrap();
    let items: Vec<(Prediction, GoldTarget)> = data
        .records
        .iter()
        .map(|r| {
            let p = r.program();
            (
                Prediction {
                    answer: Some(r.answer),
                    program: Some(p.render()),
                },
                GoldTarget {
                    answer: r.answer,
                    fact_ids: Some(p.used_fact_ids()),
                },
            )
        })
        .collect();
    let mut g = c.benchmark_group("score_1200");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| score_batch(exec, &items))
        });
    }
    g.finish();
}

fn bench_tasks(c: &mut Criterion) {
    let records = generate_dataset(&kb(), &cfg(1200), Execution::default())
        .unwrap()
        .to_records();
    let mut g = c.benchmark_group("distractor_task_1200");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_task(&records, TaskKind::DistractorContext, None, 3, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let golds: Vec<f64> = (0..5000).map(|i| 10f64.powf(-2.0 + 10.0 * i as f64 / 5000.0)).collect();
    let mut g = c.benchmark_group("constant_sweep_5000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| constant_sweep(&golds, 10, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_generate, bench_score, bench_tasks, bench_sweep);
criterion_main!(benches);
