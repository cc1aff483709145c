use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use healthgat::ehr::{generate_synthetic_cohort, segment_admission, Cohort, SyntheticConfig};
use healthgat::embed::{train_sgns, SgnsConfig};
use healthgat::graph::{build_cooccurrence, build_transitions, generate_walks, WalkConfig};
use healthgat::visit::{init_segment_embeddings, train_segment_refiner, RefinerConfig, SegmentEmbeddingSet};
use healthgat::Execution;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn cohort() -> Cohort {
    let cfg = SyntheticConfig {
        patients: 400,
        ..SyntheticConfig::default()
    };
    generate_synthetic_cohort(&cfg, 7).unwrap()
}

fn segment_sets(c: &Cohort) -> Vec<SegmentEmbeddingSet> {
    let g = build_cooccurrence(&c.admissions, c.vocab.len(), 60, Execution::Sequential).unwrap();
    let t = build_transitions(&g, 1.0, 1.0).unwrap();
    let walks = generate_walks(&t, &WalkConfig::default(), Execution::Sequential).unwrap();
    let sgns = SgnsConfig {
        dim: 32,
        epochs: 1,
        ..SgnsConfig::default()
    };
    let svc = train_sgns(&walks, c.vocab.len(), &sgns).unwrap().embedding;
    c.admissions
        .iter()
        .map(|a| init_segment_embeddings(&segment_admission(a), &svc).unwrap())
        .collect()
}

fn bench_cooccurrence(cr: &mut Criterion) {
    let c = cohort();
    let mut group = cr.benchmark_group("cooccurrence");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_cooccurrence(black_box(&c.admissions), c.vocab.len(), 60, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_walks(cr: &mut Criterion) {
    let c = cohort();
    let g = build_cooccurrence(&c.admissions, c.vocab.len(), 60, Execution::Sequential).unwrap();
    let t = build_transitions(&g, 1.0, 0.5).unwrap();
    let cfg = WalkConfig::default();
    let mut group = cr.benchmark_group("walks");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_walks(black_box(&t), &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_segment_epoch(cr: &mut Criterion) {
    let c = cohort();
    let sets = segment_sets(&c);
    let cfg = RefinerConfig {
        epochs: 1,
        batch_size: 32,
        ..RefinerConfig::default()
    };
    let mut group = cr.benchmark_group("segment_refiner_epoch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_segment_refiner(black_box(&sets), c.vocab.len(), &cfg, 3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_cooccurrence, bench_walks, bench_segment_epoch);
criterion_main!(benches);
