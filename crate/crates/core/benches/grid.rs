use alscast_core::gbtree::{self, HyperParams};
use alscast_core::learning::split_chronological;
use alscast_core::model::{LabeledDataset, LabeledRow, ParticipantId, SplitDataset, SubscaleId, Technique};
use alscast_core::par;
use alscast_core::rng::PortableRng;
use alscast_core::tuning::{self, SearchSpace};
use chrono::{Duration, NaiveDate};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn dataset(n: usize, f: usize) -> SplitDataset {
    let mut rng = PortableRng::new(5);
    let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    let rows = (0..n)
        .map(|i| {
            let features: Vec<f64> = (0..f).map(|_| rng.next_f64()).collect();
            let target = 4.0 - 2.0 * i as f64 / n as f64 + 0.5 * features[0] + rng.normal(0.0, 0.1);
            LabeledRow {
                participant: ParticipantId::new("P1"),
                date: start + Duration::days(i as i64),
                features,
                target,
            }
        })
        .collect();
    let names = (0..f).map(|j| format!("pulse_day_f{j:02}")).collect();
    let data = LabeledDataset::new(names, SubscaleId::Walking, Technique::Linear, rows).unwrap();
    split_chronological(&data).unwrap()
}

fn small_space() -> SearchSpace {
    SearchSpace {
        n_estimators: vec![32, 64],
        max_depth: vec![3, 4, 6],
        ..SearchSpace::default()
    }
}

/// 1 = sequential pool, 0 = rayon's default pool size.
const POOLS: [(usize, &str); 2] = [(1, "sequential"), (0, "parallel")];

fn bench_random_search(c: &mut Criterion) {
    let split = dataset(300, 40);
    let space = small_space();
    let mut group = c.benchmark_group("random_search");
    group.sample_size(10);
    for (jobs, label) in POOLS {
        group.bench_with_input(BenchmarkId::from_parameter(label), &jobs, |b, &jobs| {
            b.iter(|| par::with_jobs(jobs, || tuning::random_search(&split, &space, 8, 7).unwrap()))
        });
    }
    group.finish();
}

fn bench_fit_grid(c: &mut Criterion) {
    let split = dataset(300, 40);
    let seeds: Vec<u64> = (0..12).collect();
    let hyper = HyperParams {
        n_estimators: 32,
        max_depth: 4,
        ..HyperParams::default()
    };
    let mut group = c.benchmark_group("fit_grid");
    group.sample_size(10);
    for (jobs, label) in POOLS {
        group.bench_with_input(BenchmarkId::from_parameter(label), &jobs, |b, &jobs| {
            b.iter(|| par::with_jobs(jobs, || par::map(&seeds, |&s| gbtree::fit(&split.train, &hyper, s).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_random_search, bench_fit_grid);
criterion_main!(benches);
