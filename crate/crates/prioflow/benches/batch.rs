//! Compares sequential and rayon-parallel batch evaluation of independent
//! scenarios. Run with `cargo bench` (needs the default `parallel`
//! feature).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use prioflow::batch::{run_bundles_par, run_bundles_seq};
use prioflow::scenario::ScenarioBundle;
use prioflow::synth::{random_bundle, SynthLimits};

fn bundles(count: u64) -> Vec<ScenarioBundle> {
    (0..count)
        .map(|seed| random_bundle(seed, &SynthLimits::default()))
        .collect()
}

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario_batch");
    group.sample_size(10);
    for count in [8u64, 32, 64] {
        let batch = bundles(count);
        group.bench_with_input(
            BenchmarkId::new("sequential", count),
            &batch,
            |b, batch| b.iter(|| run_bundles_seq(batch)),
        );
        group.bench_with_input(
            BenchmarkId::new("parallel", count),
            &batch,
            |b, batch| b.iter(|| run_bundles_par(batch)),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
