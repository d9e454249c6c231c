use cebu_bench::beam;
use cebu_core::{run_cebu, run_cebured, CebuRedSettings, CebuSettings};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn full_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("posterior");
    group.sample_size(10);
    for d in [25, 100] {
        let p = beam(d);
        group.bench_function(BenchmarkId::new("cebured", d), |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            b.iter(|| run_cebured(&p, &CebuRedSettings::default(), &mut rng).expect("run succeeds"))
        });
        group.bench_function(BenchmarkId::new("cebu", d), |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            b.iter(|| run_cebu(&p, &CebuSettings::default(), &mut rng).expect("run succeeds"))
        });
    }
    group.finish();
}

criterion_group!(benches, full_runs);
criterion_main!(benches);
