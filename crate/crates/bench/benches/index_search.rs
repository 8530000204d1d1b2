use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ssebc_bench::{fixture, PAIR_COUNTS};
use ssebc_core::sse::phi_search;
use ssebc_core::sweep::{self, SweepConfig};

fn index_build(c: &mut Criterion) {
    let config = SweepConfig::default();
    let mut group = c.benchmark_group("index_build");
    group.sample_size(10);
    for pairs in PAIR_COUNTS {
        group.throughput(Throughput::Elements(pairs as u64));
        group.bench_with_input(BenchmarkId::from_parameter(pairs), &pairs, |b, &pairs| {
            b.iter(|| sweep::build(&config, black_box(pairs)).unwrap())
        });
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let config = SweepConfig::default();
    let mut group = c.benchmark_group("search");
    for pairs in PAIR_COUNTS {
        let f = fixture(&config, pairs);
        let m = f.trapdoors.len();
        for (label, j) in [("first", 0), ("last", m - 1)] {
            let id = BenchmarkId::new(label, pairs);
            group.bench_with_input(id, &f.trapdoors[j], |b, td| {
                b.iter(|| phi_search(&f.ledger, td, &f.index.broadcast.locator).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, index_build, search);
criterion_main!(benches);
