use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;
use repofix_core::index::{build_database, EntryId, SourceUnit};
use repofix_core::semantic::{top_n_vector, EmbeddingIndex, EmbeddingVector, IndexRow, LocalEncoder};

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", one), ("parallel", all)]
}

fn random_index(rows: usize, dim: usize) -> EmbeddingIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows = (0..rows)
        .map(|i| IndexRow {
            entry_id: EntryId(i as u32),
            vector: EmbeddingVector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            passage: String::new(),
        })
        .collect();
    EmbeddingIndex::new(dim, rows).unwrap()
}

fn random_project(files: usize) -> Vec<SourceUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..files)
        .map(|f| {
            let mut text = String::new();
            for c in 0..rng.gen_range(1..6) {
                text.push_str(&format!("class C{c}:\n    \"\"\"Class {c}.\"\"\"\n    level = 0\n\n"));
                for m in 0..rng.gen_range(1..8) {
                    text.push_str(&format!("    def m{m}(self, x=None):\n        self.a{m} = x\n        return x\n\n"));
                }
            }
            for g in 0..rng.gen_range(0..10) {
                text.push_str(&format!("def f{g}(a, b):\n    \"\"\"Add.\"\"\"\n    return a + b\n\n"));
            }
            SourceUnit::python(format!("pkg{}/mod{f}.py", f % 7), text)
        })
        .collect()
}

fn bench_top_n(c: &mut Criterion) {
    let index = random_index(200_000, 64);
    let query = EmbeddingVector::new((0..64).map(|i| (i as f64).sin()).collect());
    let mut group = c.benchmark_group("top_n_vector");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| top_n_vector(&query, &index, 20).unwrap()))
        });
    }
    group.finish();
}

fn bench_build(c: &mut Criterion) {
    let units = random_project(300);
    let encoder = LocalEncoder::default();
    let mut group = c.benchmark_group("build_database");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            pool.install(|| b.iter(|| build_database("bench", &units, &encoder)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_top_n, bench_build);
criterion_main!(benches);
