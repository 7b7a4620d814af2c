use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use roprg_core::{BitVector, DistributionDescriptor, EnumerationBudget, GeneratorSpec};

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, desc) in [
        ("kwise n=64 k=8", DistributionDescriptor::kwise(64, 8).unwrap()),
        ("small_bias n=64 δ=2^-20", DistributionDescriptor::small_bias(64, 2f64.powi(-20)).unwrap()),
        ("almost_kwise n=64 k=8 γ=2^-20", DistributionDescriptor::almost_kwise(64, 8, 2f64.powi(-20)).unwrap()),
    ] {
        let seed = BitVector::random(desc.seed_bits(), &mut rng);
        group.bench_function(name, |b| b.iter(|| desc.sample(black_box(&seed)).unwrap()));
    }
    group.finish();
}

fn expansion(c: &mut Criterion) {
    let mut group = c.benchmark_group("expand_seed");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [64usize, 256, 1024] {
        let spec = GeneratorSpec::exact_with(n, 16, 8, 6).unwrap();
        let seed = BitVector::random(spec.seed_length(), &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &seed, |b, s| {
            b.iter(|| spec.expand_seed(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn exact_distribution(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_output_distribution");
    group.sample_size(10);
    for (n, k, r) in [(8usize, 3usize, 2usize), (12, 3, 3), (16, 2, 2)] {
        let spec = GeneratorSpec::exact_with(n, 2, k, r).unwrap();
        group.bench_function(format!("n={n} k={k} r={r}"), |b| {
            b.iter(|| spec.exact_output_distribution(EnumerationBudget::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, expansion, exact_distribution);
criterion_main!(benches);
