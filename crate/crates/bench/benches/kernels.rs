use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use czforge::{adam_run, evaluate, gradient, haar_random_unitary, BlockStyle, CouplingMap, Entangler, LossSpec, Template};

fn setups() -> Vec<(String, czforge::CircuitIR, LossSpec)> {
    [(3, 7), (3, 14), (4, 20), (4, 61)]
        .into_iter()
        .map(|(n, k)| {
            let c = Template::new(CouplingMap::connected(n).unwrap(), Entangler::CP, BlockStyle::XYZ, k).expand().unwrap();
            let spec = LossSpec::hilbert_schmidt(haar_random_unitary(n, 1).unwrap()).with_reg_weight(5e-4);
            (format!("{n}q_k{k}"), c, spec)
        })
        .collect()
}

fn angles(len: usize) -> Vec<f64> {
    (0..len).map(|i| (i as f64 * 0.618).sin() * 3.0).collect()
}

fn bench_evaluate(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("evaluate");
    for (name, c, _) in setups() {
        let p = angles(c.num_params());
        g.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, p| b.iter(|| evaluate(&c, black_box(p)).unwrap()));
    }
    g.finish();
}

fn bench_gradient(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("gradient");
    for (name, c, spec) in setups() {
        let p = angles(c.num_params());
        g.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, p| b.iter(|| gradient(&c, black_box(p), &spec).unwrap()));
    }
    g.finish();
}

fn bench_adam(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("adam_100_steps");
    g.sample_size(20);
    for (name, c, spec) in setups().into_iter().take(3) {
        let p = angles(c.num_params());
        g.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, p| b.iter(|| adam_run(&c, black_box(p), &spec, 100, 0.1).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_evaluate, bench_gradient, bench_adam);
criterion_main!(benches);
