use buzzload_bench::{case_b_trace, demo_params};
use buzzload_core::spectrum::{default_q_grid, empirical_spectrum_path};
use buzzload_core::{theoretical_spectrum, WorkloadPath};
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_theory(c: &mut Criterion) {
    let mut g = c.benchmark_group("theoretical_spectrum");
    g.sample_size(10);
    for buzz in [false, true] {
        let p = demo_params(buzz);
        let q = default_q_grid(p.i_max, 51);
        let name = if buzz { "demo_buzz" } else { "demo_buzz_free" };
        g.bench_function(name, |b| b.iter(|| theoretical_spectrum(&p, &q).unwrap()));
    }
    g.finish();
}

fn bench_empirical(c: &mut Criterion) {
    let path = WorkloadPath::from_trace(&case_b_trace(1 << 17, 1));
    let q = default_q_grid(40, 201);
    c.bench_function("empirical_spectrum_tau_100", |b| {
        b.iter(|| empirical_spectrum_path(&path, 100.0, &q).unwrap())
    });
}

criterion_group!(benches, bench_theory, bench_empirical);
criterion_main!(benches);
