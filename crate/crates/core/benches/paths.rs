use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use neumann_lab::geometry::ManifoldSpec;
use neumann_lab::parallel::{map_indexed_with, Execution};
use neumann_lab::phi::PhiField;
use neumann_lab::sampler::{Functionals, Sampler, SimConfig};

fn terminal_mean(s: &Sampler<'_>, x0: &[f64; 2], exec: Execution, n: usize) -> f64 {
    let xs = map_indexed_with(exec, n, |i| {
        let rec = s.simulate_path(x0, &[0.1], i as u64);
        rec.terminal().map_or(0.0, |st| st.x[0])
    });
    xs.iter().sum::<f64>() / n as f64
}

fn paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("paths");
    group.sample_size(10);
    let cases = [
        ("half_line", ManifoldSpec::half_line(false), PhiField::One, [0.0, 0.0]),
        ("annulus_phi", ManifoldSpec::annulus(1.0, 2.0), PhiField::annulus_default(), [0.0, 1.5]),
    ];
    for (name, m, phi, x0) in &cases {
        let s = Sampler::new(m, phi, SimConfig::new(1e-3, 1), Functionals::default()).expect("valid sampler");
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(*name, format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| terminal_mean(&s, x0, exec, 2000))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, paths);
criterion_main!(benches);
