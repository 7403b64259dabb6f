use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use lkchaos_core::integrator::Integrator;
use lkchaos_core::{DriveConfig, FeedbackConfig, FloorPolicy, LaserParams, SimConfig};

fn steps(c: &mut Criterion) {
    let p = LaserParams::default();
    let f = FeedbackConfig::with_kappa(50e9).unwrap();
    let d = DriveConfig::new(1.5).unwrap();
    let mut group = c.benchmark_group("rk4");
    group.throughput(Throughput::Elements(10_000));
    for policy in [FloorPolicy::Rescue, FloorPolicy::Clamp] {
        let cfg = SimConfig {
            floor_policy: policy,
            ..SimConfig::default()
        };
        let mut warm = Integrator::new(&p, &f, &d, &cfg).unwrap();
        for _ in 0..100_000 {
            warm.step().unwrap();
        }
        group.bench_function(policy.as_str(), |b| {
            b.iter_batched_ref(
                || warm.clone(),
                |integ| {
                    for _ in 0..10_000 {
                        integ.step().unwrap();
                    }
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, steps);
criterion_main!(benches);
