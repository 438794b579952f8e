use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ionramp::chain_model::{Chain, IonSpecies};
use ionramp::sweep::{sweep_tf, Execution, ProtocolFamily, SweepSettings};

fn tf_sweep(c: &mut Criterion) {
    let chain = Chain::uniform(IonSpecies::ca40(), 4).unwrap();
    let settings = SweepSettings::new(2.0 * PI * 1.2e6, 3.0);
    let tfs: Vec<f64> = (0..8).map(|k| (3.0 + k as f64) * 1e-6).collect();

    let mut group = c.benchmark_group("tf_sweep_smoothstep_4ions");
    group.sample_size(10);
    for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(label, |b| {
            b.iter(|| sweep_tf(black_box(&chain), ProtocolFamily::Smoothstep, &tfs, &settings, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tf_sweep);
criterion_main!(benches);
