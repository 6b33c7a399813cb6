use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dmtlab::{
    AntennaConfig, CovarianceSpec, Execution, OutageExperiment, OutageMode, PowerDelayProfile,
    SnrPoint,
};

fn outage_sweep(c: &mut Criterion) {
    let pdp = PowerDelayProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
    let cov = CovarianceSpec::from_pdp(&pdp, 8).unwrap();
    let ant = AntennaConfig::new(2, 2).unwrap();
    let snrs: Vec<SnrPoint> = [10.0, 20.0]
        .iter()
        .map(|&db| SnrPoint::from_db(db).unwrap())
        .collect();

    let mut group = c.benchmark_group("outage_sweep");
    group.sample_size(10);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for (label, execution) in [
        ("sequential", Execution::Sequential),
        (
            "parallel",
            Execution::Parallel {
                workers: Some(workers.max(2)),
            },
        ),
    ] {
        group.bench_with_input(
            BenchmarkId::from_parameter(label),
            &execution,
            |b, &execution| {
                b.iter(|| {
                    OutageExperiment {
                        cov: &cov,
                        ant,
                        modes: OutageMode::ALL.to_vec(),
                        rates: vec![0.5, 1.0],
                        snrs: snrs.clone(),
                        trials: 20_000,
                        seed: 7,
                        execution,
                    }
                    .run()
                    .unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, outage_sweep);
criterion_main!(benches);
