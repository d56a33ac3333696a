use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use clockclosure_core::interrogation::{run_servo, NoiseSettings, SeriesSample, ServoSettings};
use clockclosure_core::stats::allan_point;
use clockclosure_core::{
    build_generator, enumerate_closures, load_level_table, ramsey_probability, step, AtomCount, DecaySpec,
    DensityMatrix, DriveTerm, FrequencySeries, LevelTable, NonlinearModel, RamseyProtocol,
};

fn table(name: &str) -> LevelTable {
    load_level_table(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/levels").join(name)).unwrap()
}

fn rk4_step(c: &mut Criterion) {
    let yb = table("yb_i.csv");
    let omega = 2e6;
    let gen = build_generator(
        &yb,
        &["1S0", "3P0", "3D1"],
        vec![DriveTerm::continuous(0, 1, omega, 0.1 * omega), DriveTerm::continuous(1, 2, omega, 0.0)],
        NonlinearModel::level_decomposable(&[0.0, 10.0, -5.0]).unwrap(),
        &DecaySpec::FromLifetimes,
    )
    .unwrap();
    let rho = DensityMatrix::pure(3, 0).unwrap();
    c.bench_function("rk4_step_3_level", |b| b.iter(|| step(black_box(&rho), &gen, 0.0, 1e-9).unwrap()));
}

fn ramsey(c: &mut Criterion) {
    let yb = table("yb_i.csv");
    let gen = build_generator(&yb, &["1S0", "3P0"], vec![], NonlinearModel::none(), &DecaySpec::FromLifetimes).unwrap();
    let protocol = RamseyProtocol::new("1S0-3P0".parse().unwrap(), 1e-3, 0.5).unwrap();
    c.bench_function("ramsey_probability", |b| {
        b.iter(|| ramsey_probability(&protocol, &gen, black_box(0.3)).unwrap())
    });
    let settings = ServoSettings { n_cycles: 50, ..ServoSettings::default() };
    let noise = NoiseSettings { atoms: AtomCount::Finite(1000), lo_white_hz: 0.1 };
    c.bench_function("servo_50_cycles", |b| {
        b.iter(|| run_servo(&protocol, &gen, &settings, &noise, black_box(3)).unwrap())
    });
}

fn closures(c: &mut Criterion) {
    let ra = table("ra_ii.csv");
    c.bench_function("enumerate_closures_ra", |b| b.iter(|| enumerate_closures(black_box(&ra), 4)));
}

fn allan(c: &mut Criterion) {
    let mut group = c.benchmark_group("allan_point");
    for n in [1_000usize, 100_000] {
        let series = FrequencySeries {
            transition: "a-b".parse().unwrap(),
            reference_hz: 0.0,
            cycle_duration_s: 1.0,
            samples: (0..n)
                .map(|i| SeriesSample { cycle: i as u64, timestamp_s: i as f64, frequency_hz: ((i * 7919) % 101) as f64 })
                .collect(),
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &series, |b, s| {
            b.iter(|| allan_point(s, black_box(8.0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rk4_step, ramsey, closures, allan);
criterion_main!(benches);
