use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use realm_bench::operands;
use realm_core::{
    checksum, gemm, inject, predicted_output_checksum, statistical_unit, ArrayConfig, BitWindow,
    CriticalRegionParams, FaultConfig, Side, StatUnitConfig, SystolicArray,
};

fn bench_gemm(c: &mut Criterion) {
    let mut g = c.benchmark_group("gemm");
    for &n in &[16usize, 64, 128] {
        let (w, x) = operands(n, n, n, 1);
        g.throughput(Throughput::Elements((n * n * n) as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| gemm(black_box(&w), black_box(&x)).unwrap())
        });
    }
    g.finish();
}

fn bench_checksums(c: &mut Criterion) {
    let (w, x) = operands(64, 64, 64, 2);
    let y = gemm(&w, &x).unwrap();
    c.bench_function("checksum/observed_64", |b| b.iter(|| checksum(black_box(&y), Side::Row)));
    c.bench_function("checksum/predicted_64", |b| {
        b.iter(|| predicted_output_checksum(black_box(&w), black_box(&x)).unwrap())
    });
}

fn bench_inject(c: &mut Criterion) {
    let (w, x) = operands(64, 64, 64, 3);
    let y = gemm(&w, &x).unwrap();
    let mut g = c.benchmark_group("inject");
    for &ber in &[1e-5, 1e-3] {
        let cfg = FaultConfig::ber(ber, BitWindow::default());
        g.bench_with_input(BenchmarkId::from_parameter(ber), &cfg, |b, cfg| {
            b.iter(|| inject(black_box(&y), cfg, 7).unwrap())
        });
    }
    g.finish();
}

fn bench_stat_unit(c: &mut Criterion) {
    let params = CriticalRegionParams::new(2.0, 40.0, 4).unwrap();
    let (w, x) = operands(64, 64, 64, 4);
    let y = gemm(&w, &x).unwrap();
    let predicted = predicted_output_checksum(&w, &x).unwrap();
    let (faulty, _) = inject(&y, &FaultConfig::ber(1e-3, BitWindow::default()), 9).unwrap();
    let observed = checksum(&faulty, Side::Row);

    let mut g = c.benchmark_group("stat_unit");
    let modes = [
        ("exact", StatUnitConfig::exact(params)),
        ("lzc", StatUnitConfig::lzc(params, 4).unwrap()),
    ];
    for (name, cfg) in &modes {
        g.bench_function(*name, |b| {
            b.iter(|| statistical_unit(black_box(&predicted), black_box(&observed), cfg).unwrap())
        });
    }
    g.finish();
}

fn bench_array(c: &mut Criterion) {
    let (w, x) = operands(64, 64, 64, 5);
    let array = SystolicArray::new(ArrayConfig {
        array_rows: 16,
        array_cols: 16,
        ..ArrayConfig::default()
    })
    .unwrap();
    c.bench_function("array/pass_64_tile16", |b| b.iter(|| array.pass(black_box(&w), black_box(&x)).unwrap()));
}

criterion_group!(benches, bench_gemm, bench_checksums, bench_inject, bench_stat_unit, bench_array);
criterion_main!(benches);
