use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use psqkd_core::keyrate::{delta_i_point, region_map, secure_rate};
use psqkd_core::simulator::{empirical_rate, generate, sift, transmit};
use psqkd_core::{AnnouncedPair, Attack, Channel, Modulation};

fn point(c: &mut Criterion) {
    let ch = Channel::new(0.5, 0.2).unwrap();
    let pt = AnnouncedPair::new(2.0, 1.5).unwrap();
    for attack in [Attack::Individual, Attack::Collective] {
        c.bench_function(&format!("delta_i_point/{attack}"), |b| {
            b.iter(|| delta_i_point(black_box(&ch), black_box(&pt), attack).unwrap())
        });
    }
}

fn rate(c: &mut Criterion) {
    let ch = Channel::new(0.5, 0.2).unwrap();
    let m = Modulation::new(4.6).unwrap();
    let mut g = c.benchmark_group("secure_rate");
    g.sample_size(10);
    for attack in [Attack::Individual, Attack::Collective] {
        g.bench_function(attack.to_string(), |b| {
            b.iter(|| secure_rate(black_box(&ch), &m, attack).unwrap())
        });
    }
    g.finish();
}

fn region(c: &mut Criterion) {
    let ch = Channel::new(0.5, 0.2).unwrap();
    let mut g = c.benchmark_group("region_map");
    g.sample_size(10);
    g.bench_function("individual/100x100", |b| {
        b.iter(|| region_map(&ch, Attack::Individual, 10.0, 10.0, 100, 100).unwrap())
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let ch = Channel::new(0.5, 0.2).unwrap();
    let m = Modulation::new(4.6).unwrap();
    let records = sift(&transmit(&ch, &generate(&m, 100_000, 1).unwrap(), 1), 1).records;
    let mut g = c.benchmark_group("simulator");
    g.sample_size(10);
    g.bench_function("pipeline/1e5", |b| {
        b.iter(|| {
            let raw = generate(&m, 100_000, black_box(1)).unwrap();
            sift(&transmit(&ch, &raw, 1), 1)
        })
    });
    g.bench_function("empirical_rate/1e5", |b| {
        b.iter(|| empirical_rate(black_box(&records), &ch, Attack::Individual).unwrap())
    });
    g.finish();
}

criterion_group!(benches, point, rate, region, simulation);
criterion_main!(benches);
