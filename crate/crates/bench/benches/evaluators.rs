use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use diffeo_core::diskmodel::{self, CubeCoords};
use diffeo_core::instance::ChepInstance;
use diffeo_core::lifting::LiftConfig;
use diffeo_core::smoothfn;
use diffeo_core::subdivision::PsiMap;

fn scalar(c: &mut Criterion) {
    c.bench_function("lambda", |b| b.iter(|| smoothfn::lambda_fn(black_box(0.37))));
    c.bench_function("xi", |b| b.iter(|| smoothfn::xi(black_box(0.29))));
    c.bench_function("xi_inv", |b| b.iter(|| smoothfn::xi_inv(black_box(0.29))));
}

fn disk(c: &mut Criterion) {
    let t = CubeCoords::new(vec![0.2, 0.7, 0.4]).unwrap();
    let w = diskmodel::q_cube(&t);
    c.bench_function("Q_3", |b| b.iter(|| diskmodel::q_cube(black_box(&t))));
    c.bench_function("section_3", |b| b.iter(|| diskmodel::section(black_box(&w))));
}

fn psi(c: &mut Criterion) {
    let map = PsiMap::default();
    let mut g = c.benchmark_group("psi");
    for n in 1..=3 {
        let t: Vec<f64> = (0..=n).map(|i| 0.15 + 0.2 * i as f64).collect();
        let w = diskmodel::q_cube(&CubeCoords::new(t).unwrap());
        let cyl = map.apply(&w).unwrap();
        g.bench_function(format!("apply_n{n}"), |b| b.iter(|| map.apply(black_box(&w))));
        g.bench_function(format!("invert_n{n}"), |b| b.iter(|| map.invert(black_box(&cyl))));
    }
    g.finish();
}

fn chep(c: &mut Criterion) {
    let inst = ChepInstance::load("chep_d1_demo").unwrap();
    let cfg = LiftConfig {
        samples: 100,
        ..LiftConfig::default()
    };
    c.bench_function("chep_demo_100", |b| b.iter(|| inst.run(black_box(&cfg))));
}

criterion_group!(benches, scalar, disk, psi, chep);
criterion_main!(benches);
