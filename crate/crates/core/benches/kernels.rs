use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grainkin::expm::Propagator;
use grainkin::io::{build_initial_state, project_polyhedral, InitialFamily};
use grainkin::stepper::{truncation_ladder, StepperConfig, StrangStepper};
use grainkin::{AreaGrid, Exec, ModelParams, SimState};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn setup(n0: usize) -> (ModelParams, SimState) {
    let p = ModelParams::truncated(1.0, n0, AreaGrid::covering(0.01, 30.0).unwrap()).unwrap();
    let g = build_initial_state(
        &InitialFamily::Exponential {
            lambda: 2.0,
            scale: 1.0,
            project: true,
        },
        &p,
    )
    .unwrap();
    (p, g)
}

fn panel_product(c: &mut Criterion) {
    let mut group = c.benchmark_group("panel_product");
    for n0 in [20, 50] {
        let (p, g) = setup(n0);
        let e = Propagator::new(&p, 0.005).unwrap();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n0), &g, |b, g| {
                b.iter_batched_ref(|| g.clone(), |s| e.apply_panel(black_box(s), exec), criterion::BatchSize::LargeInput)
            });
        }
    }
    group.finish();
}

fn strang_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    let (p, g) = setup(20);
    for (name, exec) in POLICIES {
        let cfg = StepperConfig {
            dt: 0.01,
            exec,
            ..Default::default()
        };
        let mut stepper = StrangStepper::new(&p, &cfg).unwrap();
        group.bench_function(name, |b| b.iter(|| stepper.step(black_box(&g)).unwrap()));
    }
    group.finish();
}

fn ladder(c: &mut Criterion) {
    let mut group = c.benchmark_group("ladder");
    group.sample_size(10);
    let (p, mut g) = setup(22);
    // every rung must see the same admissible datum
    for n in 9..=22 {
        g.scale_class(n, 0.0);
    }
    let g = project_polyhedral(&g, &p).unwrap();
    for (name, exec) in POLICIES {
        let cfg = StepperConfig {
            dt: 0.01,
            overflow_tol: f64::INFINITY,
            sample_every: 10,
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| truncation_ladder(black_box(&g), &[10, 14, 18, 22], 0.2, &cfg, &p).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, panel_product, strang_step, ladder);
criterion_main!(benches);
