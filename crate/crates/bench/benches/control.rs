use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::{dvector, DVector, Vector2};
use pfltank_core::config::load_scenario;
use pfltank_core::energy_tank::TankConfig;
use pfltank_core::iso15066::BodyRegion;
use pfltank_core::robot_dynamics::{ArmPlant, PlanarArm, Plant, WrenchInput};
use pfltank_core::safety_controller::{
    project_halfspace, solve_alpha, EnergyConstraint, Observation, PdGains, RegionSchedule, SafetyController,
};
use pfltank_core::sim_harness::run;

fn optimizer(c: &mut Criterion) {
    let f = dvector![30.0, -12.0];
    let v = dvector![0.8, 0.3];
    let cons = EnergyConstraint {
        t_prev: 3.41,
        epsilon: 3.4,
        tau: 1e-3,
        p_ext: 0.2,
    };
    c.bench_function("solve_alpha", |b| {
        b.iter(|| solve_alpha(black_box(&f), black_box(&v), black_box(&cons), 1e-9))
    });
    c.bench_function("project_halfspace", |b| {
        b.iter(|| project_halfspace(black_box(&f), black_box(&v), black_box(&cons), 1e-6))
    });
}

fn arm_step(c: &mut Criterion) {
    let plant = ArmPlant::new(PlanarArm::default(), Vector2::new(0.3, 1.1), Vector2::new(0.4, -0.6)).unwrap();
    let input = WrenchInput {
        f_c: dvector![5.0, -3.0],
        f_e: DVector::zeros(2),
    };
    c.bench_function("arm_step", |b| {
        b.iter_batched_ref(|| plant.clone(), |p| p.step(&input, 1e-3).unwrap(), BatchSize::SmallInput)
    });
}

fn control_cycle(c: &mut Criterion) {
    let gains = PdGains::new(dvector![12.0, 12.0], dvector![8.0, 8.0], dvector![3.0, 1.0]).unwrap();
    let schedule = RegionSchedule::single(BodyRegion::tabulated("chest", 1.6).unwrap());
    let ctrl = SafetyController::new(gains, schedule, 5.0, 0.0, 1e-3, TankConfig::default()).unwrap();
    let obs = Observation {
        x: dvector![0.5, 0.2],
        xdot: dvector![0.6, 0.2],
        f_e: dvector![1.0, 0.0],
    };
    c.bench_function("control_cycle", |b| {
        b.iter_batched_ref(|| ctrl.clone(), |ctrl| ctrl.cycle(0, &obs).unwrap(), BatchSize::SmallInput)
    });
}

fn full_run(c: &mut Criterion) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper_replica.json");
    let scenario = load_scenario(&path).unwrap();
    let mut group = c.benchmark_group("scenario");
    group.sample_size(10);
    group.bench_function("paper_replica", |b| b.iter(|| run(black_box(&scenario)).unwrap()));
    group.finish();
}

criterion_group!(benches, optimizer, arm_step, control_cycle, full_run);
criterion_main!(benches);
