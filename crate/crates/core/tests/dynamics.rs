mod common;

use common::ArmOracle;
use nalgebra::{DVector, Vector2, Vector3};
use pfltank_core::iso15066::{apparent_mass, endpoint_mobility, robot_effective_mass, RobotMassSpec};
use pfltank_core::robot_dynamics::{power_balance_residual, ArmPlant, PlanarArm, Plant, WrenchInput};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arms() -> Vec<PlanarArm> {
    let mut lumpy = PlanarArm::uniform_rods(0.7, 0.4, 6.0, 2.5).unwrap();
    lumpy.com1 = 0.2;
    lumpy.com2 = 0.3;
    lumpy.i1 = 0.05;
    lumpy.i2 = 0.02;
    vec![PlanarArm::default(), lumpy]
}

fn random_configs(seed: u64, n: usize) -> Vec<(Vector2<f64>, Vector2<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q = Vector2::new(rng.random_range(-3.1..3.1), rng.random_range(-3.1..3.1));
            let qd = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            (q, qd)
        })
        .collect()
}

#[test]
fn mass_coriolis_jacobian_match_oracle() {
    for arm in arms() {
        let oracle = ArmOracle::new(&arm);
        for (q, qd) in random_configs(11, 100) {
            assert!((arm.mass_matrix(&q) - oracle.mass_matrix(&q)).amax() < 1e-9);
            assert!((arm.coriolis_matrix(&q, &qd) - oracle.coriolis_matrix(&q, &qd)).amax() < 1e-9);
            assert!((arm.jacobian(&q) - oracle.tip_jacobian(&q)).amax() < 1e-9);
            assert!((arm.gravity_torque(&q) - oracle.gravity_torque(&q)).amax() < 1e-9);
        }
    }
}

#[test]
fn mass_rate_minus_twice_coriolis_is_skew() {
    for arm in arms() {
        let oracle = ArmOracle::new(&arm);
        for (q, qd) in random_configs(12, 100) {
            let n = oracle.mass_matrix_rate(&q, &qd) - arm.coriolis_matrix(&q, &qd) * 2.0;
            assert!((n + n.transpose()).amax() < 1e-9);
        }
    }
}

#[test]
fn apparent_mass_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for arm in arms() {
        let oracle = ArmOracle::new(&arm);
        let mut checked = 0;
        while checked < 100 {
            let q = Vector2::new(rng.random_range(-3.1..3.1), rng.random_range(0.2..2.9));
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let n2 = Vector2::new(phi.cos(), phi.sin());
            let mobility = endpoint_mobility(&arm, &DVector::from_column_slice(q.as_slice())).unwrap();
            let got = apparent_mass(&Vector3::new(n2[0], n2[1], 0.0), &mobility).unwrap();
            let want = oracle.apparent_mass(&q, &n2);
            assert!((got - want).abs() < 1e-9 * want.max(1.0), "q {q:?}: {got} vs {want}");
            checked += 1;
        }
    }
}

#[test]
fn lumped_mass_overestimates_apparent_mass_somewhere() {
    let arm = PlanarArm::default();
    let lumped = robot_effective_mass(&RobotMassSpec::new(arm.total_mass(), 0.0).unwrap());
    let mut smallest = f64::INFINITY;
    for i in 0..40 {
        let q2 = 0.1 + 3.0 * i as f64 / 40.0;
        let mobility = endpoint_mobility(&arm, &DVector::from_vec(vec![0.0, q2])).unwrap();
        for j in 0..36 {
            let phi = j as f64 * std::f64::consts::PI / 36.0;
            let m = apparent_mass(&Vector3::new(phi.cos(), phi.sin(), 0.0), &mobility).unwrap();
            smallest = smallest.min(m);
        }
    }
    assert!(smallest < lumped, "min apparent {smallest} kg vs lumped {lumped} kg");
}

#[test]
fn energy_audit_halves_quarterly() {
    // the accumulated residual must shrink by ≥ 3.5x when tau halves
    let audit = |tau: f64| {
        let mut plant = ArmPlant::new(PlanarArm::default(), Vector2::new(0.3, 1.1), Vector2::new(0.4, -0.6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut total = 0.0;
        let per_segment = (0.01 / tau).round() as usize;
        for _ in 0..100 {
            let input = WrenchInput {
                f_c: DVector::from_vec(vec![rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)]),
                f_e: DVector::zeros(2),
            };
            for _ in 0..per_segment {
                let prev = plant.state();
                plant.step(&input, tau).unwrap();
                total += power_balance_residual(&prev, &plant.state(), &input, tau);
            }
        }
        total
    };
    let coarse = audit(2e-3);
    let fine = audit(1e-3);
    assert!(fine < 1e-4, "1 s residual {fine}");
    assert!(coarse / fine >= 3.5, "ratio {}", coarse / fine);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(32) })]

    #[test]
    fn passivity_of_the_arm(
        q1 in -3.0f64..3.0, q2 in 0.2f64..2.9,
        fx in -6.0f64..6.0, fy in -6.0f64..6.0,
        ex in -2.0f64..2.0, ey in -2.0f64..2.0,
    ) {
        let tau = 1e-3;
        let mut plant = ArmPlant::new(PlanarArm::default(), Vector2::new(q1, q2), Vector2::zeros()).unwrap();
        let input = WrenchInput {
            f_c: DVector::from_vec(vec![fx, fy]),
            f_e: DVector::from_vec(vec![ex, ey]),
        };
        let h0 = plant.kinetic_energy();
        let mut work = 0.0;
        for _ in 0..300 {
            let prev = plant.twist();
            plant.step(&input, tau).unwrap();
            work += tau * input.net().dot(&((prev + plant.twist()) * 0.5));
        }
        // 0.3 s simulated, 1e-4 J/s allowance
        prop_assert!(plant.kinetic_energy() - h0 <= work + 0.3e-4);
    }
}
