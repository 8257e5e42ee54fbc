//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use pfltank_core::config::load_scenario;
use pfltank_core::robot_dynamics::PlanarArm;
use pfltank_core::sim_harness::Scenario;

pub const SCENARIOS: [&str; 4] = ["paper_replica", "push_at_floor", "stricter_switch", "budget_starved"];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// A point written as a sum of planar terms `r·(cos θ, sin θ)`, `θ = aᵀq`.
struct Chain(Vec<(f64, [f64; 2])>);

impl Chain {
    fn jacobian(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let mut j = Matrix2::zeros();
        for &(r, a) in &self.0 {
            let th = a[0] * q[0] + a[1] * q[1];
            for col in 0..2 {
                j[(0, col)] += -r * a[col] * th.sin();
                j[(1, col)] += r * a[col] * th.cos();
            }
        }
        j
    }

    /// `∂J/∂q_k`.
    fn jacobian_derivative(&self, q: &Vector2<f64>, k: usize) -> Matrix2<f64> {
        let mut d = Matrix2::zeros();
        for &(r, a) in &self.0 {
            let th = a[0] * q[0] + a[1] * q[1];
            for col in 0..2 {
                d[(0, col)] += -r * a[col] * a[k] * th.cos();
                d[(1, col)] += -r * a[col] * a[k] * th.sin();
            }
        }
        d
    }
}

/// Euler-Lagrange model of the 2R arm assembled from CoM Jacobians.
pub struct ArmOracle {
    arm: PlanarArm,
    com1: Chain,
    com2: Chain,
    tip: Chain,
}

impl ArmOracle {
    pub fn new(arm: &PlanarArm) -> Self {
        Self {
            arm: arm.clone(),
            com1: Chain(vec![(arm.com1, [1.0, 0.0])]),
            com2: Chain(vec![(arm.l1, [1.0, 0.0]), (arm.com2, [1.0, 1.0])]),
            tip: Chain(vec![(arm.l1, [1.0, 0.0]), (arm.l2, [1.0, 1.0])]),
        }
    }

    pub fn mass_matrix(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let j1 = self.com1.jacobian(q);
        let j2 = self.com2.jacobian(q);
        let w1 = Matrix2::new(1.0, 0.0, 0.0, 0.0);
        let w2 = Matrix2::new(1.0, 1.0, 1.0, 1.0);
        j1.transpose() * j1 * self.arm.m1 + j2.transpose() * j2 * self.arm.m2 + w1 * self.arm.i1 + w2 * self.arm.i2
    }

    pub fn mass_matrix_derivative(&self, q: &Vector2<f64>, k: usize) -> Matrix2<f64> {
        let mut d = Matrix2::zeros();
        for (chain, m) in [(&self.com1, self.arm.m1), (&self.com2, self.arm.m2)] {
            let j = chain.jacobian(q);
            let dj = chain.jacobian_derivative(q, k);
            d += (dj.transpose() * j + j.transpose() * dj) * m;
        }
        d
    }

    /// Coriolis matrix from Christoffel symbols of the first kind.
    pub fn coriolis_matrix(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let dm = [self.mass_matrix_derivative(q, 0), self.mass_matrix_derivative(q, 1)];
        let mut c = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    c[(i, j)] += 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qdot[k];
                }
            }
        }
        c
    }

    pub fn mass_matrix_rate(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        self.mass_matrix_derivative(q, 0) * qdot[0] + self.mass_matrix_derivative(q, 1) * qdot[1]
    }

    pub fn gravity_torque(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let up = Vector2::new(0.0, self.arm.gravity);
        self.com1.jacobian(q).transpose() * up * self.arm.m1 + self.com2.jacobian(q).transpose() * up * self.arm.m2
    }

    pub fn tip_jacobian(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        self.tip.jacobian(q)
    }

    /// Apparent mass along unit `n` in the arm plane: `Λ = (J M⁻¹ Jᵀ)⁻¹`,
    /// `m = (nᵀ Λ⁻¹ n)⁻¹`, each inverse taken by LU.
    pub fn apparent_mass(&self, q: &Vector2<f64>, n: &Vector2<f64>) -> f64 {
        let j = self.tip_jacobian(q);
        let m_inv = self.mass_matrix(q).lu().try_inverse().expect("M invertible");
        let lambda = (j * m_inv * j.transpose()).lu().try_inverse().expect("away from singularity");
        let lambda_inv = lambda.lu().try_inverse().expect("Λ invertible");
        1.0 / (n.transpose() * lambda_inv * n)[(0, 0)]
    }
}

/// Best α on a 1e-5 grid, refined by bisection inside the bracketing cell.
pub fn alpha_oracle(f: &DVector<f64>, v: &DVector<f64>, t_prev: f64, eps: f64, tau: f64, p_ext: f64) -> f64 {
    let g = |a: f64| t_prev + tau * p_ext + tau * a * f.dot(v) - eps;
    let n = 100_000;
    // scanning upwards, the last feasible point is the one closest to 1
    let mut best: Option<usize> = None;
    for i in 0..=n {
        if g(i as f64 / n as f64) >= 0.0 {
            best = Some(i);
        }
    }
    let i = best.expect("alpha = 0 feasible");
    if i == n {
        return 1.0;
    }
    // feasible at i/n, infeasible at (i+1)/n: the boundary lies between
    let (mut lo, mut hi) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Nearest point to `f` in `{F : wᵀF ≥ r}` by active-set enumeration: try
/// the unconstrained optimum, then the KKT system with the constraint
/// active, solved by LU.
pub fn projection_oracle(f: &DVector<f64>, w: &DVector<f64>, r: f64) -> DVector<f64> {
    if w.dot(f) >= r {
        return f.clone();
    }
    let n = f.len();
    // [I  −w; wᵀ 0] [F; λ] = [f; r]
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        kkt[(i, i)] = 1.0;
        kkt[(i, n)] = -w[i];
        kkt[(n, i)] = w[i];
        rhs[i] = f[i];
    }
    rhs[n] = r;
    let sol = kkt.lu().solve(&rhs).expect("KKT system is regular for w != 0");
    assert!(sol[n] >= -1e-12, "multiplier must be non-negative");
    sol.rows(0, n).into_owned()
}
