use nalgebra::{DMatrix, DVector, Matrix2, Matrix3xX, Vector2};

use super::{check_step_args, ArmModel, Plant, WrenchInput};
use crate::error::{Error, Result};

/// Planar two-link revolute arm moving in a vertical plane, gravity along −y.
///
/// Joint angles are absolute for link 1 and relative for link 2, measured
/// from the +x axis. Each link's centre of mass sits at `com_i` along the link.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarArm {
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
    /// Inertia of each link about its own centre of mass (kg·m²).
    pub i1: f64,
    pub i2: f64,
    pub com1: f64,
    pub com2: f64,
    pub gravity: f64,
}

impl Default for PlanarArm {
    fn default() -> Self {
        Self::uniform_rods(0.5, 0.5, 4.0, 4.0).expect("default arm parameters are valid")
    }
}

impl PlanarArm {
    /// Links modelled as uniform rods: CoM at mid-length, `I = m l² / 12`.
    pub fn uniform_rods(l1: f64, l2: f64, m1: f64, m2: f64) -> Result<Self> {
        Self {
            l1,
            l2,
            m1,
            m2,
            i1: m1 * l1 * l1 / 12.0,
            i2: m2 * l2 * l2 / 12.0,
            com1: 0.5 * l1,
            com2: 0.5 * l2,
            gravity: 9.81,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let positive = [self.l1, self.l2, self.m1, self.m2];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("arm link lengths and masses must be positive".into()));
        }
        let non_negative = [self.i1, self.i2, self.com1, self.com2, self.gravity];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("arm inertias, CoM offsets and gravity must be non-negative".into()));
        }
        Ok(self)
    }

    /// Total moving mass `m1 + m2`.
    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn mass_matrix(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let (l1, c1, c2, m2) = (self.l1, self.com1, self.com2, self.m2);
        let cos2 = q[1].cos();
        let m11 = self.i1 + self.i2 + self.m1 * c1 * c1 + m2 * (l1 * l1 + c2 * c2 + 2.0 * l1 * c2 * cos2);
        let m12 = self.i2 + m2 * (c2 * c2 + l1 * c2 * cos2);
        let m22 = self.i2 + m2 * c2 * c2;
        Matrix2::new(m11, m12, m12, m22)
    }

    /// Coriolis/centrifugal matrix built from Christoffel symbols, so that
    /// `Ṁ − 2C` is skew-symmetric.
    pub fn coriolis_matrix(&self, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
        let h = -self.m2 * self.l1 * self.com2 * q[1].sin();
        Matrix2::new(h * qdot[1], h * (qdot[0] + qdot[1]), -h * qdot[0], 0.0)
    }

    /// Gravity torque `g(q) = ∂V/∂q`.
    pub fn gravity_torque(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        let g2 = self.m2 * self.com2 * self.gravity * c12;
        let g1 = (self.m1 * self.com1 + self.m2 * self.l1) * self.gravity * c1 + g2;
        Vector2::new(g1, g2)
    }

    /// Planar linear Jacobian of the end-effector.
    pub fn jacobian(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        Matrix2::new(
            -self.l1 * s1 - self.l2 * s12,
            -self.l2 * s12,
            self.l1 * c1 + self.l2 * c12,
            self.l2 * c12,
        )
    }

    pub fn forward_kinematics(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        Vector2::new(self.l1 * c1 + self.l2 * c12, self.l1 * s1 + self.l2 * s12)
    }

    /// Joint acceleration under a held operational force `f`, with the gravity
    /// torque compensated at the same configuration it is evaluated at.
    fn joint_acceleration(&self, q: &Vector2<f64>, qdot: &Vector2<f64>, f: &Vector2<f64>) -> Option<Vector2<f64>> {
        let gravity = self.gravity_torque(q);
        let actuation = self.jacobian(q).transpose() * f + gravity;
        let rhs = actuation - self.coriolis_matrix(q, qdot) * qdot - gravity;
        self.mass_matrix(q).cholesky().map(|c| c.solve(&rhs))
    }
}

fn vec2(v: &DVector<f64>) -> Vector2<f64> {
    Vector2::new(v[0], v[1])
}

impl ArmModel for PlanarArm {
    fn dof(&self) -> usize {
        2
    }

    fn joint_inertia(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let m = self.mass_matrix(&vec2(q));
        DMatrix::from_column_slice(2, 2, m.as_slice())
    }

    fn linear_jacobian(&self, q: &DVector<f64>) -> Matrix3xX<f64> {
        let j = self.jacobian(&vec2(q));
        let mut out = Matrix3xX::zeros(2);
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(&j);
        out
    }
}

/// The arm as an operational-space plant.
#[derive(Debug, Clone)]
pub struct ArmPlant {
    arm: PlanarArm,
    q: Vector2<f64>,
    qdot: Vector2<f64>,
    time: f64,
}

impl ArmPlant {
    pub fn new(arm: PlanarArm, q0: Vector2<f64>, qdot0: Vector2<f64>) -> Result<Self> {
        let arm = arm.validated()?;
        if q0.iter().chain(qdot0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("arm initial state must be finite".into()));
        }
        Ok(Self {
            arm,
            q: q0,
            qdot: qdot0,
            time: 0.0,
        })
    }

    pub fn arm(&self) -> &PlanarArm {
        &self.arm
    }

    pub fn joint_state(&self) -> (Vector2<f64>, Vector2<f64>) {
        (self.q, self.qdot)
    }
}

impl Plant for ArmPlant {
    fn dim(&self) -> usize {
        2
    }

    fn pose(&self) -> DVector<f64> {
        let p = self.arm.forward_kinematics(&self.q);
        DVector::from_column_slice(p.as_slice())
    }

    fn twist(&self) -> DVector<f64> {
        let v = self.arm.jacobian(&self.q) * self.qdot;
        DVector::from_column_slice(v.as_slice())
    }

    fn kinetic_energy(&self) -> f64 {
        0.5 * self.qdot.dot(&(self.arm.mass_matrix(&self.q) * self.qdot))
    }

    fn operational_inertia(&self) -> DMatrix<f64> {
        let j = self.arm.jacobian(&self.q);
        let mobility = j * self.arm.mass_matrix(&self.q).try_inverse().unwrap_or_else(Matrix2::zeros) * j.transpose();
        let lambda = mobility.try_inverse().unwrap_or_else(|| Matrix2::from_element(f64::INFINITY));
        DMatrix::from_column_slice(2, 2, lambda.as_slice())
    }

    fn step(&mut self, input: &WrenchInput, tau: f64) -> Result<()> {
        check_step_args(input, 2, tau)?;
        let f = vec2(&input.net());
        let fault = |detail: &str| Error::IntegrationFault {
            time: self.time,
            detail: detail.to_string(),
        };
        let a1 = self
            .arm
            .joint_acceleration(&self.q, &self.qdot, &f)
            .ok_or_else(|| fault("singular joint inertia"))?;
        let q_pred = self.q + self.qdot * tau;
        let qdot_pred = self.qdot + a1 * tau;
        let a2 = self
            .arm
            .joint_acceleration(&q_pred, &qdot_pred, &f)
            .ok_or_else(|| fault("singular joint inertia"))?;
        let q_next = self.q + (self.qdot + qdot_pred) * (0.5 * tau);
        let qdot_next = self.qdot + (a1 + a2) * (0.5 * tau);
        if q_next.iter().chain(qdot_next.iter()).any(|v| !v.is_finite()) {
            return Err(fault("arm state became non-finite"));
        }
        self.q = q_next;
        self.qdot = qdot_next;
        self.time += tau;
        Ok(())
    }

    fn time(&self) -> f64 {
        self.time
    }
}
