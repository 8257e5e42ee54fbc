//! Simulated ground-truth plants.
//!
//! Both plants expose the operational-space port `Λ(x)ẍ + S(x,ẋ)ẋ = −F_c + F_e`
//! with gravity removed. The controller only ever sees pose, twist and the
//! external wrench; inertia and joint state stay inside this module and are
//! used for verification (kinetic energy, energy audits).
//!
//! Integration is explicit trapezoidal (Heun) under a zero-order-held wrench.
//! For the constant-inertia plant this is the exact solution of the held
//! step; for the arm it keeps the per-step energy audit at `O(τ³)`.

mod cartesian;
mod planar_arm;

pub use cartesian::CartesianPlant;
pub use planar_arm::{ArmPlant, PlanarArm};

use nalgebra::{DMatrix, DVector, Matrix3xX};

use crate::error::Result;

/// Snapshot of the plant at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    /// Operational pose (m).
    pub x: DVector<f64>,
    /// Operational twist (m/s).
    pub xdot: DVector<f64>,
    /// `H = ½ ẋᵀ Λ(x) ẋ` (J), always computed from the true inertia.
    pub kinetic_energy_truth: f64,
    pub time: f64,
}

/// Wrench applied to the plant over one held step.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchInput {
    /// Total actuation `F_c` (N). The plant receives `−F_c`; the damper force
    /// is folded in here by the controller.
    pub f_c: DVector<f64>,
    /// External wrench `F_e` (N).
    pub f_e: DVector<f64>,
}

impl WrenchInput {
    pub fn zero(dim: usize) -> Self {
        Self {
            f_c: DVector::zeros(dim),
            f_e: DVector::zeros(dim),
        }
    }

    /// Net operational force `F = −F_c + F_e`.
    pub fn net(&self) -> DVector<f64> {
        &self.f_e - &self.f_c
    }

    pub fn is_finite(&self) -> bool {
        self.f_c.iter().chain(self.f_e.iter()).all(|v| v.is_finite())
    }
}

/// A fixed-step operational-space plant.
pub trait Plant {
    /// Workspace dimension `m`.
    fn dim(&self) -> usize;
    fn pose(&self) -> DVector<f64>;
    fn twist(&self) -> DVector<f64>;
    fn kinetic_energy(&self) -> f64;
    /// Operational inertia `Λ(x)` at the current state. Verification only.
    fn operational_inertia(&self) -> DMatrix<f64>;
    /// Advance one held step of length `tau`.
    fn step(&mut self, input: &WrenchInput, tau: f64) -> Result<()>;
    fn time(&self) -> f64;

    fn state(&self) -> PlantState {
        PlantState {
            x: self.pose(),
            xdot: self.twist(),
            kinetic_energy_truth: self.kinetic_energy(),
            time: self.time(),
        }
    }
}

/// Joint-space inertial model of a serial manipulator, as needed for the
/// end-point mobility tensor.
pub trait ArmModel {
    fn dof(&self) -> usize;
    /// Joint-space inertia `M(q)`.
    fn joint_inertia(&self, q: &DVector<f64>) -> DMatrix<f64>;
    /// Linear-velocity Jacobian `J_v(q)`, always 3 rows.
    fn linear_jacobian(&self, q: &DVector<f64>) -> Matrix3xX<f64>;
}

/// `|ΔH − τ·(−F_c + F_e)ᵀ ẋ_mid|` for one step, `ẋ_mid` being the mean of the
/// two sampled twists. Zero for the constant-inertia plant, `O(τ³)` for the arm.
pub fn power_balance_residual(prev: &PlantState, next: &PlantState, input: &WrenchInput, tau: f64) -> f64 {
    let xdot_mid = (&prev.xdot + &next.xdot) * 0.5;
    let work = tau * input.net().dot(&xdot_mid);
    (next.kinetic_energy_truth - prev.kinetic_energy_truth - work).abs()
}

/// The two shipped plants behind one type, so a scenario can own either.
#[derive(Debug, Clone)]
pub enum PlantModel {
    Cartesian(CartesianPlant),
    Arm(ArmPlant),
}

impl Plant for PlantModel {
    fn dim(&self) -> usize {
        match self {
            PlantModel::Cartesian(p) => p.dim(),
            PlantModel::Arm(p) => p.dim(),
        }
    }

    fn pose(&self) -> DVector<f64> {
        match self {
            PlantModel::Cartesian(p) => p.pose(),
            PlantModel::Arm(p) => p.pose(),
        }
    }

    fn twist(&self) -> DVector<f64> {
        match self {
            PlantModel::Cartesian(p) => p.twist(),
            PlantModel::Arm(p) => p.twist(),
        }
    }

    fn kinetic_energy(&self) -> f64 {
        match self {
            PlantModel::Cartesian(p) => p.kinetic_energy(),
            PlantModel::Arm(p) => p.kinetic_energy(),
        }
    }

    fn operational_inertia(&self) -> DMatrix<f64> {
        match self {
            PlantModel::Cartesian(p) => p.operational_inertia(),
            PlantModel::Arm(p) => p.operational_inertia(),
        }
    }

    fn step(&mut self, input: &WrenchInput, tau: f64) -> Result<()> {
        match self {
            PlantModel::Cartesian(p) => p.step(input, tau),
            PlantModel::Arm(p) => p.step(input, tau),
        }
    }

    fn time(&self) -> f64 {
        match self {
            PlantModel::Cartesian(p) => p.time(),
            PlantModel::Arm(p) => p.time(),
        }
    }
}

pub(crate) fn check_step_args(input: &WrenchInput, dim: usize, tau: f64) -> Result<()> {
    use crate::error::Error;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("timestep must be positive and finite, got {tau}")));
    }
    if input.f_c.len() != dim || input.f_e.len() != dim {
        return Err(Error::Domain(format!(
            "wrench dimension mismatch: plant has {dim}, got f_c {} / f_e {}",
            input.f_c.len(),
            input.f_e.len()
        )));
    }
    if !input.is_finite() {
        return Err(Error::Domain("wrench contains non-finite entries".into()));
    }
    Ok(())
}
