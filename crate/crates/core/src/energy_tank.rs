//! Modulated energy tank with external-flow re-routing and the emergency damper.
//!
//! The tank state `x_t` stores `T = ½ x_t²`. Every joule the controller puts
//! into the robot comes out of the tank, every joule an external wrench
//! injects is charged to it, and every joule taken out of the robot
//! (external extraction, damping) is returned to it. Keeping `T ≥ ε` then
//! bounds the robot's kinetic energy by `T(0) + H(0) − ε` without any
//! knowledge of its inertia.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances and floors of the tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankConfig {
    /// Allowed undershoot of the floor from rounding (J).
    pub tol_t: f64,
    /// Band above the floor in which the emergency damper may engage (J).
    pub tol_b: f64,
    /// Twist magnitude below which no damping is computed (m/s).
    pub v_floor: f64,
    /// Smallest admissible floor (J).
    pub epsilon_min: f64,
}

impl Default for TankConfig {
    fn default() -> Self {
        Self {
            tol_t: 1e-9,
            tol_b: 1e-3,
            v_floor: 1e-6,
            epsilon_min: 1e-3,
        }
    }
}

impl TankConfig {
    pub fn validated(self) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.tol_t) || !ok(self.tol_b) || !ok(self.v_floor) || !ok(self.epsilon_min) {
            return Err(Error::Config(format!("tank tolerances must all be positive: {self:?}")));
        }
        Ok(self)
    }
}

/// Tank value snapshot. Updates return new states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankState {
    /// Positive root of `2T`.
    pub x_t: f64,
    /// Current lower energy bound ε (J).
    pub epsilon: f64,
    /// `T(0)` (J).
    pub t_initial: f64,
    /// `H(0)` (J), the robot's kinetic energy when the tank was filled.
    pub h_initial: f64,
}

impl TankState {
    /// Tank filled with `t_initial` for a robot starting with kinetic energy
    /// `h_initial`, floor `epsilon`.
    pub fn new(t_initial: f64, h_initial: f64, epsilon: f64) -> Result<Self> {
        if !(t_initial.is_finite() && t_initial > 0.0) {
            return Err(Error::Config(format!("initial tank energy must be positive, got {t_initial}")));
        }
        if !(h_initial.is_finite() && h_initial >= 0.0) {
            return Err(Error::Config(format!("initial kinetic energy must be non-negative, got {h_initial}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!("tank floor must be positive, got {epsilon}")));
        }
        Ok(Self {
            x_t: (2.0 * t_initial).sqrt(),
            epsilon,
            t_initial,
            h_initial,
        })
    }

    pub fn energy(&self) -> f64 {
        tank_energy(self)
    }

    /// Upper cap: the whole closed-loop budget `T(0) + H(0)`.
    pub fn t_max(&self) -> f64 {
        self.t_initial + self.h_initial
    }

    /// Kinetic-energy bound implied by the current floor.
    pub fn kinetic_bound(&self) -> f64 {
        self.t_max() - self.epsilon
    }

    /// Model-free estimate of the robot's kinetic energy, `H(0) + T(0) − T`.
    pub fn kinetic_estimate(&self) -> f64 {
        self.t_max() - self.energy()
    }

    fn with_energy(self, energy: f64) -> Self {
        Self {
            x_t: (2.0 * energy.max(0.0)).sqrt(),
            ..self
        }
    }
}

/// `T = ½ x_t²`.
pub fn tank_energy(state: &TankState) -> f64 {
    0.5 * state.x_t * state.x_t
}

/// Modulating vector `a = γ / x_t`; the port output `a·x_t` reproduces `γ`.
/// Only defined while the tank holds at least its floor (within `tol_t`).
pub fn modulation(gamma: &DVector<f64>, state: &TankState, tol_t: f64) -> Result<DVector<f64>> {
    if !(state.x_t > 0.0) || state.energy() < state.epsilon - tol_t {
        return Err(Error::Domain(format!(
            "tank at {} J is below its floor {} J; modulation is singular",
            state.energy(),
            state.epsilon
        )));
    }
    Ok(gamma / state.x_t)
}

/// Emergency damper coefficient (N·s/m). Non-zero only when the external
/// wrench injects power while the tank sits within `tol_b` of its floor; it
/// then dissipates exactly the injected power.
pub fn damper_coefficient(f_e: &DVector<f64>, xdot: &DVector<f64>, state: &TankState, tol_b: f64, v_floor: f64) -> f64 {
    let injected = f_e.dot(xdot);
    let speed_sq = xdot.norm_squared();
    if injected > 0.0 && state.energy() <= state.epsilon + tol_b && speed_sq > v_floor * v_floor {
        injected / speed_sq
    } else {
        0.0
    }
}

/// Power flows of one cycle, all evaluated at the sampled twist.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerFlows {
    /// `F_cᵀ ẋ` (W).
    pub p_task: f64,
    /// `F_eᵀ ẋ` (W), positive when the environment pushes energy into the robot.
    pub p_ext_in: f64,
    /// `b ẋᵀẋ` (W) over all damping terms.
    pub p_damper: f64,
    /// Damping coefficient behind `p_damper` (N·s/m).
    pub b: f64,
}

impl PowerFlows {
    /// Rate of change of the tank: `p_task − F_eᵀẋ + b ẋᵀẋ`.
    pub fn tank_rate(&self) -> f64 {
        self.p_task - self.p_ext_in + self.p_damper
    }
}

/// Running sums that reconcile the tank energy with everything that flowed
/// through it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TankLedger {
    /// `τ Σ (p_task − F_eᵀẋ + b ẋᵀẋ)` at the sampled twists.
    pub planned: f64,
    /// Sum of the sampling corrections (trapezoidal minus sampled work).
    pub sampling: f64,
    /// Surplus above `T_max` thrown away.
    pub discarded: f64,
}

impl TankLedger {
    /// Tank energy this ledger predicts from `t_initial`.
    pub fn balance(&self, t_initial: f64) -> f64 {
        t_initial + self.planned + self.sampling - self.discarded
    }
}

/// Integrate one cycle of flows into the tank.
///
/// The tank is capped at `T_max`; any surplus is recorded as discarded. A
/// step that ends below the floor and also drained the tank is a fault: it
/// can only happen if the scaling or damping upstream was wrong.
pub fn commit_step(
    state: &TankState,
    flows: &PowerFlows,
    tau: f64,
    tol_t: f64,
    ledger: &mut TankLedger,
) -> Result<TankState> {
    let before = state.energy();
    let delta = tau * flows.tank_rate();
    let mut after = before + delta;
    ledger.planned += delta;
    if after > state.t_max() {
        ledger.discarded += after - state.t_max();
        after = state.t_max();
    }
    if !after.is_finite() || (after < state.epsilon - tol_t && after < before - tol_t) {
        return Err(Error::TankFault {
            tank: after,
            epsilon: state.epsilon,
        });
    }
    if after == before {
        return Ok(*state);
    }
    Ok(state.with_energy(after))
}

/// Book the difference between the work a held wrench actually did over the
/// last cycle and what was charged at the start of it.
pub fn apply_sampling_correction(state: &TankState, correction: f64, ledger: &mut TankLedger) -> TankState {
    let mut after = state.energy() + correction;
    ledger.sampling += correction;
    if after > state.t_max() {
        ledger.discarded += after - state.t_max();
        after = state.t_max();
    }
    if after == state.energy() {
        return *state;
    }
    state.with_energy(after)
}

/// Move the floor so the robot's kinetic energy is bounded by `h_bound`:
/// `ε' = T(0) − h_bound + H(0)`.
pub fn set_lower_bound(state: &TankState, h_bound: f64, epsilon_min: f64) -> Result<TankState> {
    let epsilon = state.t_initial - h_bound + state.h_initial;
    if !(epsilon >= epsilon_min) {
        return Err(Error::Config(format!(
            "bound {h_bound} J needs a floor of {epsilon} J, below the minimum {epsilon_min} J; \
             raise the initial tank energy to at least {} J",
            h_bound - state.h_initial + epsilon_min
        )));
    }
    Ok(TankState { epsilon, ..*state })
}
