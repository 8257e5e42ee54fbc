//! Per-cycle force synthesis.
//!
//! Each cycle the desired PD force is passed through the tank: it is scaled
//! by the largest `α ∈ [0, 1]` that keeps the tank at or above its floor
//! after the step, so the commanded force never changes direction. The
//! unconstrained-direction alternative (Euclidean projection onto the energy
//! half-space) is provided alongside for comparison.
//!
//! The controller only ever receives pose, twist and external wrench. It
//! has no access to the plant's inertia.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::energy_tank::{
    apply_sampling_correction, commit_step, damper_coefficient, modulation, set_lower_bound, PowerFlows, TankConfig,
    TankLedger, TankState,
};
use crate::error::{Error, Result};
use crate::iso15066::{max_energy, BodyRegion};

/// Per-axis PD gains towards a fixed target pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PdGains {
    pub kp: DVector<f64>,
    pub kd: DVector<f64>,
    pub target: DVector<f64>,
}

impl PdGains {
    pub fn new(kp: DVector<f64>, kd: DVector<f64>, target: DVector<f64>) -> Result<Self> {
        if kp.len() != kd.len() || kp.len() != target.len() {
            return Err(Error::Config(format!(
                "PD gains must share one dimension (kp {}, kd {}, target {})",
                kp.len(),
                kd.len(),
                target.len()
            )));
        }
        if kp.iter().chain(kd.iter()).any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Config("PD gains must be finite and non-negative".into()));
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("PD target must be finite".into()));
        }
        Ok(Self { kp, kd, target })
    }

    pub fn dim(&self) -> usize {
        self.kp.len()
    }
}

/// `kp ∘ (target − x) − kd ∘ ẋ`.
pub fn pd_force(gains: &PdGains, x: &DVector<f64>, xdot: &DVector<f64>) -> DVector<f64> {
    gains.kp.component_mul(&(&gains.target - x)) - gains.kd.component_mul(xdot)
}

/// Discrete energy constraint `τ F_cᵀẋ + τ p_ext + T_prev ≥ ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstraint {
    pub t_prev: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub p_ext: f64,
}

impl EnergyConstraint {
    /// Tank energy after the step if the control force did no work.
    pub fn baseline(&self) -> f64 {
        self.t_prev + self.tau * self.p_ext
    }
}

/// Not even a zero control force keeps the tank above its floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Infeasible {
    pub available: f64,
    pub epsilon: f64,
}

/// Scaling `α ∈ [0, 1]` closest to 1 such that `α·f_des` satisfies the
/// energy constraint.
pub fn solve_alpha(
    f_des: &DVector<f64>,
    xdot: &DVector<f64>,
    constraint: &EnergyConstraint,
    tol_t: f64,
) -> std::result::Result<f64, Infeasible> {
    let k = constraint.baseline();
    if k < constraint.epsilon - tol_t {
        return Err(Infeasible {
            available: k,
            epsilon: constraint.epsilon,
        });
    }
    let c = constraint.tau * f_des.dot(xdot);
    if c >= 0.0 || k + c >= constraint.epsilon {
        return Ok(1.0);
    }
    // abs() folds −0 into +0
    Ok(((constraint.epsilon - k) / c).clamp(0.0, 1.0).abs())
}

/// Scaling used while the tank is below a freshly raised floor: keep the
/// force only if it returns energy to the tank.
pub fn replenish_alpha(f_des: &DVector<f64>, xdot: &DVector<f64>) -> f64 {
    if f_des.dot(xdot) >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Euclidean-nearest force to `f_des` on the feasible side of the energy
/// half-space. Does not preserve direction. The half-space is reachable for
/// any tank level as long as the robot moves; at standstill an infeasible
/// request gives zero force.
pub fn project_halfspace(
    f_des: &DVector<f64>,
    xdot: &DVector<f64>,
    constraint: &EnergyConstraint,
    v_floor: f64,
) -> DVector<f64> {
    let tau = constraint.tau;
    let lhs = constraint.baseline() + tau * f_des.dot(xdot);
    if lhs >= constraint.epsilon {
        return f_des.clone();
    }
    let speed_sq = xdot.norm_squared();
    if speed_sq <= v_floor * v_floor {
        return DVector::zeros(f_des.len());
    }
    let lambda = (constraint.epsilon - lhs) / (tau * speed_sq);
    f_des + xdot * lambda
}

/// One entry of a body-region timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    /// Time from which this region is the closest one (s).
    pub at: f64,
    pub region: BodyRegion,
}

/// Ordered timeline of the closest body region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSchedule {
    entries: Vec<ScheduleEntry>,
}

impl RegionSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Config("region schedule is empty".into()))?;
        if first.at != 0.0 {
            return Err(Error::Config(format!(
                "region schedule must start at t = 0, first entry is at {}",
                first.at
            )));
        }
        for pair in entries.windows(2) {
            if !(pair[1].at > pair[0].at) || !pair[1].at.is_finite() {
                return Err(Error::Config(format!(
                    "region switch times must be strictly increasing ({} then {})",
                    pair[0].at, pair[1].at
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn single(region: BodyRegion) -> Self {
        Self {
            entries: vec![ScheduleEntry { at: 0.0, region }],
        }
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// Kinetic-energy bounds `H_i`, in schedule order.
    pub fn energy_levels(&self) -> Vec<f64> {
        self.entries.iter().map(|e| max_energy(&e.region)).collect()
    }

    /// Index of the entry active at `time`.
    pub fn index_at(&self, time: f64) -> usize {
        // switch instants are hit on the sample grid despite k·τ rounding
        let slack = 1e-9 * time.abs().max(1.0);
        self.entries.iter().rposition(|e| e.at <= time + slack).unwrap_or(0)
    }
}

/// Apply the floor of whichever region is active at `time`. Returns the
/// (possibly updated) tank and the active index; the floor only moves when
/// the index differs from `active`.
pub fn supervise(
    schedule: &RegionSchedule,
    time: f64,
    active: Option<usize>,
    tank: &TankState,
    epsilon_min: f64,
) -> Result<(TankState, usize)> {
    let index = schedule.index_at(time);
    if active == Some(index) {
        return Ok((*tank, index));
    }
    let region = &schedule.entries[index].region;
    let updated = set_lower_bound(tank, max_energy(region), epsilon_min)
        .map_err(|e| Error::Config(format!("region {:?}: {e}", region.name)))?;
    Ok((updated, index))
}

/// What the controller is allowed to see of the robot.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: DVector<f64>,
    pub xdot: DVector<f64>,
    pub f_e: DVector<f64>,
}

/// One control cycle, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTick {
    pub k: u64,
    pub t: f64,
    pub active_region: String,
    pub alpha: f64,
    pub f_des: Vec<f64>,
    pub f_c: Vec<f64>,
    pub f_e: Vec<f64>,
    /// Emergency damper coefficient (external injection at the floor).
    pub b: f64,
    /// Damping that absorbs sampling shortfalls below the floor.
    pub b_guard: f64,
    /// `−F_eᵀẋ + (b + b_guard) ẋᵀẋ` (W).
    pub p_ext: f64,
    /// Tank energy after the commit (J).
    pub tank_energy: f64,
    pub epsilon: f64,
    /// `H(0) + T(0) − T` (J).
    pub h_est: f64,
    /// Plant kinetic energy at the end of the cycle (J). Filled in by the harness.
    pub h_truth: f64,
    /// Observed pose and twist the cycle acted on.
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
}

/// Closed-loop safety layer: PD task controller, tank, damper and region
/// supervisor. Owns all controller state; one instance per loop.
#[derive(Debug, Clone)]
pub struct SafetyController {
    gains: PdGains,
    schedule: RegionSchedule,
    config: TankConfig,
    tau: f64,
    tank: TankState,
    ledger: TankLedger,
    active: Option<usize>,
    recovering: bool,
    /// `(F_c + b ẋ − F_e, ẋ)` of the previous cycle, for the sampling correction.
    pending: Option<(DVector<f64>, DVector<f64>)>,
}

impl SafetyController {
    /// Controller for a robot starting with kinetic energy `h_initial` and a
    /// tank filled with `t_initial`. The first region's floor is applied
    /// immediately.
    pub fn new(
        gains: PdGains,
        schedule: RegionSchedule,
        t_initial: f64,
        h_initial: f64,
        tau: f64,
        config: TankConfig,
    ) -> Result<Self> {
        let config = config.validated()?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("cycle time must be positive, got {tau}")));
        }
        let levels = schedule.energy_levels();
        let placeholder = TankState::new(t_initial, h_initial, config.epsilon_min)?;
        let (tank, active) = supervise(&schedule, 0.0, None, &placeholder, config.epsilon_min)?;
        if tank.energy() < tank.epsilon {
            return Err(Error::Config(format!(
                "initial tank energy {t_initial} J is below the first floor {} J",
                tank.epsilon
            )));
        }
        // every later switch must also be feasible
        for (entry, level) in schedule.entries().iter().zip(levels) {
            set_lower_bound(&tank, level, config.epsilon_min)
                .map_err(|e| Error::Config(format!("region {:?}: {e}", entry.region.name)))?;
        }
        Ok(Self {
            gains,
            schedule,
            config,
            tau,
            tank,
            ledger: TankLedger::default(),
            active: Some(active),
            recovering: false,
            pending: None,
        })
    }

    pub fn tank(&self) -> &TankState {
        &self.tank
    }

    pub fn ledger(&self) -> &TankLedger {
        &self.ledger
    }

    pub fn is_recovering(&self) -> bool {
        self.recovering
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Run cycle `k`. Returns the total actuation to hold over the next
    /// step (control force plus damping) and the tick record.
    pub fn cycle(&mut self, k: u64, obs: &Observation) -> Result<(DVector<f64>, ControlTick)> {
        let dim = self.gains.dim();
        if obs.x.len() != dim || obs.xdot.len() != dim || obs.f_e.len() != dim {
            return Err(Error::Domain(format!("observation dimension mismatch, controller has {dim}")));
        }
        if obs.x.iter().chain(obs.xdot.iter()).chain(obs.f_e.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite observation at step {k}")));
        }
        let tau = self.tau;
        let tol_t = self.config.tol_t;
        let t = k as f64 * tau;
        let xdot = &obs.xdot;

        if let Some((g, xdot_prev)) = self.pending.take() {
            let correction = 0.5 * tau * g.dot(&(xdot - xdot_prev));
            self.tank = apply_sampling_correction(&self.tank, correction, &mut self.ledger);
        }

        let (tank, active) = supervise(&self.schedule, t, self.active, &self.tank, self.config.epsilon_min)?;
        if self.active != Some(active) {
            let region = &self.schedule.entries()[active].region.name;
            log::info!("t = {t:.4} s: closest region -> {region}, floor {} -> {} J", self.tank.epsilon, tank.epsilon);
            if tank.energy() < tank.epsilon - tol_t {
                log::warn!(
                    "t = {t:.4} s: tank {} J below new floor {} J, replenishing",
                    tank.energy(),
                    tank.epsilon
                );
                self.recovering = true;
            }
        }
        self.tank = tank;
        self.active = Some(active);
        if self.recovering && self.tank.energy() >= self.tank.epsilon - tol_t {
            log::info!("t = {t:.4} s: tank back above its floor");
            self.recovering = false;
        }

        // the robot receives −F_c, so the port force is the negated PD wrench
        let f_des = -pd_force(&self.gains, &obs.x, xdot);
        let speed_sq = xdot.norm_squared();
        let b = damper_coefficient(&obs.f_e, xdot, &self.tank, self.config.tol_b, self.config.v_floor);
        let mut p_ext = -obs.f_e.dot(xdot) + b * speed_sq;
        let t_prev = self.tank.energy();

        let mut b_guard = 0.0;
        let shortfall = self.tank.epsilon - (t_prev + tau * p_ext);
        if !self.recovering && shortfall > 0.0 && speed_sq > self.config.v_floor * self.config.v_floor {
            b_guard = shortfall / (tau * speed_sq);
            p_ext += b_guard * speed_sq;
        }

        let constraint = EnergyConstraint {
            t_prev,
            epsilon: self.tank.epsilon,
            tau,
            p_ext,
        };
        let alpha = if self.recovering {
            replenish_alpha(&f_des, xdot)
        } else {
            solve_alpha(&f_des, xdot, &constraint, tol_t).map_err(|e| Error::EmergencyFault {
                step: k,
                tank: e.available,
                epsilon: e.epsilon,
            })?
        };
        let f_opt = &f_des * alpha;

        let damping = b + b_guard;
        let flows = PowerFlows {
            p_task: f_opt.dot(xdot),
            p_ext_in: obs.f_e.dot(xdot),
            p_damper: damping * speed_sq,
            b: damping,
        };
        self.tank = commit_step(&self.tank, &flows, tau, tol_t, &mut self.ledger)?;

        let f_c = if self.recovering {
            f_opt
        } else {
            modulation(&f_opt, &self.tank, tol_t)? * self.tank.x_t
        };
        let actuation = &f_c + xdot * damping;
        self.pending = Some((&actuation - &obs.f_e, xdot.clone()));

        let tick = ControlTick {
            k,
            t,
            active_region: self.schedule.entries()[active].region.name.clone(),
            alpha,
            f_des: f_des.as_slice().to_vec(),
            f_c: f_c.as_slice().to_vec(),
            f_e: obs.f_e.as_slice().to_vec(),
            b,
            b_guard,
            p_ext,
            tank_energy: self.tank.energy(),
            epsilon: self.tank.epsilon,
            h_est: self.tank.kinetic_estimate(),
            h_truth: f64::NAN,
            x: obs.x.as_slice().to_vec(),
            xdot: xdot.as_slice().to_vec(),
        };
        Ok((actuation, tick))
    }
}
