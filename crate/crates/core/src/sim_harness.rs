//! Fixed-step closed loop: plant, controller and scripted environment.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::energy_tank::{TankConfig, TankLedger};
use crate::error::{Error, Result};
use crate::iso15066::{max_energy, v_max, ForceMode};
use crate::robot_dynamics::{ArmPlant, CartesianPlant, PlanarArm, Plant, PlantModel, WrenchInput};
use crate::safety_controller::{ControlTick, Observation, PdGains, RegionSchedule, SafetyController};

/// Tolerance on the kinetic-energy bound used when judging a segment (J).
pub const BOUND_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    Cartesian {
        inertia: DMatrix<f64>,
        x0: DVector<f64>,
        xdot0: DVector<f64>,
    },
    PlanarArm {
        arm: PlanarArm,
        q0: Vector2<f64>,
        qdot0: Vector2<f64>,
    },
}

impl PlantSpec {
    pub fn build(&self) -> Result<PlantModel> {
        let plant = match self {
            PlantSpec::Cartesian { inertia, x0, xdot0 } => {
                PlantModel::Cartesian(CartesianPlant::new(inertia.clone(), x0.clone(), xdot0.clone())?)
            }
            PlantSpec::PlanarArm { arm, q0, qdot0 } => PlantModel::Arm(ArmPlant::new(arm.clone(), *q0, *qdot0)?),
        };
        Ok(plant)
    }
}

/// Constant external wrench over `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchSegment {
    pub start: f64,
    pub end: f64,
    pub force: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TankInit {
    /// `T(0)` given directly (J).
    Energy(f64),
    /// `T(0) = ε₁ + H₁ − H(0)` for the given first floor ε₁ (J).
    FirstFloor(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantSpec,
    pub gains: PdGains,
    pub schedule: RegionSchedule,
    pub wrenches: Vec<WrenchSegment>,
    pub tank_init: TankInit,
    pub tank_config: TankConfig,
    pub tau: f64,
    pub duration: f64,
    pub seed: u64,
    /// Lumped robot mass `m_r` used to report the speed limits (kg).
    pub reference_robot_mass: Option<f64>,
}

impl Scenario {
    pub fn steps(&self) -> u64 {
        (self.duration / self.tau).round() as u64
    }

    /// Sum of the scripted wrenches active at `t`.
    pub fn external_wrench(&self, t: f64) -> DVector<f64> {
        let slack = 1e-9 * self.tau;
        let mut f = DVector::zeros(self.gains.dim());
        for w in &self.wrenches {
            if t >= w.start - slack && t < w.end - slack {
                f += &w.force;
            }
        }
        f
    }

    pub fn initial_tank_energy(&self, h_initial: f64) -> f64 {
        match self.tank_init {
            TankInit::Energy(t0) => t0,
            TankInit::FirstFloor(eps) => eps + max_energy(&self.schedule.entries()[0].region) - h_initial,
        }
    }

    /// Structural and budget checks. `h_initial` is the plant's kinetic
    /// energy at start.
    pub fn validate(&self, h_initial: f64) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if self.steps() == 0 {
            return Err(Error::Config("duration is shorter than one cycle".into()));
        }
        self.tank_config.validated()?;
        let dim = self.gains.dim();
        for w in &self.wrenches {
            if w.force.len() != dim {
                return Err(Error::Config(format!(
                    "external wrench has dimension {}, plant has {dim}",
                    w.force.len()
                )));
            }
            if !(w.start.is_finite() && w.end.is_finite() && w.end > w.start) || w.force.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("bad external wrench segment [{}, {})", w.start, w.end)));
            }
        }
        if let Some(m) = self.reference_robot_mass {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Config(format!("reference robot mass must be positive, got {m}")));
            }
        }
        let t0 = self.initial_tank_energy(h_initial);
        if !t0.is_finite() {
            return Err(Error::Config("initial tank energy is not finite".into()));
        }
        for entry in self.schedule.entries() {
            let h_i = max_energy(&entry.region);
            let needed = h_i - h_initial + self.tank_config.epsilon_min;
            if !(t0 > needed) {
                return Err(Error::Config(format!(
                    "region {:?} (E_max {h_i} J) needs an initial tank energy above {needed} J, got {t0} J",
                    entry.region.name
                )));
            }
        }
        Ok(())
    }

    /// Speed limits of every scheduled region that has biomechanical data.
    pub fn speed_limits(&self) -> BTreeMap<String, SpeedLimits> {
        let mut out = BTreeMap::new();
        let Some(m_r) = self.reference_robot_mass else {
            return out;
        };
        for entry in self.schedule.entries() {
            let r = &entry.region;
            if let (Ok(qs), Ok(tr)) = (v_max(r, m_r, ForceMode::QuasiStatic), v_max(r, m_r, ForceMode::Transient)) {
                out.insert(
                    r.name.clone(),
                    SpeedLimits {
                        quasi_static: qs,
                        transient: tr,
                    },
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimits {
    pub quasi_static: f64,
    pub transient: f64,
}

/// What `summarize` needs besides the log.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryContext {
    pub scenario: String,
    pub tau: f64,
    /// `T(0) + H(0)` (J).
    pub energy_budget: f64,
    pub speed_limits: BTreeMap<String, SpeedLimits>,
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub region: String,
    pub start_time: f64,
    pub end_time: f64,
    pub epsilon: f64,
    /// `T(0) + H(0) − ε` (J).
    pub energy_bound: f64,
    pub max_h_truth: f64,
    pub max_speed: f64,
    pub speed_limits: Option<SpeedLimits>,
    /// Peak speed above the quasi-static limit.
    pub exceeds_speed_limit: Option<bool>,
    /// `max_h_truth ≤ energy_bound + BOUND_TOLERANCE`.
    pub bound_respected: bool,
    /// Time spent above `energy_bound + BOUND_TOLERANCE` (s).
    pub overshoot_duration: f64,
    /// Time spent with the tank below its floor (s).
    pub tank_deficit_duration: f64,
    /// Tank at or above its floor on the segment's last tick.
    pub tank_restored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub tau: f64,
    pub ticks: u64,
    pub end_time: f64,
    pub energy_budget: f64,
    pub fault: Option<String>,
    pub segments: Vec<SegmentSummary>,
    pub max_h_truth: f64,
    pub min_tank_energy: f64,
    /// `min(tank_T − ε)` (J).
    pub min_tank_margin: f64,
    /// `max |h_truth + tank_T − (T(0) + H(0))|` (J).
    pub max_conservation_residual: f64,
    /// `max |h_est − h_truth|` (J).
    pub max_estimator_error: f64,
    pub min_alpha: f64,
    /// `τ Σ b ẋᵀẋ` of the emergency damper (J).
    pub damper_dissipated: f64,
    /// `τ Σ F_eᵀẋ` over the cycles where the emergency damper engaged (J).
    pub injection_excess: f64,
    /// `τ Σ b_guard ẋᵀẋ` (J).
    pub guard_dissipated: f64,
}

impl Summary {
    /// Context that reproduces this summary from its tick log.
    pub fn context(&self) -> SummaryContext {
        SummaryContext {
            scenario: self.scenario.clone(),
            tau: self.tau,
            energy_budget: self.energy_budget,
            speed_limits: self
                .segments
                .iter()
                .filter_map(|s| s.speed_limits.map(|l| (s.region.clone(), l)))
                .collect(),
            fault: self.fault.clone(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn summarize_segment(ticks: &[ControlTick], ctx: &SummaryContext) -> SegmentSummary {
    let first = &ticks[0];
    let last = &ticks[ticks.len() - 1];
    let bound = ctx.energy_budget - first.epsilon;
    let max_h = ticks.iter().map(|t| t.h_truth).fold(f64::NEG_INFINITY, f64::max);
    let max_speed = ticks
        .iter()
        .map(|t| dot(&t.xdot, &t.xdot).sqrt())
        .fold(0.0, f64::max);
    let over = ticks.iter().filter(|t| t.h_truth > bound + BOUND_TOLERANCE).count();
    let deficit = ticks.iter().filter(|t| t.tank_energy < t.epsilon - 1e-9).count();
    let limits = ctx.speed_limits.get(&first.active_region).copied();
    SegmentSummary {
        region: first.active_region.clone(),
        start_time: first.t,
        end_time: last.t + ctx.tau,
        epsilon: first.epsilon,
        energy_bound: bound,
        max_h_truth: max_h,
        max_speed,
        speed_limits: limits,
        exceeds_speed_limit: limits.map(|l| max_speed > l.quasi_static),
        bound_respected: max_h <= bound + BOUND_TOLERANCE,
        overshoot_duration: over as f64 * ctx.tau,
        tank_deficit_duration: deficit as f64 * ctx.tau,
        tank_restored: last.tank_energy >= last.epsilon - 1e-9,
    }
}

/// Aggregate a tick log. Segments are maximal runs of ticks sharing the
/// active region and floor.
pub fn summarize(ticks: &[ControlTick], ctx: &SummaryContext) -> Result<Summary> {
    if ticks.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..=ticks.len() {
        let boundary = i == ticks.len()
            || ticks[i].active_region != ticks[start].active_region
            || ticks[i].epsilon.to_bits() != ticks[start].epsilon.to_bits();
        if boundary {
            segments.push(summarize_segment(&ticks[start..i], ctx));
            start = i;
        }
    }

    let mut s = Summary {
        scenario: ctx.scenario.clone(),
        tau: ctx.tau,
        ticks: ticks.len() as u64,
        end_time: ticks[ticks.len() - 1].t + ctx.tau,
        energy_budget: ctx.energy_budget,
        fault: ctx.fault.clone(),
        segments,
        max_h_truth: f64::NEG_INFINITY,
        min_tank_energy: f64::INFINITY,
        min_tank_margin: f64::INFINITY,
        max_conservation_residual: 0.0,
        max_estimator_error: 0.0,
        min_alpha: f64::INFINITY,
        damper_dissipated: 0.0,
        injection_excess: 0.0,
        guard_dissipated: 0.0,
    };
    for t in ticks {
        let speed_sq = dot(&t.xdot, &t.xdot);
        s.max_h_truth = s.max_h_truth.max(t.h_truth);
        s.min_tank_energy = s.min_tank_energy.min(t.tank_energy);
        s.min_tank_margin = s.min_tank_margin.min(t.tank_energy - t.epsilon);
        s.max_conservation_residual = s
            .max_conservation_residual
            .max((t.h_truth + t.tank_energy - ctx.energy_budget).abs());
        s.max_estimator_error = s.max_estimator_error.max((t.h_est - t.h_truth).abs());
        s.min_alpha = s.min_alpha.min(t.alpha);
        if t.b > 0.0 {
            s.damper_dissipated += ctx.tau * t.b * speed_sq;
            s.injection_excess += ctx.tau * dot(&t.f_e, &t.xdot);
        }
        s.guard_dissipated += ctx.tau * t.b_guard * speed_sq;
    }
    Ok(s)
}

#[derive(Debug)]
pub struct RunResult {
    pub ticks: Vec<ControlTick>,
    pub summary: Summary,
    /// Controller or integration fault that ended the run early.
    pub fault: Option<Error>,
    pub ledger: TankLedger,
    pub t_initial: f64,
    pub h_initial: f64,
}

/// Execute a scenario. Configuration problems are errors; a controller
/// fault ends the run and is reported in the result alongside the partial
/// log.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    let mut plant = scenario.plant.build()?;
    if plant.dim() != scenario.gains.dim() {
        return Err(Error::Config(format!(
            "PD gains have dimension {}, plant has {}",
            scenario.gains.dim(),
            plant.dim()
        )));
    }
    let h_initial = plant.kinetic_energy();
    scenario.validate(h_initial)?;
    let t_initial = scenario.initial_tank_energy(h_initial);
    let mut controller = SafetyController::new(
        scenario.gains.clone(),
        scenario.schedule.clone(),
        t_initial,
        h_initial,
        scenario.tau,
        scenario.tank_config,
    )?;

    let steps = scenario.steps();
    let mut ticks = Vec::with_capacity(steps as usize);
    let mut fault = None;
    for k in 0..steps {
        let t = k as f64 * scenario.tau;
        let f_e = scenario.external_wrench(t);
        let obs = Observation {
            x: plant.pose(),
            xdot: plant.twist(),
            f_e,
        };
        let (actuation, mut tick) = match controller.cycle(k, &obs) {
            Ok(out) => out,
            Err(e) if e.is_controller_fault() => {
                log::error!("{}: step {k}: {e}", scenario.name);
                fault = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        let input = WrenchInput {
            f_c: actuation,
            f_e: obs.f_e,
        };
        if let Err(e) = plant.step(&input, scenario.tau) {
            if !e.is_controller_fault() {
                return Err(e);
            }
            log::error!("{}: step {k}: {e}", scenario.name);
            fault = Some(e);
            break;
        }
        tick.h_truth = plant.kinetic_energy();
        ticks.push(tick);
    }

    let ctx = SummaryContext {
        scenario: scenario.name.clone(),
        tau: scenario.tau,
        energy_budget: t_initial + h_initial,
        speed_limits: scenario.speed_limits(),
        fault: fault.as_ref().map(|e| e.to_string()),
    };
    let summary = match summarize(&ticks, &ctx) {
        Ok(s) => s,
        Err(Error::EmptyLog) if fault.is_some() => return Err(fault.expect("checked")),
        Err(e) => return Err(e),
    };
    Ok(RunResult {
        ticks,
        summary,
        fault,
        ledger: *controller.ledger(),
        t_initial,
        h_initial,
    })
}
