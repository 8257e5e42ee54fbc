//! JSON scenario documents.
//!
//! Units are SI except where a field carries an explicit unit tag
//! (`stiffness_unit`). Unknown keys are rejected everywhere.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::Deserialize;

use crate::energy_tank::TankConfig;
use crate::error::{Error, Result};
use crate::iso15066::{builtin_regions, robot_effective_mass, BodyRegion, RobotMassSpec, StiffnessUnit};
use crate::robot_dynamics::{PlanarArm, Plant};
use crate::safety_controller::{PdGains, RegionSchedule, ScheduleEntry};
use crate::sim_harness::{PlantSpec, Scenario, TankInit, WrenchSegment};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub name: String,
    pub tau: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantDoc,
    pub controller: ControllerDoc,
    #[serde(default)]
    pub regions: Vec<RegionDoc>,
    pub schedule: Vec<ScheduleDoc>,
    #[serde(default)]
    pub external_wrench: Vec<WrenchDoc>,
    pub tank: TankDoc,
    #[serde(default)]
    pub reference_robot: Option<RobotMassSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantDoc {
    Cartesian {
        /// Full inertia matrix, row by row (kg).
        #[serde(default)]
        inertia: Option<Vec<Vec<f64>>>,
        /// Diagonal inertia (kg); alternative to `inertia`.
        #[serde(default)]
        diagonal: Option<Vec<f64>>,
        x0: Vec<f64>,
        #[serde(default)]
        xdot0: Option<Vec<f64>>,
    },
    PlanarArm {
        link_lengths: [f64; 2],
        link_masses: [f64; 2],
        /// Link inertias about their CoM (kg·m²); uniform rods if absent.
        #[serde(default)]
        link_inertias: Option<[f64; 2]>,
        /// CoM distance along each link (m); mid-length if absent.
        #[serde(default)]
        com: Option<[f64; 2]>,
        #[serde(default)]
        gravity: Option<f64>,
        q0: [f64; 2],
        #[serde(default)]
        qdot0: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerDoc {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDoc {
    pub name: String,
    #[serde(default)]
    pub f_max: Option<f64>,
    #[serde(default)]
    pub stiffness: Option<f64>,
    #[serde(default)]
    pub stiffness_unit: Option<String>,
    #[serde(default)]
    pub body_mass: Option<f64>,
    #[serde(default)]
    pub transient_multiplier: Option<f64>,
    /// Tabulated energy limit (J); takes precedence over the formula.
    #[serde(default)]
    pub e_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    pub at: f64,
    pub region: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrenchDoc {
    pub start: f64,
    pub end: f64,
    pub force: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankDoc {
    #[serde(default)]
    pub initial_energy: Option<f64>,
    /// First floor ε₁; the tank starts at `ε₁ + H₁ − H(0)`.
    #[serde(default)]
    pub initial_epsilon: Option<f64>,
    #[serde(default)]
    pub tol_t: Option<f64>,
    #[serde(default)]
    pub tol_b: Option<f64>,
    #[serde(default)]
    pub v_floor: Option<f64>,
    #[serde(default)]
    pub epsilon_min: Option<f64>,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl RegionDoc {
    fn into_region(self) -> Result<BodyRegion> {
        let name = self.name;
        let region = match (self.f_max, self.stiffness, self.body_mass) {
            (Some(f_max), Some(k), Some(m_h)) => {
                let unit: StiffnessUnit = self
                    .stiffness_unit
                    .as_deref()
                    .ok_or_else(|| Error::Config(format!("region {name:?}: stiffness_unit is required")))?
                    .parse()?;
                let k = unit.to_newton_per_metre(k);
                match self.transient_multiplier {
                    Some(mult) => BodyRegion::with_multiplier(name.clone(), f_max, k, m_h, mult)?,
                    None => BodyRegion::new(name.clone(), f_max, k, m_h)?,
                }
            }
            (None, None, None) => {
                if self.stiffness_unit.is_some() || self.transient_multiplier.is_some() {
                    return Err(Error::Config(format!(
                        "region {name:?}: unit or multiplier given without biomechanical parameters"
                    )));
                }
                let e = self.e_max.ok_or_else(|| {
                    Error::Config(format!(
                        "region {name:?} needs either f_max, stiffness and body_mass or a tabulated e_max"
                    ))
                })?;
                return BodyRegion::tabulated(name, e);
            }
            _ => {
                return Err(Error::Config(format!(
                    "region {name:?}: f_max, stiffness and body_mass must be given together"
                )))
            }
        };
        match self.e_max {
            Some(e) => region.with_energy_override(e),
            None => Ok(region),
        }
    }
}

fn vector(name: &str, v: &[f64]) -> Result<DVector<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{name} must be finite")));
    }
    Ok(DVector::from_column_slice(v))
}

impl PlantDoc {
    fn into_spec(self) -> Result<PlantSpec> {
        match self {
            PlantDoc::Cartesian {
                inertia,
                diagonal,
                x0,
                xdot0,
            } => {
                let inertia = match (inertia, diagonal) {
                    (Some(rows), None) => {
                        let n = rows.len();
                        if rows.iter().any(|r| r.len() != n) {
                            return Err(Error::Config("inertia must be a square matrix".into()));
                        }
                        DMatrix::from_row_iterator(n, n, rows.into_iter().flatten())
                    }
                    (None, Some(d)) => DMatrix::from_diagonal(&vector("diagonal", &d)?),
                    _ => return Err(Error::Config("cartesian plant needs exactly one of inertia or diagonal".into())),
                };
                let x0 = vector("x0", &x0)?;
                let xdot0 = match xdot0 {
                    Some(v) => vector("xdot0", &v)?,
                    None => DVector::zeros(x0.len()),
                };
                Ok(PlantSpec::Cartesian { inertia, x0, xdot0 })
            }
            PlantDoc::PlanarArm {
                link_lengths: [l1, l2],
                link_masses: [m1, m2],
                link_inertias,
                com,
                gravity,
                q0,
                qdot0,
            } => {
                let mut arm = PlanarArm::uniform_rods(l1, l2, m1, m2)?;
                if let Some([i1, i2]) = link_inertias {
                    arm.i1 = i1;
                    arm.i2 = i2;
                }
                if let Some([c1, c2]) = com {
                    arm.com1 = c1;
                    arm.com2 = c2;
                }
                if let Some(g) = gravity {
                    arm.gravity = g;
                }
                Ok(PlantSpec::PlanarArm {
                    arm: arm.validated()?,
                    q0: Vector2::from(q0),
                    qdot0: Vector2::from(qdot0.unwrap_or([0.0, 0.0])),
                })
            }
        }
    }
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid scenario document: {e}")))
    }

    /// Resolve units, region names and defaults into a runnable scenario.
    pub fn into_scenario(self) -> Result<Scenario> {
        self.resolve().map_err(config_err)
    }

    fn resolve(self) -> Result<Scenario> {
        let mut regions = builtin_regions();
        for doc in self.regions {
            let region = doc.into_region()?;
            match regions.iter_mut().find(|r| r.name == region.name) {
                Some(slot) => *slot = region,
                None => regions.push(region),
            }
        }
        let entries = self
            .schedule
            .into_iter()
            .map(|s| {
                let region = regions
                    .iter()
                    .find(|r| r.name == s.region)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("schedule refers to unknown region {:?}", s.region)))?;
                Ok(ScheduleEntry { at: s.at, region })
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = RegionSchedule::new(entries)?;

        let c = self.controller;
        let gains = PdGains::new(
            vector("kp", &c.kp)?,
            vector("kd", &c.kd)?,
            vector("target", &c.target)?,
        )?;

        let wrenches = self
            .external_wrench
            .into_iter()
            .map(|w| {
                Ok(WrenchSegment {
                    start: w.start,
                    end: w.end,
                    force: vector("external wrench", &w.force)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let t = self.tank;
        let tank_init = match (t.initial_energy, t.initial_epsilon) {
            (Some(e), None) => TankInit::Energy(e),
            (None, Some(eps)) => TankInit::FirstFloor(eps),
            _ => {
                return Err(Error::Config(
                    "tank needs exactly one of initial_energy or initial_epsilon".into(),
                ))
            }
        };
        let d = TankConfig::default();
        let tank_config = TankConfig {
            tol_t: t.tol_t.unwrap_or(d.tol_t),
            tol_b: t.tol_b.unwrap_or(d.tol_b),
            v_floor: t.v_floor.unwrap_or(d.v_floor),
            epsilon_min: t.epsilon_min.unwrap_or(d.epsilon_min),
        }
        .validated()?;

        let reference_robot_mass = match self.reference_robot {
            Some(spec) => Some(robot_effective_mass(&RobotMassSpec::new(spec.moving_mass, spec.payload)?)),
            None => None,
        };

        let scenario = Scenario {
            name: self.name,
            plant: self.plant.into_spec()?,
            gains,
            schedule,
            wrenches,
            tank_init,
            tank_config,
            tau: self.tau,
            duration: self.duration,
            seed: self.seed,
            reference_robot_mass,
        };
        let plant = scenario.plant.build()?;
        if plant.dim() != scenario.gains.dim() {
            return Err(Error::Config(format!(
                "controller has dimension {}, plant has {}",
                scenario.gains.dim(),
                plant.dim()
            )));
        }
        scenario.validate(plant.kinetic_energy())?;
        Ok(scenario)
    }
}

/// Parse and fully validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    ConfigDocument::from_json(text)?.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}
