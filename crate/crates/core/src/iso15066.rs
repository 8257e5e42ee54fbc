//! Power-and-force-limiting quantities: transferable energy per body region,
//! the two-body reduced mass, the lumped robot mass, the conservative
//! velocity limit derived from them, and the configuration-dependent
//! apparent mass that the lumped estimate over-approximates.

use nalgebra::{DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robot_dynamics::ArmModel;

pub const DEFAULT_TRANSIENT_MULTIPLIER: f64 = 2.0;

/// Stiffness unit tag used at ingestion. The data model is always N/m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StiffnessUnit {
    #[serde(rename = "N/m")]
    NewtonPerMetre,
    #[serde(rename = "N/mm")]
    NewtonPerMillimetre,
}

impl StiffnessUnit {
    pub fn to_newton_per_metre(self, value: f64) -> f64 {
        match self {
            StiffnessUnit::NewtonPerMetre => value,
            StiffnessUnit::NewtonPerMillimetre => value * 1000.0,
        }
    }
}

impl std::str::FromStr for StiffnessUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N/m" => Ok(StiffnessUnit::NewtonPerMetre),
            "N/mm" => Ok(StiffnessUnit::NewtonPerMillimetre),
            other => Err(Error::Config(format!("unknown stiffness unit {other:?} (expected \"N/m\" or \"N/mm\")"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMode {
    QuasiStatic,
    Transient,
}

/// Biomechanical limits of one body region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biomechanics {
    /// Quasi-static contact force limit (N).
    pub f_max: f64,
    /// Effective spring constant (N/m).
    pub stiffness: f64,
    /// Effective body-part mass (kg).
    pub body_mass: f64,
    /// Factor on `f_max` permitted for transient contact.
    pub transient_multiplier: f64,
}

impl Biomechanics {
    pub fn force(&self, mode: ForceMode) -> f64 {
        match mode {
            ForceMode::QuasiStatic => self.f_max,
            ForceMode::Transient => self.transient_multiplier * self.f_max,
        }
    }
}

/// A human body region. Either the biomechanical parameters, a tabulated
/// energy limit, or both are present; a tabulated limit takes precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRegion {
    pub name: String,
    pub biomechanics: Option<Biomechanics>,
    pub e_max_override: Option<f64>,
}

impl BodyRegion {
    /// Region from force limit (N), stiffness (N/m) and body mass (kg), with
    /// the default transient multiplier.
    pub fn new(name: impl Into<String>, f_max: f64, stiffness: f64, body_mass: f64) -> Result<Self> {
        Self::with_multiplier(name, f_max, stiffness, body_mass, DEFAULT_TRANSIENT_MULTIPLIER)
    }

    pub fn with_multiplier(
        name: impl Into<String>,
        f_max: f64,
        stiffness: f64,
        body_mass: f64,
        transient_multiplier: f64,
    ) -> Result<Self> {
        let name = name.into();
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(f_max) || !positive(stiffness) || !positive(body_mass) {
            return Err(Error::Domain(format!(
                "region {name:?}: f_max, stiffness and body mass must be positive (got {f_max}, {stiffness}, {body_mass})"
            )));
        }
        if !(transient_multiplier.is_finite() && transient_multiplier >= 1.0) {
            return Err(Error::Domain(format!(
                "region {name:?}: transient multiplier must be >= 1, got {transient_multiplier}"
            )));
        }
        Ok(Self {
            name,
            biomechanics: Some(Biomechanics {
                f_max,
                stiffness,
                body_mass,
                transient_multiplier,
            }),
            e_max_override: None,
        })
    }

    /// Region known only through its tabulated energy limit (J).
    pub fn tabulated(name: impl Into<String>, e_max: f64) -> Result<Self> {
        Self {
            name: name.into(),
            biomechanics: None,
            e_max_override: None,
        }
        .with_energy_override(e_max)
    }

    pub fn with_energy_override(mut self, e_max: f64) -> Result<Self> {
        if !(e_max.is_finite() && e_max > 0.0) {
            return Err(Error::Domain(format!(
                "region {:?}: energy override must be positive, got {e_max}",
                self.name
            )));
        }
        self.e_max_override = Some(e_max);
        Ok(self)
    }

    pub fn biomechanics(&self) -> Result<&Biomechanics> {
        self.biomechanics.as_ref().ok_or_else(|| {
            Error::Domain(format!(
                "region {:?} has only a tabulated energy limit; force, stiffness and mass are unknown",
                self.name
            ))
        })
    }
}

/// The regions shipped with the library. Anything else comes from a
/// scenario's region table.
pub fn builtin_regions() -> Vec<BodyRegion> {
    vec![
        BodyRegion::new("chest", 140.0, StiffnessUnit::NewtonPerMillimetre.to_newton_per_metre(25.0), 40.0)
            .expect("built-in chest parameters are valid"),
        BodyRegion::tabulated("shoulders", 2.5).expect("built-in shoulders limit is valid"),
    ]
}

/// Maximum permissible energy transfer (J): the tabulated value when present,
/// otherwise `(multiplier·f_max)² / 2k`.
pub fn max_energy(region: &BodyRegion) -> f64 {
    if let Some(e) = region.e_max_override {
        return e;
    }
    let b = region
        .biomechanics
        .as_ref()
        .expect("a region carries either biomechanics or an energy override");
    let f = b.force(ForceMode::Transient);
    f * f / (2.0 * b.stiffness)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotMassSpec {
    /// Mass of the moving parts (kg).
    pub moving_mass: f64,
    /// Payload (kg).
    pub payload: f64,
}

impl RobotMassSpec {
    pub fn new(moving_mass: f64, payload: f64) -> Result<Self> {
        if !(moving_mass.is_finite() && moving_mass > 0.0) || !(payload.is_finite() && payload >= 0.0) {
            return Err(Error::Domain(format!(
                "robot mass must be positive and payload non-negative (got {moving_mass}, {payload})"
            )));
        }
        Ok(Self { moving_mass, payload })
    }
}

/// Lumped effective robot mass `M/2 + m_L`.
pub fn robot_effective_mass(spec: &RobotMassSpec) -> f64 {
    spec.moving_mass / 2.0 + spec.payload
}

/// Two-body reduced mass `(1/m_h + 1/m_r)⁻¹`.
pub fn reduced_mass(m_h: f64, m_r: f64) -> Result<f64> {
    if !(m_h > 0.0 && m_r > 0.0) || m_h.is_nan() || m_r.is_nan() {
        return Err(Error::Domain(format!("masses must be positive, got m_h = {m_h}, m_r = {m_r}")));
    }
    // m_h m_r / (m_h + m_r) loses the limit for huge m_h; this form does not.
    Ok(1.0 / (1.0 / m_h + 1.0 / m_r))
}

/// Conservative relative-velocity limit `f / √(μ k)`.
pub fn v_max(region: &BodyRegion, m_r: f64, mode: ForceMode) -> Result<f64> {
    let b = region.biomechanics()?;
    let mu = reduced_mass(b.body_mass, m_r)?;
    Ok(b.force(mode) / (mu * b.stiffness).sqrt())
}

/// Symmetric part of a mobility tensor after the PSD check, with slightly
/// negative eigenvalues clamped to zero.
fn psd_part(mobility: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if mobility.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("mobility tensor has non-finite entries".into()));
    }
    let scale = mobility.amax().max(f64::MIN_POSITIVE);
    if (mobility - mobility.transpose()).amax() > 1e-9 * scale {
        return Err(Error::Domain("mobility tensor is not symmetric".into()));
    }
    let sym = (mobility + mobility.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    if largest <= 0.0 || smallest < -1e-9 * largest {
        return Err(Error::Domain(format!(
            "mobility tensor is not positive semi-definite (eigenvalues {smallest:e} .. {largest:e})"
        )));
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose())
}

/// Apparent mass along `n`: `(nᵀ Λ⁻¹ n)⁻¹`.
pub fn apparent_mass(n: &Vector3<f64>, mobility: &Matrix3<f64>) -> Result<f64> {
    if (n.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("direction must be a unit vector, |n| = {}", n.norm())));
    }
    let sym = psd_part(mobility)?;
    let inv = n.dot(&(sym * n));
    if inv <= 0.0 {
        return Err(Error::Domain("direction lies in the null space of the mobility tensor".into()));
    }
    Ok(1.0 / inv)
}

/// End-point mobility tensor `J_v M⁻¹ J_vᵀ` for pure translation.
pub fn endpoint_mobility<A: ArmModel + ?Sized>(model: &A, q: &DVector<f64>) -> Result<Matrix3<f64>> {
    if q.len() != model.dof() {
        return Err(Error::Domain(format!("configuration has {} entries, model has {} dof", q.len(), model.dof())));
    }
    let m = model.joint_inertia(q);
    let jv = model.linear_jacobian(q);
    let m_inv = m
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Domain("joint inertia is singular or indefinite".into()))?;
    let mobility = &jv * m_inv * jv.transpose();
    Ok(Matrix3::from_fn(|i, j| mobility[(i, j)]))
}
