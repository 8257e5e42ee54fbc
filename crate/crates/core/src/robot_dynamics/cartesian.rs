use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{check_step_args, Plant, WrenchInput};
use crate::error::{Error, Result};

/// Translational end-effector with constant SPD inertia. With `Λ` constant
/// the Coriolis term vanishes and a held wrench gives constant acceleration.
#[derive(Debug, Clone)]
pub struct CartesianPlant {
    lambda: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    x: DVector<f64>,
    xdot: DVector<f64>,
    time: f64,
}

impl CartesianPlant {
    pub fn new(lambda: DMatrix<f64>, x0: DVector<f64>, xdot0: DVector<f64>) -> Result<Self> {
        let m = lambda.nrows();
        if !(2..=3).contains(&m) || lambda.ncols() != m {
            return Err(Error::Domain(format!(
                "Cartesian inertia must be 2x2 or 3x3, got {}x{}",
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        if x0.len() != m || xdot0.len() != m {
            return Err(Error::Domain(format!(
                "initial pose/twist must have dimension {m}, got {}/{}",
                x0.len(),
                xdot0.len()
            )));
        }
        if lambda.iter().chain(x0.iter()).chain(xdot0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("Cartesian plant has non-finite parameters".into()));
        }
        if (&lambda - lambda.transpose()).amax() > 1e-12 * lambda.amax() {
            return Err(Error::Domain("Cartesian inertia is not symmetric".into()));
        }
        let chol = Cholesky::new(lambda.clone())
            .ok_or_else(|| Error::Domain("Cartesian inertia is not positive definite".into()))?;
        Ok(Self {
            lambda,
            chol,
            x: x0,
            xdot: xdot0,
            time: 0.0,
        })
    }

    /// Isotropic plant `Λ = mass·I` at rest at `x0`.
    pub fn isotropic(mass: f64, x0: DVector<f64>) -> Result<Self> {
        let m = x0.len();
        Self::new(DMatrix::identity(m, m) * mass, x0, DVector::zeros(m))
    }

    pub fn inertia(&self) -> &DMatrix<f64> {
        &self.lambda
    }
}

impl Plant for CartesianPlant {
    fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    fn pose(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn twist(&self) -> DVector<f64> {
        self.xdot.clone()
    }

    fn kinetic_energy(&self) -> f64 {
        0.5 * self.xdot.dot(&(&self.lambda * &self.xdot))
    }

    fn operational_inertia(&self) -> DMatrix<f64> {
        self.lambda.clone()
    }

    fn step(&mut self, input: &WrenchInput, tau: f64) -> Result<()> {
        check_step_args(input, self.dim(), tau)?;
        let accel = self.chol.solve(&input.net());
        let xdot_next = &self.xdot + &accel * tau;
        let x_next = &self.x + (&self.xdot + &xdot_next) * (0.5 * tau);
        if x_next.iter().chain(xdot_next.iter()).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFault {
                time: self.time,
                detail: "Cartesian plant state became non-finite".into(),
            });
        }
        self.x = x_next;
        self.xdot = xdot_next;
        self.time += tau;
        Ok(())
    }

    fn time(&self) -> f64 {
        self.time
    }
}
