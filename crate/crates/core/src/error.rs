use thiserror::Error;

/// Errors raised by the safety layer, the simulated plants, and scenario loading.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates the mathematical domain of an operation
    /// (non-positive mass, non-unit direction, indefinite tensor, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario, region table, or schedule is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The plant integrator produced a non-finite state.
    #[error("integration fault at t = {time} s: {detail}")]
    IntegrationFault { time: f64, detail: String },

    /// Even a zero scaling leaves the tank below its floor. This means the
    /// damper or the energy accounting was violated upstream.
    #[error("emergency fault at step {step}: tank {tank} J below floor {epsilon} J even with alpha = 0")]
    EmergencyFault { step: u64, tank: f64, epsilon: f64 },

    /// A committed tank step ended below the floor.
    #[error("tank fault: committed energy {tank} J below floor {epsilon} J")]
    TankFault { tank: f64, epsilon: f64 },

    #[error("cannot summarize an empty tick log")]
    EmptyLog,

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for faults raised by the closed loop itself (as opposed to bad input).
    pub fn is_controller_fault(&self) -> bool {
        matches!(
            self,
            Error::IntegrationFault { .. } | Error::EmergencyFault { .. } | Error::TankFault { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
