use thiserror::Error;

use crate::model::VehicleClass;

/// Errors raised by the constitutive layer, the Riemann solver and the time integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid mix: motorcycle proportion {0} must lie strictly inside (0, 1); the model is undefined at 0 and 1")]
    InvalidMix(f64),

    #[error("invalid mix: road width {0} must be positive")]
    InvalidRoadWidth(f64),

    #[error("invalid {class} parameters: {reason}")]
    InvalidClass { class: VehicleClass, reason: String },

    #[error("negative density {0}")]
    NegativeDensity(f64),

    #[error("nonphysical state: {class} velocity {velocity} is negative")]
    NonphysicalState { class: VehicleClass, velocity: f64 },

    #[error("singular state: {0} density is below the vacuum floor")]
    SingularState(VehicleClass),

    #[error("unknown entropy fix mode `{0}` (expected harten-hyman, paper-literal or none)")]
    UnknownEntropyMode(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("step rejected: CFL number {cfl} exceeds the limit {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error("solution blew up in cell {cell}: {reason}")]
    BlowUp { cell: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
