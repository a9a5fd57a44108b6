//! Two-class (motorcycle/car) second-order traffic model with a Roe solver.

pub mod checks;
pub mod cli;
pub mod error;
pub mod integrator;
pub mod model;
pub mod output;
pub mod plot;
pub mod riemann;
pub mod scenario;
pub mod stability;

pub use error::{Error, Result};
pub use model::{
    ConservedCell, MixSpec, Model, PerClass, PrimitiveCell, VehicleClass, VehicleClassSpec,
};
