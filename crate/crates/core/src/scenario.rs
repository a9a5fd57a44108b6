//! Scenario files: JSON configuration, validation and initial conditions.
//!
//! A scenario document looks like
//!
//! ```json
//! {
//!   "name": "freeway_d20",
//!   "road": { "length": 200, "width": 12, "cells": 40 },
//!   "time": { "dt": 0.05, "duration": 60, "cfl_max": 1.0, "snapshots": [0, 1, 20, 40, 60] },
//!   "classes": {
//!     "motorcycle": { "length": 1.8, "pressure_exponent": 2.23, "relaxation_time": 2,
//!                     "v_max": 11, "ao_max": 0.85 },
//!     "car": { "length": 4, "width": 1.6, "pressure_exponent": 2.12, "relaxation_time": 2.5,
//!              "v_max": 13.8, "ao_max": 0.74 }
//!   },
//!   "mix": { "delta": 0.2 },
//!   "initial": [ { "from": 0, "to": 100, "rho": 0.1 }, { "from": 100, "to": 200, "rho": 0.2 } ],
//!   "solver": { "entropy_fix": "harten-hyman", "source": "previous" },
//!   "output": { "formats": ["csv", "trace", "svg"], "x_convention": "center" }
//! }
//! ```
//!
//! Unknown keys are rejected. A motorcycle without `width` gets one third of
//! the car width.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::integrator::{ConservedField, Grid, RunPlan, SolverConfig, TimeControls, XConvention};
use crate::model::{
    primitive_to_conserved, MixSpec, Model, PerClass, VehicleClass, VehicleClassSpec,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid `{path}`: {reason}")]
    Validation { path: String, reason: String },
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    pub length: f64,
    pub width: f64,
    pub cells: usize,
}

fn default_cfl_max() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_cfl_max")]
    pub cfl_max: f64,
    /// Snapshot instants; empty means the initial and final states.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub adaptive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    pub pressure_exponent: f64,
    pub relaxation_time: f64,
    pub v_max: f64,
    pub ao_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassesConfig {
    pub motorcycle: ClassConfig,
    pub car: ClassConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixConfig {
    pub delta: f64,
}

/// Constant total density on `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Trace,
    Svg,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Trace => "trace",
            OutputFormat::Svg => "svg",
        })
    }
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Trace, OutputFormat::Svg]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default)]
    pub x_convention: XConvention,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
            x_convention: XConvention::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub road: RoadConfig,
    pub time: TimeConfig,
    pub classes: ClassesConfig,
    pub mix: MixConfig,
    pub initial: Vec<Segment>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn check_positive(path: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            path,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_positive("road.length", self.road.length)?;
        check_positive("road.width", self.road.width)?;
        if self.road.cells < 4 {
            return Err(invalid(
                "road.cells",
                format!("need at least 4 cells, got {}", self.road.cells),
            ));
        }

        check_positive("time.dt", self.time.dt)?;
        if !(self.time.duration >= 0.0 && self.time.duration.is_finite()) {
            return Err(invalid(
                "time.duration",
                format!("must be nonnegative, got {}", self.time.duration),
            ));
        }
        if !(self.time.cfl_max > 0.0 && self.time.cfl_max <= 1.0) {
            return Err(invalid(
                "time.cfl_max",
                format!("must lie in (0, 1], got {}", self.time.cfl_max),
            ));
        }
        for (i, t) in self.time.snapshots.iter().enumerate() {
            if !(*t >= 0.0 && *t <= self.time.duration) {
                return Err(invalid(
                    format!("time.snapshots[{i}]"),
                    format!("{t} is outside [0, {}]", self.time.duration),
                ));
            }
        }

        if self.classes.car.width.is_none() {
            return Err(invalid("classes.car.width", "is required"));
        }
        for class in VehicleClass::ALL {
            let spec = self.class_spec(class);
            spec.validate(class)
                .map_err(|e| invalid(format!("classes.{class}"), e.to_string()))?;
        }

        let delta = self.mix.delta;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(
                "mix.delta",
                format!("{delta} must lie strictly between 0 and 1; with a single class present the two-class model is unstable (undefined)"),
            ));
        }

        self.validate_segments()
    }

    fn validate_segments(&self) -> Result<(), ConfigError> {
        if self.initial.is_empty() {
            return Err(invalid("initial", "needs at least one segment"));
        }
        let mut order: Vec<usize> = (0..self.initial.len()).collect();
        order.sort_by(|&a, &b| self.initial[a].from.total_cmp(&self.initial[b].from));
        let length = self.road.length;
        let mut covered = 0.0;
        for &i in &order {
            let s = &self.initial[i];
            let path = format!("initial[{i}]");
            if s.from >= s.to || s.from.is_nan() || s.to.is_nan() {
                return Err(invalid(
                    path,
                    format!("empty interval [{}, {})", s.from, s.to),
                ));
            }
            if !(s.rho >= 0.0 && s.rho <= 1.0) {
                return Err(invalid(
                    format!("{path}.rho"),
                    format!("{} must lie in [0, 1]", s.rho),
                ));
            }
            if s.from < covered {
                return Err(invalid(
                    path,
                    format!("overlaps the previous segment ending at {covered}"),
                ));
            }
            if s.from > covered {
                return Err(invalid(
                    path,
                    format!("leaves [{covered}, {}) uncovered", s.from),
                ));
            }
            covered = s.to;
        }
        if covered != length {
            return Err(invalid(
                "initial",
                format!("segments end at {covered} but the road is {length} long"),
            ));
        }
        Ok(())
    }

    pub fn class_spec(&self, class: VehicleClass) -> VehicleClassSpec {
        let car_width = self.classes.car.width.unwrap_or(f64::NAN);
        let c = match class {
            VehicleClass::Motorcycle => &self.classes.motorcycle,
            VehicleClass::Car => &self.classes.car,
        };
        VehicleClassSpec {
            length: c.length,
            width: c.width.unwrap_or(car_width / 3.0),
            pressure_exponent: c.pressure_exponent,
            relaxation_time: c.relaxation_time,
            v_max: c.v_max,
            ao_max: c.ao_max,
        }
    }

    pub fn class_specs(&self) -> PerClass<VehicleClassSpec> {
        PerClass::from_fn(|class| self.class_spec(class))
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(
            self.class_specs(),
            MixSpec::new(self.mix.delta, self.road.width)?,
        )
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.road.cells, self.road.length)
    }

    /// Snapshot instants, sorted and deduplicated.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times = if self.time.snapshots.is_empty() {
            vec![0.0, self.time.duration]
        } else {
            self.time.snapshots.clone()
        };
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    pub fn run_plan(&self) -> Result<RunPlan> {
        Ok(RunPlan {
            model: self.model()?,
            grid: self.grid()?,
            time: TimeControls {
                dt: self.time.dt,
                duration: self.time.duration,
                cfl_max: self.time.cfl_max,
                adaptive: self.time.adaptive,
            },
            solver: self.solver,
            snapshots: self.snapshot_times(),
        })
    }

    /// Total density of the segment containing `x`.
    pub fn density_at(&self, x: f64) -> Option<f64> {
        self.initial
            .iter()
            .find(|s| s.from <= x && x < s.to)
            .map(|s| s.rho)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn parse_scenario(document: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig =
        serde_json::from_str(document).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    config.validate()?;
    Ok(config)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

/// Piecewise-constant total density at cell centers, split by class and set at equilibrium speed.
pub fn build_initial_condition(config: &ScenarioConfig) -> Result<ConservedField> {
    let model = config.model()?;
    let grid = config.grid()?;
    let cells = (0..grid.cells())
        .map(|j| {
            let x = grid.center(j);
            let rho = config
                .density_at(x)
                .ok_or_else(|| Error::InvalidGrid(format!("no initial segment covers x = {x}")))?;
            let cell = model.equilibrium_cell(rho)?;
            Ok(primitive_to_conserved(&cell, &model.laws))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConservedField::new(cells))
}
