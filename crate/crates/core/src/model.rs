//! Constitutive layer of the two-class Aw-Rascle model.
//!
//! Total normalized density is split between motorcycles and cars by the
//! motorcycle proportion `delta`. Both classes share one road-level area
//! occupancy, written per class as `AO = psi_i * rho_i`, which feeds the
//! traffic pressure `p_i = (psi_i rho_i)^gamma_i` and a Greenshields-type
//! equilibrium speed `v_max (1 - AO / AO_max)`.
//!
//! The conserved state per class is `(rho, X)` with the generalized momentum
//! `X = rho (v + p)`.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities below this floor are treated as vacuum (velocity defined as 0).
pub const VACUUM_DENSITY: f64 = 1e-10;

/// Negative velocities smaller than this in magnitude are round-off and clamp to 0.
pub const NEGATIVE_VELOCITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Motorcycle,
    Car,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 2] = [VehicleClass::Motorcycle, VehicleClass::Car];

    /// Position of the class block inside a 4-component state vector.
    pub fn offset(self) -> usize {
        match self {
            VehicleClass::Motorcycle => 0,
            VehicleClass::Car => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VehicleClass::Motorcycle => "motorcycle",
            VehicleClass::Car => "car",
        }
    }

    /// Short suffix used in CSV column names (`m`, `c`).
    pub fn suffix(self) -> &'static str {
        match self {
            VehicleClass::Motorcycle => "m",
            VehicleClass::Car => "c",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value held once per vehicle class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerClass<T> {
    pub motorcycle: T,
    pub car: T,
}

impl<T> PerClass<T> {
    pub fn new(motorcycle: T, car: T) -> Self {
        Self { motorcycle, car }
    }

    pub fn from_fn(mut f: impl FnMut(VehicleClass) -> T) -> Self {
        Self {
            motorcycle: f(VehicleClass::Motorcycle),
            car: f(VehicleClass::Car),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(VehicleClass, &T) -> U) -> PerClass<U> {
        PerClass {
            motorcycle: f(VehicleClass::Motorcycle, &self.motorcycle),
            car: f(VehicleClass::Car, &self.car),
        }
    }

    pub fn try_from_fn<E>(mut f: impl FnMut(VehicleClass) -> Result<T, E>) -> Result<Self, E> {
        Ok(Self {
            motorcycle: f(VehicleClass::Motorcycle)?,
            car: f(VehicleClass::Car)?,
        })
    }
}

impl<T> Index<VehicleClass> for PerClass<T> {
    type Output = T;

    fn index(&self, class: VehicleClass) -> &T {
        match class {
            VehicleClass::Motorcycle => &self.motorcycle,
            VehicleClass::Car => &self.car,
        }
    }
}

impl<T> IndexMut<VehicleClass> for PerClass<T> {
    fn index_mut(&mut self, class: VehicleClass) -> &mut T {
        match class {
            VehicleClass::Motorcycle => &mut self.motorcycle,
            VehicleClass::Car => &mut self.car,
        }
    }
}

/// Physical and model constants of one vehicle class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleClassSpec {
    /// Vehicle length in meters.
    pub length: f64,
    /// Vehicle width in meters.
    pub width: f64,
    /// Exponent of the traffic pressure law.
    pub pressure_exponent: f64,
    /// Relaxation time towards equilibrium speed, seconds.
    pub relaxation_time: f64,
    /// Free-flow speed, m/s.
    pub v_max: f64,
    /// Area occupancy at which the class stops, in (0, 1].
    pub ao_max: f64,
}

impl VehicleClassSpec {
    pub fn validate(&self, class: VehicleClass) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("pressure_exponent", self.pressure_exponent),
            ("relaxation_time", self.relaxation_time),
            ("v_max", self.v_max),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidClass {
                    class,
                    reason: format!("{name} must be positive and finite, got {value}"),
                });
            }
        }
        if !(self.ao_max > 0.0 && self.ao_max <= 1.0) {
            return Err(Error::InvalidClass {
                class,
                reason: format!("ao_max must lie in (0, 1], got {}", self.ao_max),
            });
        }
        Ok(())
    }

    /// Plan area `l * w` in square meters.
    pub fn plan_area(&self) -> f64 {
        self.length * self.width
    }

    /// Car constants used throughout the reference scenarios.
    pub fn reference_car() -> Self {
        Self {
            length: 4.0,
            width: 1.6,
            pressure_exponent: 2.12,
            relaxation_time: 2.5,
            v_max: 13.8,
            ao_max: 0.74,
        }
    }

    /// Motorcycle constants used throughout the reference scenarios; the
    /// width is one third of the reference car width.
    pub fn reference_motorcycle() -> Self {
        Self {
            length: 1.8,
            width: Self::reference_car().width / 3.0,
            pressure_exponent: 2.23,
            relaxation_time: 2.0,
            v_max: 11.0,
            ao_max: 0.85,
        }
    }
}

/// Both class specs of the reference parameter set.
pub fn reference_classes() -> PerClass<VehicleClassSpec> {
    PerClass::new(
        VehicleClassSpec::reference_motorcycle(),
        VehicleClassSpec::reference_car(),
    )
}

/// Motorcycle proportion and road width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub delta: f64,
    pub road_width: f64,
}

impl MixSpec {
    pub fn new(delta: f64, road_width: f64) -> Result<Self> {
        let mix = Self { delta, road_width };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidMix(self.delta));
        }
        if !(self.road_width > 0.0 && self.road_width.is_finite()) {
            return Err(Error::InvalidRoadWidth(self.road_width));
        }
        Ok(())
    }

    /// Fraction of total density carried by `class`.
    pub fn share(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Motorcycle => self.delta,
            VehicleClass::Car => 1.0 - self.delta,
        }
    }
}

/// Primitive variables of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrimitiveCell {
    pub rho_m: f64,
    pub v_m: f64,
    pub rho_c: f64,
    pub v_c: f64,
}

impl PrimitiveCell {
    pub fn density(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Motorcycle => self.rho_m,
            VehicleClass::Car => self.rho_c,
        }
    }

    pub fn velocity(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Motorcycle => self.v_m,
            VehicleClass::Car => self.v_c,
        }
    }

    pub fn total_density(&self) -> f64 {
        self.rho_m + self.rho_c
    }
}

/// Conserved variables `(rho_m, X_m, rho_c, X_c)` of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConservedCell {
    pub rho_m: f64,
    pub x_m: f64,
    pub rho_c: f64,
    pub x_c: f64,
}

impl ConservedCell {
    pub fn from_array(u: [f64; 4]) -> Self {
        Self {
            rho_m: u[0],
            x_m: u[1],
            rho_c: u[2],
            x_c: u[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rho_m, self.x_m, self.rho_c, self.x_c]
    }

    /// `(rho, X)` of one class.
    pub fn class(&self, class: VehicleClass) -> (f64, f64) {
        match class {
            VehicleClass::Motorcycle => (self.rho_m, self.x_m),
            VehicleClass::Car => (self.rho_c, self.x_c),
        }
    }

    pub fn density(&self, class: VehicleClass) -> f64 {
        self.class(class).0
    }
}

/// Pressure law `p(rho) = (psi rho)^gamma` of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureLaw {
    pub psi: f64,
    pub gamma: f64,
}

impl PressureLaw {
    pub fn pressure(&self, rho: f64) -> f64 {
        pressure(rho, self.psi, self.gamma)
    }

    /// `dp/drho = gamma psi (psi rho)^(gamma - 1)`.
    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        if self.gamma == 0.0 {
            return 0.0;
        }
        let ao = self.psi * rho.max(0.0);
        if ao == 0.0 {
            return if self.gamma > 1.0 { 0.0 } else { f64::INFINITY };
        }
        self.gamma * self.psi * ao.powf(self.gamma - 1.0)
    }
}

/// Splits total density into `(rho_m, rho_c)`.
pub fn split_density(rho: f64, mix: &MixSpec) -> Result<(f64, f64)> {
    mix.validate()?;
    if rho < 0.0 {
        return Err(Error::NegativeDensity(rho));
    }
    let rho_m = mix.delta * rho;
    // rho - rho_m rather than (1 - delta) * rho keeps the split summing back exactly.
    Ok((rho_m, rho - rho_m))
}

/// Factor `psi_i` turning a class density into the road-level area occupancy.
pub fn occupancy_factor(
    class: VehicleClass,
    classes: &PerClass<VehicleClassSpec>,
    mix: &MixSpec,
) -> Result<f64> {
    mix.validate()?;
    let delta = mix.delta;
    let covered = (1.0 - delta) * classes.car.plan_area() + delta * classes.motorcycle.plan_area();
    Ok(covered / (mix.road_width * mix.share(class)))
}

pub fn area_occupancy(rho: f64, psi: f64) -> Result<f64> {
    if rho < 0.0 {
        return Err(Error::NegativeDensity(rho));
    }
    Ok(psi * rho)
}

/// Traffic pressure `(psi rho)^gamma`; zero on an empty road.
pub fn pressure(rho: f64, psi: f64, gamma: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    (psi * rho).powf(gamma)
}

/// Greenshields closure in terms of area occupancy, clamped at zero beyond `ao_max`.
pub fn greenshields(ao: f64, spec: &VehicleClassSpec) -> f64 {
    if ao <= spec.ao_max {
        spec.v_max * (1.0 - ao / spec.ao_max)
    } else {
        0.0
    }
}

/// Equilibrium speed of `class` at class density `rho`.
pub fn equilibrium_velocity(
    rho: f64,
    class: VehicleClass,
    classes: &PerClass<VehicleClassSpec>,
    mix: &MixSpec,
) -> Result<f64> {
    let psi = occupancy_factor(class, classes, mix)?;
    let ao = area_occupancy(rho, psi)?;
    Ok(greenshields(ao, &classes[class]))
}

/// Smallest total density at which the equilibrium speed of `class` reaches zero.
pub fn jam_density(
    class: VehicleClass,
    classes: &PerClass<VehicleClassSpec>,
    mix: &MixSpec,
) -> Result<f64> {
    let psi = occupancy_factor(class, classes, mix)?;
    Ok(classes[class].ao_max / (psi * mix.share(class)))
}

/// Closed-form sensitivities of the equilibrium speed for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassSensitivity {
    /// d v_e / d AO.
    pub dve_dao: f64,
    /// d v_e / d delta at fixed class density.
    pub dve_ddelta: f64,
    /// d v_e / d rho with rho the total density.
    pub dve_drho: f64,
}

/// Derivatives of the unclamped equilibrium speeds; meaningful below jam.
pub type EquilibriumDiagnostics = PerClass<ClassSensitivity>;

pub fn equilibrium_diagnostics(
    rho: f64,
    classes: &PerClass<VehicleClassSpec>,
    mix: &MixSpec,
) -> Result<EquilibriumDiagnostics> {
    let (rho_m, rho_c) = split_density(rho, mix)?;
    let w = mix.road_width;
    let delta = mix.delta;
    let a_c = classes.car.plan_area();
    let a_m = classes.motorcycle.plan_area();
    let covered = a_c * (1.0 - delta) + delta * a_m;
    let m = &classes.motorcycle;
    let c = &classes.car;

    Ok(PerClass {
        motorcycle: ClassSensitivity {
            dve_dao: -m.v_max / m.ao_max,
            dve_ddelta: rho_m * a_c * m.v_max / (m.ao_max * delta * delta * w),
            dve_drho: -m.v_max * covered / (m.ao_max * w),
        },
        car: ClassSensitivity {
            dve_dao: -c.v_max / c.ao_max,
            dve_ddelta: -a_m * rho_c * c.v_max / (c.ao_max * w * (1.0 - delta).powi(2)),
            dve_drho: -c.v_max * covered / (c.ao_max * w),
        },
    })
}

/// Per-class pressure laws for a given mix.
pub fn pressure_laws(
    classes: &PerClass<VehicleClassSpec>,
    mix: &MixSpec,
) -> Result<PerClass<PressureLaw>> {
    PerClass::try_from_fn(|class| {
        Ok(PressureLaw {
            psi: occupancy_factor(class, classes, mix)?,
            gamma: classes[class].pressure_exponent,
        })
    })
}

pub fn primitive_to_conserved(cell: &PrimitiveCell, laws: &PerClass<PressureLaw>) -> ConservedCell {
    let momentum = |rho: f64, v: f64, law: &PressureLaw| rho * (v + law.pressure(rho));
    ConservedCell {
        rho_m: cell.rho_m,
        x_m: momentum(cell.rho_m, cell.v_m, &laws.motorcycle),
        rho_c: cell.rho_c,
        x_c: momentum(cell.rho_c, cell.v_c, &laws.car),
    }
}

/// Velocity `X / rho - p(rho)` without admissibility checks; 0 in vacuum.
pub fn raw_velocity(rho: f64, x: f64, law: &PressureLaw, floor: f64) -> f64 {
    if rho < floor {
        0.0
    } else {
        x / rho - law.pressure(rho)
    }
}

pub fn conserved_to_primitive(
    cell: &ConservedCell,
    laws: &PerClass<PressureLaw>,
    vacuum_floor: f64,
) -> Result<PrimitiveCell> {
    let velocity = |class: VehicleClass| -> Result<f64> {
        let (rho, x) = cell.class(class);
        if rho < 0.0 {
            return Err(Error::NegativeDensity(rho));
        }
        let v = raw_velocity(rho, x, &laws[class], vacuum_floor);
        if v >= 0.0 {
            Ok(v)
        } else if v >= -NEGATIVE_VELOCITY_TOLERANCE {
            Ok(0.0)
        } else {
            Err(Error::NonphysicalState { class, velocity: v })
        }
    };
    Ok(PrimitiveCell {
        rho_m: cell.rho_m,
        v_m: velocity(VehicleClass::Motorcycle)?,
        rho_c: cell.rho_c,
        v_c: velocity(VehicleClass::Car)?,
    })
}

/// Model constants bundled with the derived per-class pressure laws.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub classes: PerClass<VehicleClassSpec>,
    pub mix: MixSpec,
    pub laws: PerClass<PressureLaw>,
}

impl Model {
    pub fn new(classes: PerClass<VehicleClassSpec>, mix: MixSpec) -> Result<Self> {
        for class in VehicleClass::ALL {
            classes[class].validate(class)?;
        }
        mix.validate()?;
        let laws = pressure_laws(&classes, &mix)?;
        Ok(Self { classes, mix, laws })
    }

    pub fn reference(delta: f64) -> Result<Self> {
        Self::new(reference_classes(), MixSpec::new(delta, 12.0)?)
    }

    pub fn psi(&self, class: VehicleClass) -> f64 {
        self.laws[class].psi
    }

    pub fn equilibrium_velocity(&self, class: VehicleClass, rho: f64) -> f64 {
        greenshields(self.psi(class) * rho.max(0.0), &self.classes[class])
    }

    /// Primitive cell at equilibrium for a total density.
    pub fn equilibrium_cell(&self, rho: f64) -> Result<PrimitiveCell> {
        let (rho_m, rho_c) = split_density(rho, &self.mix)?;
        Ok(PrimitiveCell {
            rho_m,
            v_m: self.equilibrium_velocity(VehicleClass::Motorcycle, rho_m),
            rho_c,
            v_c: self.equilibrium_velocity(VehicleClass::Car, rho_c),
        })
    }

    pub fn relaxation_source(&self, cell: &PrimitiveCell) -> [f64; 4] {
        relaxation_source(cell, self)
    }
}

/// Relaxation source `(0, rho_m (v_em - v_m)/tau_m, 0, rho_c (v_ec - v_c)/tau_c)`.
pub fn relaxation_source(cell: &PrimitiveCell, model: &Model) -> [f64; 4] {
    let mut s = [0.0; 4];
    for class in VehicleClass::ALL {
        let rho = cell.density(class);
        let v = cell.velocity(class);
        let ve = model.equilibrium_velocity(class, rho);
        s[class.offset() + 1] = rho * (ve - v) / model.classes[class].relaxation_time;
    }
    s
}
