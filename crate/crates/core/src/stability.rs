//! Linear stability of uniform equilibria.
//!
//! A Fourier mode `exp(i k x + r t)` superposed on a uniform equilibrium
//! `(rho_0, v_e(rho_0))` of one class satisfies the 2x2 block system
//!
//! ```text
//! | r + i k v0                                  i k rho0         | |s_rho|
//! | (r + i k v0) p'(rho0) - psi v_e'/tau        r + i k v0 + 1/tau | |s_v  | = 0
//! ```
//!
//! where `v_e'` is the Greenshields slope with respect to area occupancy. The
//! classes decouple, so the four growth rates are the roots of two complex
//! quadratics.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{split_density, MixSpec, Model, PerClass, VehicleClass, VehicleClassSpec};

/// Wavenumbers swept by default in map mode, 1/m.
pub const DEFAULT_WAVENUMBERS: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];

/// Closed-form stability condition of one class, `lhs < rhs` meaning stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityCondition {
    pub class: VehicleClass,
    /// `psi v_e'`.
    pub lhs: f64,
    /// `-dp/drho` at the base density.
    pub rhs: f64,
    /// `lhs - rhs`; negative when stable.
    pub margin: f64,
    pub stable: bool,
}

/// Condition terms from raw constants. `gamma = 0` (constant pressure) gives `rhs = 0`.
pub fn condition_terms(psi: f64, rho0: f64, gamma: f64, v_max: f64, ao_max: f64) -> (f64, f64) {
    let slope = -v_max / ao_max;
    let lhs = psi * slope;
    let rhs = if gamma == 0.0 {
        0.0
    } else {
        -gamma * psi * (psi * rho0).powf(gamma - 1.0)
    };
    (lhs, rhs)
}

pub fn class_stability_condition(
    class: VehicleClass,
    rho0: f64,
    classes: &PerClass<VehicleClassSpec>,
    mix: &MixSpec,
) -> Result<StabilityCondition> {
    let model = Model::new(*classes, *mix)?;
    let (rho_m, rho_c) = split_density(rho0, mix)?;
    let rho = match class {
        VehicleClass::Motorcycle => rho_m,
        VehicleClass::Car => rho_c,
    };
    let spec = &classes[class];
    let (lhs, rhs) = condition_terms(
        model.psi(class),
        rho,
        spec.pressure_exponent,
        spec.v_max,
        spec.ao_max,
    );
    let margin = lhs - rhs;
    Ok(StabilityCondition {
        class,
        lhs,
        rhs,
        margin,
        stable: lhs < rhs,
    })
}

/// Linearization data of one class at a uniform equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassBase {
    pub rho0: f64,
    pub v0: f64,
    /// `dp/drho` at `rho0`.
    pub pressure_slope: f64,
    /// `psi v_e'`, the equilibrium speed slope with respect to class density.
    pub speed_slope: f64,
    pub tau: f64,
}

/// A perturbation of wavenumber `k` on a uniform equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub k: f64,
    pub classes: PerClass<ClassBase>,
}

impl PerturbationSpec {
    /// Equilibrium base state at total density `rho0`.
    pub fn at_equilibrium(model: &Model, rho0: f64, k: f64) -> Result<Self> {
        if k == 0.0 || !k.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "wavenumber must be nonzero, got {k}"
            )));
        }
        let (rho_m, rho_c) = split_density(rho0, &model.mix)?;
        let classes = PerClass::from_fn(|class| {
            let rho = match class {
                VehicleClass::Motorcycle => rho_m,
                VehicleClass::Car => rho_c,
            };
            let spec = &model.classes[class];
            let law = &model.laws[class];
            ClassBase {
                rho0: rho,
                v0: model.equilibrium_velocity(class, rho),
                pressure_slope: law.pressure_derivative(rho),
                speed_slope: law.psi * (-spec.v_max / spec.ao_max),
                tau: spec.relaxation_time,
            }
        });
        Ok(Self { k, classes })
    }
}

/// Block determinant of one class evaluated at growth rate `r`.
pub fn block_determinant(base: &ClassBase, k: f64, r: Complex64) -> Complex64 {
    let i = Complex64::i();
    let a = r + i * k * base.v0;
    let upper_right = i * k * base.rho0;
    let lower_left = a * base.pressure_slope - base.speed_slope / base.tau;
    let lower_right = a + 1.0 / base.tau;
    a * lower_right - upper_right * lower_left
}

/// Scale used to normalize determinant residuals.
pub fn determinant_scale(base: &ClassBase, k: f64, r: Complex64) -> f64 {
    let kk = k.abs();
    let a = r.norm() + kk * base.v0.abs();
    1.0 + a * a
        + a / base.tau
        + kk * base.rho0 * (a * base.pressure_slope.abs() + base.speed_slope.abs() / base.tau)
}

/// Principal square root of `re + i im` written with real square roots only.
pub fn split_sqrt(re: f64, im: f64) -> Complex64 {
    let modulus = re.hypot(im);
    let real = (0.5 * (modulus + re)).max(0.0).sqrt();
    let imag = (0.5 * (modulus - re)).max(0.0).sqrt();
    Complex64::new(real, if im < 0.0 { -imag } else { imag })
}

/// The two growth rates of one class, `r_+` then `r_-`.
pub fn class_growth_rates(base: &ClassBase, k: f64) -> [Complex64; 2] {
    // tau s^2 + s (1 - i tau k rho p') + i k rho psi v' = 0 with s = r + i k v0
    let t = base.tau;
    let kr = k * base.rho0;
    let g_re = 1.0 - (base.pressure_slope * kr * t).powi(2);
    let g_im = -(2.0 * base.pressure_slope * kr * t + 4.0 * base.speed_slope * kr * t);
    let root = split_sqrt(g_re, g_im);
    let centre = Complex64::new(-1.0, t * kr * base.pressure_slope - 2.0 * t * k * base.v0);
    [(centre + root) / (2.0 * t), (centre - root) / (2.0 * t)]
}

/// All four growth rates: motorcycle pair then car pair.
pub fn growth_rates(spec: &PerturbationSpec) -> PerClass<[Complex64; 2]> {
    spec.classes.map(|_, base| class_growth_rates(base, spec.k))
}

/// Largest real part among the roots of one class.
pub fn max_growth(roots: &[Complex64; 2]) -> f64 {
    roots[0].re.max(roots[1].re)
}

/// One (delta, rho0, class) point of a stability sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapPoint {
    pub delta: f64,
    pub rho0: f64,
    pub condition: StabilityCondition,
    /// `(k, max Re r)` for every swept wavenumber.
    pub growth: Vec<(f64, f64)>,
    /// Largest determinant residual (normalized) among the roots at this point.
    pub residual: f64,
}

impl MapPoint {
    pub fn worst_growth(&self) -> f64 {
        self.growth
            .iter()
            .map(|g| g.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spectral_stable(&self) -> bool {
        self.worst_growth() < 0.0
    }

    pub fn verdicts_agree(&self) -> bool {
        self.condition.stable == self.spectral_stable()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityMap {
    pub points: Vec<MapPoint>,
}

impl StabilityMap {
    /// Points where the closed-form and spectral verdicts differ.
    pub fn disagreements(&self) -> impl Iterator<Item = &MapPoint> {
        self.points.iter().filter(|p| !p.verdicts_agree())
    }
}

/// Sweeps closed-form conditions and growth rates over a `(delta, rho0, k)` grid.
pub fn stability_map(
    deltas: &[f64],
    rhos: &[f64],
    wavenumbers: &[f64],
    classes: &PerClass<VehicleClassSpec>,
    road_width: f64,
) -> Result<StabilityMap> {
    if deltas.is_empty() || rhos.is_empty() || wavenumbers.is_empty() {
        return Err(Error::InvalidGrid(
            "stability grid needs at least one point per axis".into(),
        ));
    }
    if let Some(r) = rhos.iter().find(|r| r.is_nan() || **r < 0.0) {
        return Err(Error::NegativeDensity(*r));
    }
    if let Some(k) = wavenumbers.iter().find(|k| **k == 0.0 || !k.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "wavenumber must be nonzero, got {k}"
        )));
    }
    let mut points = Vec::with_capacity(deltas.len() * rhos.len() * 2);
    for &delta in deltas {
        let mix = MixSpec::new(delta, road_width)?;
        let model = Model::new(*classes, mix)?;
        for &rho0 in rhos {
            let specs: Vec<PerturbationSpec> = wavenumbers
                .iter()
                .map(|&k| PerturbationSpec::at_equilibrium(&model, rho0, k))
                .collect::<Result<_>>()?;
            for class in VehicleClass::ALL {
                let condition = class_stability_condition(class, rho0, classes, &mix)?;
                let mut growth = Vec::with_capacity(specs.len());
                let mut residual = 0.0f64;
                for spec in &specs {
                    let base = &spec.classes[class];
                    let roots = class_growth_rates(base, spec.k);
                    for r in roots {
                        let det = block_determinant(base, spec.k, r).norm();
                        residual = residual.max(det / determinant_scale(base, spec.k, r));
                    }
                    growth.push((spec.k, max_growth(&roots)));
                }
                points.push(MapPoint {
                    delta,
                    rho0,
                    condition,
                    growth,
                    residual,
                });
            }
        }
    }
    Ok(StabilityMap { points })
}
