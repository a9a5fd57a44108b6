//! Self-checks run by `mixflow check`: Roe properties, Jacobian against finite
//! differences, growth-rate root agreement, and mass conservation.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::integrator::{run_scenario, SourceTreatment};
use crate::model::{primitive_to_conserved, ConservedCell, Model, PrimitiveCell, VehicleClass};
use crate::riemann::{eigenstructure, jacobian, physical_flux, verify_roe_properties};
use crate::scenario::ScenarioConfig;
use crate::stability::{
    block_determinant, class_growth_rates, determinant_scale, stability_map, PerturbationSpec,
    DEFAULT_WAVENUMBERS,
};

pub const CONSISTENCY_TOL: f64 = 1e-12;
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
pub const SCALING_RANGE: (f64, f64) = (3.5, 4.5);
pub const JACOBIAN_REL_TOL: f64 = 1e-6;
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;
pub const ROOT_RESIDUAL_TOL: f64 = 1e-10;
pub const ROOT_AGREEMENT_TOL: f64 = 1e-8;
pub const MASS_DRIFT_TOL: f64 = 1e-12;

/// Ranges for random admissible states.
pub const DENSITY_RANGE: (f64, f64) = (1e-3, 0.9);
pub const VELOCITY_RANGE: (f64, f64) = (0.0, 14.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    /// Informational lines that do not affect `passed`.
    pub notes: Vec<String>,
}

pub fn random_state(rng: &mut StdRng, model: &Model) -> ConservedCell {
    let mut draw = |r: (f64, f64)| rng.gen_range(r.0..=r.1);
    let cell = PrimitiveCell {
        rho_m: draw(DENSITY_RANGE),
        v_m: draw(VELOCITY_RANGE),
        rho_c: draw(DENSITY_RANGE),
        v_c: draw(VELOCITY_RANGE),
    };
    primitive_to_conserved(&cell, &model.laws)
}

pub fn roe_suite(model: &Model, trials: usize, rng: &mut StdRng) -> SuiteResult {
    let mut failures = Vec::new();
    let (mut worst_consistency, mut worst_reconstruction) = (0.0f64, 0.0f64);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for trial in 0..trials {
        let ul = random_state(rng, model);
        let ur = random_state(rng, model);
        let r = verify_roe_properties(&ul, &ur, &model.laws);
        worst_consistency = worst_consistency.max(r.consistency_error);
        worst_reconstruction = worst_reconstruction.max(r.reconstruction_error);
        // None: the residual is already at round-off in every class.
        let scaling_ok = r.residual_scaling.is_none_or(|s| {
            lo = lo.min(s);
            hi = hi.max(s);
            (SCALING_RANGE.0..=SCALING_RANGE.1).contains(&s)
        });
        let ok = r.eigenvalues_real
            && r.hyperbolic()
            && r.consistency_error <= CONSISTENCY_TOL
            && r.reconstruction_error <= RECONSTRUCTION_TOL
            && scaling_ok;
        if !ok && failures.len() < 5 {
            failures.push(format!("trial {trial}: {r:?}"));
        }
    }
    SuiteResult {
        name: "roe-properties",
        passed: failures.is_empty(),
        summary: format!(
            "{trials} pairs; consistency {worst_consistency:.2e}, reconstruction {worst_reconstruction:.2e}, residual scaling in [{lo:.3}, {hi:.3}]"
        ),
        notes: failures,
    }
}

/// Central-difference Jacobian of the physical flux.
pub fn finite_difference_jacobian(u: &ConservedCell, model: &Model) -> [[f64; 4]; 4] {
    let base = u.to_array();
    let mut out = [[0.0; 4]; 4];
    for j in 0..4 {
        let h = 1e-6 * base[j].abs().max(1e-3);
        let mut plus = base;
        let mut minus = base;
        plus[j] += h;
        minus[j] -= h;
        let fp = physical_flux(&ConservedCell::from_array(plus), &model.laws);
        let fm = physical_flux(&ConservedCell::from_array(minus), &model.laws);
        for i in 0..4 {
            out[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

pub fn jacobian_suite(model: &Model, trials: usize, rng: &mut StdRng) -> SuiteResult {
    let mut worst_rel = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut notes = Vec::new();
    for _ in 0..trials {
        let u = random_state(rng, model);
        let (Ok(a), Ok(eig)) = (jacobian(&u, &model.laws), eigenstructure(&u, &model.laws)) else {
            notes.push(format!("singular state {u:?}"));
            continue;
        };
        let fd = finite_difference_jacobian(&u, model);
        let scale = a.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff =
            a.0.iter()
                .flatten()
                .zip(fd.iter().flatten())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst_rel = worst_rel.max(diff / scale);
        for k in 0..4 {
            let ar = a.mul_vec(&eig.vectors[k]);
            let res = (0..4)
                .map(|i| (ar[i] - eig.values[k] * eig.vectors[k][i]).abs())
                .fold(0.0, f64::max);
            worst_eig = worst_eig.max(res);
        }
    }
    SuiteResult {
        name: "jacobian",
        passed: notes.is_empty() && worst_rel <= JACOBIAN_REL_TOL && worst_eig <= EIGEN_RESIDUAL_TOL,
        summary: format!(
            "{trials} states; finite-difference relative error {worst_rel:.2e}, eigenpair residual {worst_eig:.2e}"
        ),
        notes,
    }
}

/// Roots of the same quadratic using the library's principal square root.
pub fn reference_roots(base: &crate::stability::ClassBase, k: f64) -> [Complex64; 2] {
    let i = Complex64::i();
    let shift = i * k * base.v0;
    // tau s^2 + s (1 - i tau k rho p') + i k rho psi v' = 0, with r = s - i k v0.
    let a = Complex64::new(base.tau, 0.0);
    let b = 1.0 - i * base.tau * k * base.rho0 * base.pressure_slope;
    let c = i * k * base.rho0 * base.speed_slope;
    let disc = (b * b - 4.0 * a * c).sqrt();
    [
        (-b + disc) / (2.0 * a) - shift,
        (-b - disc) / (2.0 * a) - shift,
    ]
}

fn root_distance(a: &[Complex64; 2], b: &[Complex64; 2]) -> f64 {
    let direct = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let swapped = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    direct.min(swapped)
}

pub fn roots_suite(config: &ScenarioConfig) -> SuiteResult {
    let classes = config.class_specs();
    let deltas = [0.2, 0.5, 0.9];
    let rhos: Vec<f64> = (1..=10)
        .map(|i| 0.05 + (0.9 - 0.05) * (i - 1) as f64 / 9.0)
        .collect();
    let mut worst_residual = 0.0f64;
    let mut worst_agreement = 0.0f64;
    let mut notes = Vec::new();
    for &delta in &deltas {
        let Ok(model) = Model::new(
            classes,
            crate::model::MixSpec {
                delta,
                road_width: config.road.width,
            },
        ) else {
            continue;
        };
        for &rho in &rhos {
            for &k in &DEFAULT_WAVENUMBERS {
                let Ok(spec) = PerturbationSpec::at_equilibrium(&model, rho, k) else {
                    continue;
                };
                for class in VehicleClass::ALL {
                    let base = &spec.classes[class];
                    let roots = class_growth_rates(base, k);
                    for r in roots {
                        let res =
                            block_determinant(base, k, r).norm() / determinant_scale(base, k, r);
                        worst_residual = worst_residual.max(res);
                    }
                    let scale = 1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
                    worst_agreement = worst_agreement
                        .max(root_distance(&roots, &reference_roots(base, k)) / scale);
                }
            }
        }
    }
    let passed = worst_residual <= ROOT_RESIDUAL_TOL && worst_agreement <= ROOT_AGREEMENT_TOL;
    if let Ok(map) = stability_map(
        &deltas,
        &rhos,
        &DEFAULT_WAVENUMBERS,
        &classes,
        config.road.width,
    ) {
        let total = map.points.len();
        let disagreements: Vec<_> = map.disagreements().collect();
        notes.push(format!(
            "closed-form and spectral verdicts differ at {} of {total} (delta, rho0, class) points",
            disagreements.len()
        ));
        for p in disagreements.iter().take(3) {
            notes.push(format!(
                "  delta={} rho0={:.3} {}: closed-form stable={}, max Re(r)={:.3e}",
                p.delta,
                p.rho0,
                p.condition.class,
                p.condition.stable,
                p.worst_growth()
            ));
        }
    }
    SuiteResult {
        name: "growth-rates",
        passed,
        summary: format!(
            "root residual {worst_residual:.2e}, agreement with principal-sqrt solve {worst_agreement:.2e}"
        ),
        notes,
    }
}

pub fn conservation_suite(config: &ScenarioConfig) -> SuiteResult {
    let mut notes = Vec::new();
    let mut worst = 0.0f64;
    let mut passed = true;
    for source in [SourceTreatment::Off, SourceTreatment::Previous] {
        let mut c = config.clone();
        c.solver.source = source;
        match run_scenario(&c) {
            Ok(trace) => {
                let first = &trace.diagnostics[0];
                for d in &trace.diagnostics {
                    for class in VehicleClass::ALL {
                        let m0 = first.classes[class].mass;
                        let drift =
                            (d.classes[class].mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE);
                        worst = worst.max(drift);
                    }
                }
            }
            Err(failure) => {
                passed = false;
                notes.push(format!("source {source:?}: {failure}"));
            }
        }
    }
    SuiteResult {
        name: "conservation",
        passed: passed && worst <= MASS_DRIFT_TOL,
        summary: format!("relative mass drift {worst:.2e} with source off and on"),
        notes,
    }
}

pub fn run_all(
    config: &ScenarioConfig,
    trials: usize,
    seed: u64,
) -> crate::error::Result<Vec<SuiteResult>> {
    let model = config.model()?;
    let mut rng = StdRng::seed_from_u64(seed);
    Ok(vec![
        roe_suite(&model, trials, &mut rng),
        jacobian_suite(&model, trials.clamp(1, 100), &mut rng),
        roots_suite(config),
        conservation_suite(config),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_reference_model() {
        let model = Model::reference(0.2).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let roe = roe_suite(&model, 50, &mut rng);
        assert!(roe.passed, "{roe:?}");
        let jac = jacobian_suite(&model, 20, &mut rng);
        assert!(jac.passed, "{jac:?}");
    }
}
