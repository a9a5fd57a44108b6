//! Cross-checks against independent numerical oracles.

use mixflow::integrator::{step, ConservedField, SolverConfig, SourceTreatment};
use mixflow::model::{primitive_to_conserved, Model, PrimitiveCell, VehicleClass};
use mixflow::riemann::{
    characteristic_speeds, entropy_fixed_eigenvalues, numerical_flux, physical_flux, roe_average,
    roe_matrix, wave_strengths, EntropyFix,
};
use mixflow::stability::{growth_rates, PerturbationSpec, DEFAULT_WAVENUMBERS};
use mixflow::ConservedCell;
use nalgebra::{Complex, Matrix2, Matrix4, Vector4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_cell(rng: &mut StdRng, model: &Model) -> ConservedCell {
    let cell = PrimitiveCell {
        rho_m: rng.gen_range(1e-3..0.9),
        v_m: rng.gen_range(0.0..14.0),
        rho_c: rng.gen_range(1e-3..0.9),
        v_c: rng.gen_range(0.0..14.0),
    };
    primitive_to_conserved(&cell, &model.laws)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn roe_eigenvalues_match_dense_solver() {
    let model = Model::reference(0.2).unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..500 {
        let ul = random_cell(&mut rng, &model);
        let ur = random_cell(&mut rng, &model);
        let avg = roe_average(&ul, &ur, &model.laws);
        let a = roe_matrix(&avg, &model.laws);
        let dense = Matrix4::from_fn(|i, j| a.0[i][j]);
        let schur = nalgebra::Schur::new(dense);
        let oracle: Vec<f64> = schur
            .complex_eigenvalues()
            .iter()
            .map(|z| {
                assert!(z.im.abs() < 1e-9, "complex eigenvalue {z}");
                z.re
            })
            .collect();
        let ours = sorted(avg.eigenvalues.to_vec());
        let oracle = sorted(oracle);
        for (x, y) in ours.iter().zip(&oracle) {
            assert!(
                (x - y).abs() <= 1e-9 * (1.0 + y.abs()),
                "{ours:?} vs {oracle:?}"
            );
        }
    }
}

#[test]
fn flux_equals_eigen_sandwich() {
    // F = (F_l + F_r)/2 - R |Lambda~| R^-1 (U_r - U_l) / 2 with R^-1 from a dense inverse.
    let model = Model::reference(0.2).unwrap();
    let mut rng = StdRng::seed_from_u64(12);
    for mode in [
        EntropyFix::HartenHyman,
        EntropyFix::PaperLiteral,
        EntropyFix::None,
    ] {
        for _ in 0..300 {
            let ul = random_cell(&mut rng, &model);
            let ur = random_cell(&mut rng, &model);
            let avg = roe_average(&ul, &ur, &model.laws);
            let r = Matrix4::from_fn(|i, k| avg.eigenvectors[k][i]);
            let r_inv = r.try_inverse().expect("eigenvectors are independent");
            let fixed = entropy_fixed_eigenvalues(
                &characteristic_speeds(&ul, &model.laws),
                &avg.eigenvalues,
                &characteristic_speeds(&ur, &model.laws),
                mode,
            );
            let du = Vector4::from_iterator((0..4).map(|i| ur.to_array()[i] - ul.to_array()[i]));
            let lam = Matrix4::from_diagonal(&Vector4::from_column_slice(&fixed));
            let dissipation = r * lam * r_inv * du;
            let fl = physical_flux(&ul, &model.laws);
            let fr = physical_flux(&ur, &model.laws);
            let ours = numerical_flux(&ul, &ur, &model.laws, mode);
            // At low density the acoustic and contact eigenvectors nearly coincide, so
            // the dense inverse is only as accurate as R is well conditioned.
            let cond = r.norm() * r_inv.norm();
            let lam_max = fixed.iter().fold(0.0f64, |m, l| m.max(l.abs()));
            for i in 0..4 {
                let expected = 0.5 * (fl[i] + fr[i]) - 0.5 * dissipation[i];
                let scale = 1.0 + fl[i].abs().max(fr[i].abs()) + lam_max * du.amax();
                assert!(
                    (ours[i] - expected).abs() <= 1e-14 * cond * scale,
                    "{mode} component {i}: {} vs {expected} (cond {cond:.1e})",
                    ours[i]
                );
            }
            // Strengths are R^-1 dU.
            let s = r_inv * du;
            let ours_s = wave_strengths(&ul, &ur, &avg, &model.laws);
            for k in 0..4 {
                assert!(
                    (s[k] - ours_s[k]).abs() <= 1e-14 * cond * (1.0 + s[k].abs()),
                    "{k}: {} vs {} cond {cond:.2e} du {du:?}",
                    s[k],
                    ours_s[k]
                );
            }
        }
    }
}

/// Evolution matrix of one class: perturbations grow as exp(r t) with r its eigenvalues.
fn evolution_matrix(base: &mixflow::stability::ClassBase, k: f64) -> Matrix2<Complex<f64>> {
    let i = Complex::new(0.0, 1.0);
    Matrix2::new(
        -i * k * base.v0,
        -i * k * base.rho0,
        Complex::from(base.speed_slope / base.tau),
        i * k * base.rho0 * base.pressure_slope - i * k * base.v0 - Complex::from(1.0 / base.tau),
    )
}

#[test]
fn growth_rates_match_evolution_matrix_eigenvalues() {
    for delta in [0.1, 0.2, 0.5, 0.9] {
        let model = Model::reference(delta).unwrap();
        for rho in [0.05, 0.2, 0.4, 0.6, 0.9] {
            for k in DEFAULT_WAVENUMBERS.iter().chain(&[2.0, -0.3]) {
                let spec = PerturbationSpec::at_equilibrium(&model, rho, *k).unwrap();
                let roots = growth_rates(&spec);
                // The 4x4 system is block diagonal; collect its spectrum from both blocks.
                let mut dense = nalgebra::Matrix4::<Complex<f64>>::zeros();
                for class in VehicleClass::ALL {
                    let o = class.offset();
                    let block = evolution_matrix(&spec.classes[class], *k);
                    for a in 0..2 {
                        for b in 0..2 {
                            dense[(o + a, o + b)] = block[(a, b)];
                        }
                    }
                }
                let eig = nalgebra::Schur::new(dense)
                    .eigenvalues()
                    .expect("complex Schur is triangular");
                let ours: Vec<Complex<f64>> =
                    VehicleClass::ALL.iter().flat_map(|c| roots[*c]).collect();
                let scale = 1.0 + ours.iter().map(|z| z.norm()).fold(0.0, f64::max);
                for z in &ours {
                    let nearest = eig
                        .iter()
                        .map(|e| (e - z).norm())
                        .fold(f64::INFINITY, f64::min);
                    assert!(
                        nearest <= 1e-8 * scale,
                        "delta={delta} rho={rho} k={k}: {z} not in {eig:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn uniform_relaxation_follows_euler_recurrence() {
    // A uniform field has no flux divergence, so each step is v <- v + dt (v_e - v) / tau.
    let model = Model::reference(0.2).unwrap();
    let rho = 0.2;
    let eq = model.equilibrium_cell(rho).unwrap();
    let start = PrimitiveCell {
        v_m: 2.0,
        v_c: 3.0,
        ..eq
    };
    let field = ConservedField::new(vec![primitive_to_conserved(&start, &model.laws); 8]);
    let solver = SolverConfig {
        entropy_fix: EntropyFix::HartenHyman,
        source: SourceTreatment::Previous,
    };
    let dt = 0.05;
    let mut f = field;
    let steps = 200;
    for _ in 0..steps {
        f = step(&f, dt, 5.0, &model, &solver, 1.0).unwrap();
    }
    let cells = f.primitives(&model.laws).unwrap();
    for class in VehicleClass::ALL {
        let tau = model.classes[class].relaxation_time;
        let ve = eq.velocity(class);
        let v0 = start.velocity(class);
        let euler = ve + (v0 - ve) * (1.0 - dt / tau).powi(steps);
        let exact = ve + (v0 - ve) * (-(steps as f64) * dt / tau).exp();
        for c in &cells {
            assert!(
                (c.velocity(class) - euler).abs() <= 1e-10,
                "{class}: {} vs {euler}",
                c.velocity(class)
            );
            // First-order agreement with the continuous solution.
            assert!((c.velocity(class) - exact).abs() <= 0.05 * (v0 - ve).abs());
            assert_eq!(c.density(class), eq.density(class));
        }
    }
}

fn circular_mean(x: &[f64], w: &[f64], length: f64) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (xi, wi) in x.iter().zip(w) {
        let theta = 2.0 * std::f64::consts::PI * xi / length;
        s += wi * theta.sin();
        c += wi * theta.cos();
    }
    (s.atan2(c) / (2.0 * std::f64::consts::PI) * length).rem_euclid(length)
}

#[test]
fn contact_pulse_returns_after_one_lap() {
    // With a uniform speed the density bump is a pure contact and rides along at that speed.
    let model = Model::reference(0.2).unwrap();
    let (length, cells, speed) = (200.0, 200usize, 8.0);
    let dx = length / cells as f64;
    let x: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * dx).collect();
    let bump = |x: f64| 0.02 + 0.03 * (-((x - 50.0) / 12.0).powi(2)).exp();
    let initial: Vec<ConservedCell> = x
        .iter()
        .map(|&xj| {
            let rho = bump(xj);
            primitive_to_conserved(
                &PrimitiveCell {
                    rho_m: 0.2 * rho,
                    v_m: speed,
                    rho_c: 0.8 * rho,
                    v_c: speed,
                },
                &model.laws,
            )
        })
        .collect();
    let solver = SolverConfig {
        entropy_fix: EntropyFix::HartenHyman,
        source: SourceTreatment::Off,
    };
    let dt = 0.05;
    let steps = (length / speed / dt).round() as usize;
    let mut f = ConservedField::new(initial.clone());
    let mass0: Vec<f64> = VehicleClass::ALL.iter().map(|c| f.mass(*c, dx)).collect();
    for _ in 0..steps {
        f = step(&f, dt, dx, &model, &solver, 1.0).unwrap();
    }
    let prim = f.primitives(&model.laws).unwrap();
    for (i, class) in VehicleClass::ALL.into_iter().enumerate() {
        assert!((f.mass(class, dx) - mass0[i]).abs() <= 1e-12 * mass0[i]);
        let excess: Vec<f64> = prim
            .iter()
            .map(|c| c.density(class) - 0.02 * if i == 0 { 0.2 } else { 0.8 })
            .collect();
        let centre = circular_mean(&x, &excess, length);
        assert!(
            (centre - 50.0).abs() <= dx,
            "{class} bump centred at {centre}"
        );
        for c in &prim {
            assert!(
                (c.velocity(class) - speed).abs() <= 1e-4,
                "{class} speed {}",
                c.velocity(class)
            );
        }
    }
}

#[test]
fn mass_is_conserved_over_a_thousand_steps() {
    let model = Model::reference(0.3).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let cells: Vec<ConservedCell> = (0..64)
        .map(|_| {
            let rho: f64 = rng.gen_range(0.05..0.5);
            let mut c = model.equilibrium_cell(rho).unwrap();
            c.v_m *= rng.gen_range(0.8..1.0);
            c.v_c *= rng.gen_range(0.8..1.0);
            primitive_to_conserved(&c, &model.laws)
        })
        .collect();
    let dx = 5.0;
    for source in [
        SourceTreatment::Off,
        SourceTreatment::Previous,
        SourceTreatment::Intermediate,
    ] {
        let solver = SolverConfig {
            entropy_fix: EntropyFix::HartenHyman,
            source,
        };
        let mut f = ConservedField::new(cells.clone());
        let m0: Vec<f64> = VehicleClass::ALL.iter().map(|c| f.mass(*c, dx)).collect();
        for _ in 0..1000 {
            f = step(&f, 0.05, dx, &model, &solver, 1.0).unwrap();
        }
        for (i, class) in VehicleClass::ALL.into_iter().enumerate() {
            let drift = (f.mass(class, dx) - m0[i]).abs() / m0[i];
            assert!(drift <= 1e-12, "{source:?} {class}: drift {drift}");
        }
    }
}
