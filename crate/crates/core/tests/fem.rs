use dnls_breather::continuum::explicit_ground_state_1d;
use dnls_breather::{
    fit_slope, project, project_profile, unit_mass_ground_state, Dim, FemFunction, LatticeField,
    ModeSpec,
};
use proptest::prelude::*;

fn fem_strategy(dim: Dim) -> impl Strategy<Value = FemFunction> {
    let modes = ModeSpec::all(dim);
    (0.05f64..2.0, 2usize..8, 0..modes.len()).prop_flat_map(move |(mu, k, m)| {
        let len = (2 * k + 1).pow(dim.n() as u32);
        let mode = modes[m];
        prop::collection::vec(-2.0f64..2.0, len).prop_map(move |v| {
            FemFunction::new(LatticeField::from_values(dim, mu, k, v).unwrap(), mode).unwrap()
        })
    })
}

/// `(int Psi^2, int |grad Psi|^2)` from point evaluations only: Simpson on
/// each interval in 1D, the edge-midpoint rule and vertex differences on each
/// triangle in 2D. Both are exact for piecewise quadratics.
fn oracle(fem: &FemFunction) -> (f64, f64) {
    let k = fem.base().radius() as i64;
    let mu = fem.mesh();
    let at = |i: f64, j: f64| {
        let o = fem.node([0, 0]);
        fem.evaluate(&[o[0] + mu * i, o[1] + mu * j])
    };
    let (mut mass, mut grad) = (0.0, 0.0);
    match fem.base().dim() {
        Dim::One => {
            let at1 = |i: f64| {
                let o = fem.node([0, 0]);
                fem.evaluate(&[o[0] + mu * i])
            };
            for j in -k - 1..=k {
                let (a, b) = (j as f64, j as f64 + 1.0);
                let (fa, fm, fb) = (at1(a), at1(a + 0.5), at1(b));
                mass += mu / 6.0 * (fa * fa + 4.0 * fm * fm + fb * fb);
                grad += (fb - fa).powi(2) / mu;
            }
        }
        Dim::Two => {
            let area = mu * mu / 2.0;
            for j in -k - 1..=k {
                for c in -k - 1..=k {
                    let (x, y) = (j as f64, c as f64);
                    let (f00, f10, f01, f11) = (at(x, y), at(x + 1.0, y), at(x, y + 1.0), at(x + 1.0, y + 1.0));
                    let lower = [at(x + 0.5, y), at(x, y + 0.5), at(x + 0.5, y + 0.5)];
                    let upper = [at(x + 1.0, y + 0.5), at(x + 0.5, y + 1.0), at(x + 0.5, y + 0.5)];
                    for tri in [lower, upper] {
                        mass += area / 3.0 * tri.iter().map(|v| v * v).sum::<f64>();
                    }
                    grad += ((f10 - f00).powi(2) + (f01 - f00).powi(2)) / (mu * mu) * area;
                    grad += ((f11 - f01).powi(2) + (f11 - f10).powi(2)) / (mu * mu) * area;
                }
            }
        }
    }
    (mass, grad)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energies_match_pointwise_oracle(fem in prop_oneof![fem_strategy(Dim::One), fem_strategy(Dim::Two)]) {
        let (mass, grad) = oracle(&fem);
        prop_assert!(close(fem.l2_squared(), mass, 1e-12), "{} vs {}", fem.l2_squared(), mass);
        prop_assert!(close(fem.gradient_energy(), grad, 1e-12));
        prop_assert!(close(fem.gradient_energy_quadrature(), grad, 1e-12));
    }

    #[test]
    fn mass_identity_holds(fem in prop_oneof![fem_strategy(Dim::One), fem_strategy(Dim::Two)]) {
        let r = fem.mass_identity_report();
        prop_assert!(r.rel_err <= 1e-12, "{r:?}");
    }

    #[test]
    fn projecting_the_interpolant_recovers_the_nodes(fem in prop_oneof![fem_strategy(Dim::One), fem_strategy(Dim::Two)]) {
        let base = fem.base();
        let back = project(|z| fem.evaluate(z), base.dim(), base.mesh(), base.radius(), fem.mode()).unwrap();
        for (a, b) in back.values().iter().zip(base.values()) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn interpolant_is_exact_for_affine_functions_inside_the_box() {
    let mode = ModeSpec::all(Dim::Two)[2];
    let g = |z: &[f64]| 0.3 + 1.7 * z[0] - 0.4 * z[1];
    let f = project(g, Dim::Two, 0.3, 6, &mode).unwrap();
    let fem = FemFunction::new(f, mode).unwrap();
    for (x, y) in [(0.11, -0.52), (1.0, 1.01), (-1.2, 0.7), (0.45, 0.45)] {
        assert!((fem.evaluate(&[x, y]) - g(&[x, y])).abs() < 1e-13);
    }
}

#[test]
fn h1_error_is_first_order() {
    for (prof, mus) in [
        (explicit_ground_state_1d(), vec![0.4, 0.2, 0.1, 0.05]),
        (unit_mass_ground_state(Dim::Two, 0.5).unwrap(), vec![2.0, 1.4, 1.0]),
    ] {
        let mode = ModeSpec::all(prof.dim())[0];
        let r = prof.decay_radius(1e-10);
        let errs: Vec<f64> = mus
            .iter()
            .map(|&mu| {
                let k = (r / mu).ceil() as usize;
                FemFunction::new(project_profile(&prof, mu, k, &mode).unwrap(), mode)
                    .unwrap()
                    .h1_error_to_profile(&prof)
            })
            .collect();
        let slope = fit_slope(&mus, &errs);
        // coarse 2D meshes are still pre-asymptotic, so allow some excess
        assert!((0.9..1.25).contains(&slope), "{}D slope {slope}, errors {errs:?}", prof.dim().n());
    }
}

#[test]
fn euler_maclaurin_rejects_small_exponent() {
    let f = LatticeField::delta(Dim::One, 0.5, 3).unwrap();
    let fem = FemFunction::new(f, ModeSpec::all(Dim::One)[0]).unwrap();
    assert!(fem.euler_maclaurin_residual(0.5).is_err());
    // for a hat of height 1 on [-mu, mu]: int Psi^4 = 2 mu / 5, sum gives mu
    let r = fem.euler_maclaurin_residual(2.0).unwrap();
    assert!((r - (0.2 - 0.5)).abs() < 1e-14, "{r}");
}
