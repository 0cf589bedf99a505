use dnls_breather::{
    dirichlet_form, discrete_laplacian, hamiltonian_d, norm_d, qmu_norm, symmetrize,
    symmetry_defect, Dim, LatticeField, ModeSpec,
};
use proptest::prelude::*;

fn field_strategy(dim: Dim) -> impl Strategy<Value = LatticeField> {
    (0.05f64..2.0, 2usize..7).prop_flat_map(move |(mu, k)| {
        let len = (2 * k + 1).pow(dim.n() as u32);
        prop::collection::vec(-2.0f64..2.0, len)
            .prop_map(move |v| LatticeField::from_values(dim, mu, k, v).unwrap())
    })
}

fn any_field() -> impl Strategy<Value = LatticeField> {
    prop_oneof![field_strategy(Dim::One), field_strategy(Dim::Two)]
}

fn same_shape(f: &LatticeField, values: Vec<f64>) -> LatticeField {
    LatticeField::from_values(f.dim(), f.mesh(), f.radius(), values).unwrap()
}

/// Neighbour sum minus `2n` times the centre, with a zero exterior, from indices.
fn naive_laplacian(f: &LatticeField) -> Vec<f64> {
    (0..f.len())
        .map(|k| {
            let [i, j] = f.multi_index(k);
            let c = f.get([i, j]);
            let mut s = f.get([i + 1, j]) + f.get([i - 1, j]) - 2.0 * c;
            if f.dim() == Dim::Two {
                s += f.get([i, j + 1]) + f.get([i, j - 1]) - 2.0 * c;
            }
            s
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_matches_stencil(f in any_field()) {
        let lap = discrete_laplacian(&f);
        for (a, b) in lap.values().iter().zip(naive_laplacian(&f)) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn laplacian_is_symmetric_and_negative(f in any_field(), seed in 0u64..1000) {
        let g = same_shape(&f, (0..f.len()).map(|k| ((k as u64 * 7919 + seed) as f64).sin()).collect());
        let lf = discrete_laplacian(&f);
        let lg = discrete_laplacian(&g);
        let a = lf.dot(&g).unwrap();
        let b = f.dot(&lg).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
        // summation by parts: -<f, Delta f> equals the bond form
        let form = dirichlet_form(&f);
        prop_assert!((-f.dot(&lf).unwrap() - form).abs() <= 1e-11 * (1.0 + form));
        prop_assert!(form >= 0.0);
    }

    #[test]
    fn norm_and_energy_scale(f in any_field(), c in -3.0f64..3.0) {
        let n = norm_d(&f);
        prop_assert!((norm_d(&f.scaled(c)) - c * c * n).abs() <= 1e-12 * (1.0 + c * c * n));
        // H_d is the bond form scaled by mu^(n-2) minus the potential sum
        let mu = f.mesh();
        let nd = f.dim().n() as i32;
        let p = 0.5;
        let h = hamiltonian_d(&f, p).unwrap();
        let quad = mu.powi(nd - 2) * dirichlet_form(&f);
        let pot: f64 = mu.powi(nd) / (p + 1.0) * f.values().iter().map(|v| v.abs().powf(2.0 * p + 2.0)).sum::<f64>();
        prop_assert!((h - (quad - pot)).abs() <= 1e-12 * (quad + pot + 1e-300));
    }

    #[test]
    fn qmu_norm_is_a_norm(f in any_field(), c in -3.0f64..3.0) {
        let q = qmu_norm(&f);
        prop_assert!(q >= 0.0);
        prop_assert!((qmu_norm(&f.scaled(c)) - c.abs() * q).abs() <= 1e-12 * (1.0 + q));
        let g = f.map(|v| v.sin());
        let sum = same_shape(&f, f.values().iter().zip(g.values()).map(|(a, b)| a + b).collect());
        prop_assert!(qmu_norm(&sum) <= q + qmu_norm(&g) + 1e-12);
    }

    #[test]
    fn symmetrize_is_an_idempotent_projection(f in any_field()) {
        for mode in ModeSpec::all(f.dim()) {
            let s = symmetrize(&f, &mode).unwrap();
            prop_assert_eq!(symmetry_defect(&s, &mode).unwrap(), 0.0);
            let s2 = symmetrize(&s, &mode).unwrap();
            prop_assert_eq!(s.values(), s2.values());
            // orthogonal: <f - s, s> = 0
            let r = f.sub(&s).unwrap();
            prop_assert!(r.dot(&s).unwrap().abs() <= 1e-10 * (1.0 + s.dot(&s).unwrap()));
        }
    }

    #[test]
    fn reflection_is_an_involution(k in -20i64..20) {
        for dim in [Dim::One, Dim::Two] {
            for mode in ModeSpec::all(dim) {
                for axis in 0..dim.n() {
                    prop_assert_eq!(mode.reflect_index(axis, mode.reflect_index(axis, k)), k);
                }
            }
        }
    }

    #[test]
    fn csv_round_trip(f in any_field()) {
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = LatticeField::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.mesh(), f.mesh());
        prop_assert_eq!(back.radius(), f.radius());
    }
}

#[test]
fn delta_values() {
    let d = LatticeField::delta(Dim::Two, 0.5, 3).unwrap();
    assert_eq!(norm_d(&d), 0.25);
    // four bonds of unit jump
    assert_eq!(dirichlet_form(&d), 4.0);
    let q = qmu_norm(&d);
    assert!((q - (0.25f64 + 4.0).sqrt()).abs() < 1e-15);
}

#[test]
fn mismatched_fields_are_rejected() {
    let a = LatticeField::zeros(Dim::One, 0.5, 3).unwrap();
    let b = LatticeField::zeros(Dim::One, 0.5, 4).unwrap();
    assert!(a.sub(&b).is_err());
    assert!(LatticeField::from_values(Dim::One, 0.5, 3, vec![0.0; 6]).is_err());
    assert!(LatticeField::zeros(Dim::One, -1.0, 3).is_err());
}
