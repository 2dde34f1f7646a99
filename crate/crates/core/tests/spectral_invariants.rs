use proptest::prelude::*;
use torus_dirac::spectral::{
    build_dolbeault_torus, build_schrodinger_product, commutator_norm, heisenberg_model,
    numerical_index, representation_generators, torus_dirac, IrrationalRotation, OperatorForm,
    SpectralReport, TruncatedOperator,
};

fn graded_operators() -> Vec<TruncatedOperator> {
    vec![
        build_dolbeault_torus(6).unwrap(),
        build_schrodinger_product(1, 1, 5).unwrap(),
        build_schrodinger_product(2, 2, 2).unwrap(),
        build_schrodinger_product(1, 2, 2).unwrap(),
        torus_dirac(2, 4).unwrap(),
    ]
}

#[test]
fn graded_operators_are_hermitian_odd_and_symmetric() {
    for op in graded_operators() {
        assert_eq!(op.form(), OperatorForm::SelfAdjoint);
        assert!(op.matrix().is_hermitian(), "{}", op.name());
        assert!(op.is_odd(), "{}", op.name());
        let eig = op.eigenvalues().unwrap();
        let n = eig.len();
        for i in 0..n {
            assert!((eig[i] + eig[n - 1 - i]).abs() <= 1e-10, "{}: {} vs {}", op.name(), eig[i], eig[n - 1 - i]);
        }
    }
}

#[test]
fn index_is_stable_across_tolerances() {
    let mut ops = graded_operators();
    ops.push(heisenberg_model(3, 5, 60, 0.3).unwrap());
    for op in ops {
        let reference = numerical_index(&op, 1e-8).unwrap();
        for tol in [1e-10, 1e-9, 1e-7, 1e-6] {
            assert_eq!(numerical_index(&op, tol).unwrap(), reference, "{} at {tol}", op.name());
        }
    }
}

#[test]
fn mode_labels_are_sorted_and_within_cutoff() {
    for op in graded_operators() {
        let labels = op.mode_labels();
        assert!(labels.windows(2).all(|w| w[0] < w[1]), "{}", op.name());
        let n = op.cutoff() as i64;
        assert!(labels.iter().all(|m| m.coords.iter().all(|x| x.abs() <= n)));
    }
}

#[test]
fn dolbeault_mode_count() {
    for n in [1usize, 3, 7] {
        let op = build_dolbeault_torus(n).unwrap();
        assert_eq!(op.mode_labels().len(), 2 * (2 * n + 1).pow(2));
    }
}

#[test]
fn report_serializes_with_cutoff_key() {
    let op = build_dolbeault_torus(2).unwrap();
    let report = SpectralReport::for_operator(&op, 3).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["N"], 2);
    assert_eq!(json["name"], "dolbeault");
    assert_eq!(json["singular_values_head"].as_array().unwrap().len(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dirac_does_not_depend_on_theta(a in 0.0f64..1.0, b in 0.0f64..1.0, n in 1usize..6) {
        let first = IrrationalRotation { theta: a, cutoff: n };
        let second = IrrationalRotation { theta: b, cutoff: n };
        prop_assert_eq!(first.dirac().unwrap(), second.dirac().unwrap());
    }

    #[test]
    fn commutator_norms_do_not_depend_on_theta(theta in 0.0f64..1.0) {
        let d = build_dolbeault_torus(8).unwrap();
        let (u, v) = representation_generators(theta, 8).unwrap();
        prop_assert!((commutator_norm(&d, &u).unwrap() - std::f64::consts::TAU).abs() < 1e-9);
        prop_assert!((commutator_norm(&d, &v).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heisenberg_index_is_q(q in 1i64..=8, p in -20i64..=20, n in 5usize..80, theta in 0.0f64..1.0) {
        prop_assume!(num_integer::Integer::gcd(&p, &q) == 1);
        let op = heisenberg_model(p, q, n, theta).unwrap();
        prop_assert_eq!(numerical_index(&op, 1e-8).unwrap(), q);
    }
}
