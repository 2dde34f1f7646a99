mod common;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use torus_dirac::cocycle::{
    cocycle_class, fibre_class, intersection_index, intersection_index_oracle, GeometricCocycle,
};
use torus_dirac::ktheory::{
    class_of_subtorus, fm_inverse, fm_inverse_with, fm_transform, fm_transform_with, pairing,
    perp_subtorus, pushforward, wedge, KClass, SignConvention, Subtorus,
};
use torus_dirac::lattice::{
    cokernel_invariants, column_hermite_form, is_primitive_basis, kernel_lattice,
    smith_normal_form, Cardinality, IntMatrix,
};

fn matrix(max_rows: usize, max_cols: usize, bound: i64) -> impl Strategy<Value = IntMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(move |(r, c)| {
        prop::collection::vec(-bound..=bound, r * c).prop_map(move |v| IntMatrix::from_i64(r, c, &v))
    })
}

fn square(max: usize, bound: i64) -> impl Strategy<Value = IntMatrix> {
    (1..=max).prop_flat_map(move |n| {
        prop::collection::vec(-bound..=bound, n * n).prop_map(move |v| IntMatrix::from_i64(n, n, &v))
    })
}

fn unimodular(dim: usize) -> impl Strategy<Value = IntMatrix> {
    (
        prop::collection::vec((0..dim.max(1), 0..dim.max(1), -3i64..=3), 0..=3 * dim),
        prop::collection::vec(any::<bool>(), dim),
    )
        .prop_map(move |(ops, flips)| {
            if dim == 0 {
                IntMatrix::identity(0)
            } else {
                common::unimodular_from_ops(dim, &ops, &flips)
            }
        })
}

/// A primitive `d x k` basis.
fn primitive_basis(max_dim: usize) -> impl Strategy<Value = IntMatrix> {
    (1..=max_dim)
        .prop_flat_map(|d| (unimodular(d), 0..=d))
        .prop_map(|(g, k)| g.select_columns(&(0..k).collect::<Vec<_>>()))
}

fn class_in(d: usize) -> impl Strategy<Value = KClass> {
    prop::collection::vec((0u32..(1u32 << d), -5i64..=5), 0..8).prop_map(move |terms| {
        KClass::from_terms(
            d,
            terms.into_iter().map(|(mask, c)| {
                let subset: Vec<usize> = (1..=d).filter(|i| mask & (1 << (i - 1)) != 0).collect();
                (subset, BigInt::from(c))
            }),
        )
        .unwrap()
    })
}

fn class(max_dim: usize) -> impl Strategy<Value = KClass> {
    (0..=max_dim).prop_flat_map(class_in)
}

fn matrix_of(rows: usize, cols: usize, bound: i64) -> impl Strategy<Value = IntMatrix> {
    prop::collection::vec(-bound..=bound, rows * cols).prop_map(move |v| IntMatrix::from_i64(rows, cols, &v))
}

fn is_diagonal(m: &IntMatrix) -> bool {
    (0..m.rows()).all(|i| (0..m.cols()).all(|j| i == j || m.get(i, j).is_zero()))
}

/// gcd of all `k x k` minors, computed by permutation expansion.
fn determinantal_divisor(a: &IntMatrix, k: usize) -> BigInt {
    let mut g = BigInt::zero();
    for rows in common::combinations(a.rows(), k) {
        for cols in common::combinations(a.cols(), k) {
            g = g.gcd(&common::leibniz_det(&a.select(&rows, &cols)));
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn smith_form_invariants(a in matrix(5, 5, 20)) {
        let snf = smith_normal_form(&a);
        prop_assert_eq!(&(&snf.u * &a) * &snf.v, snf.d.clone());
        prop_assert!(snf.u.determinant().unwrap().abs().is_one());
        prop_assert!(snf.v.determinant().unwrap().abs().is_one());
        prop_assert!(is_diagonal(&snf.d));
        let divisors = snf.divisors();
        prop_assert!(divisors.iter().all(|x| x.is_positive()));
        prop_assert!(divisors.windows(2).all(|w| w[1].is_multiple_of(&w[0])));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn smith_divisors_match_minor_gcds(a in matrix(4, 4, 9)) {
        let divisors = smith_normal_form(&a).divisors();
        let mut product = BigInt::one();
        for k in 1..=a.rows().min(a.cols()) {
            let g = determinantal_divisor(&a, k);
            if k <= divisors.len() {
                product *= &divisors[k - 1];
                prop_assert_eq!(&g, &product);
            } else {
                prop_assert!(g.is_zero());
            }
        }
    }

    #[test]
    fn determinant_matches_permutation_expansion(a in square(5, 12)) {
        prop_assert_eq!(a.determinant().unwrap(), common::leibniz_det(&a));
    }

    #[test]
    fn kernel_is_saturated_and_complementary(a in matrix(4, 6, 6)) {
        let k = kernel_lattice(&a);
        prop_assert!((&a * &k).is_zero());
        prop_assert_eq!(a.rank() + k.cols(), a.cols());
        prop_assert!(is_primitive_basis(&k));
        prop_assert_eq!(column_hermite_form(&k), k);
    }

    #[test]
    fn hermite_form_is_canonical(
        (a, g) in (1..=4usize, 1..=4usize).prop_flat_map(|(r, c)| (matrix_of(r, c, 8), unimodular(c)))
    ) {
        // same column lattice, different generators
        let h = column_hermite_form(&a);
        prop_assert_eq!(column_hermite_form(&(&a * &g)), h.clone());
        prop_assert_eq!(column_hermite_form(&h), h);
    }

    #[test]
    fn cokernel_order_is_absolute_determinant(a in square(4, 10)) {
        let det = a.determinant().unwrap();
        let expected = if det.is_zero() { Cardinality::Infinite } else { Cardinality::Finite(det.abs()) };
        prop_assert_eq!(cokernel_invariants(&a).cardinality, expected);
    }

    #[test]
    fn pushforward_coefficients_are_minors(v in matrix(5, 3, 7)) {
        // Plücker coordinates against permutation-expansion minors
        let k = v.cols();
        let class = pushforward(&v, &KClass::top(k)).unwrap();
        for rows in common::combinations(v.rows(), k) {
            let minor = common::leibniz_det(&v.select(&rows, &(0..k).collect::<Vec<_>>()));
            let subset: Vec<usize> = rows.iter().map(|i| i + 1).collect();
            prop_assert_eq!(class.coefficient(&subset), minor);
        }
    }

    #[test]
    fn plucker_covariance_general(v in matrix(5, 3, 5), g in prop::collection::vec(-4i64..=4, 9)) {
        let k = v.cols();
        let g = IntMatrix::from_i64(3, 3, &g).select(&(0..k).collect::<Vec<_>>(), &(0..k).collect::<Vec<_>>());
        let lhs = pushforward(&(&v * &g), &KClass::top(k)).unwrap();
        let rhs = pushforward(&v, &KClass::top(k)).unwrap().scale(&g.determinant().unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn pushforward_is_functorial(
        (a, b, x) in (0..=3usize, 0..=3usize, 0..=3usize)
            .prop_flat_map(|(p, q, r)| (matrix_of(q, p, 4), matrix_of(r, q, 4), class_in(p)))
    ) {
        let composite = pushforward(&(&b * &a), &x).unwrap();
        let stepwise = pushforward(&b, &pushforward(&a, &x).unwrap()).unwrap();
        prop_assert_eq!(composite, stepwise);
    }

    #[test]
    fn fourier_mukai_round_trips(x in class(8)) {
        prop_assert_eq!(fm_inverse(&fm_transform(&x)), x.clone());
        prop_assert_eq!(fm_transform(&fm_inverse(&x)), x.clone());
        let s = SignConvention::Shuffle;
        prop_assert_eq!(fm_inverse_with(&fm_transform_with(&x, s), s), x);
    }

    #[test]
    fn wedge_is_associative((x, y, z) in (0..=4usize).prop_flat_map(|d| (class_in(d), class_in(d), class_in(d)))) {
        let left = wedge(&wedge(&x, &y).unwrap(), &z).unwrap();
        let right = wedge(&x, &wedge(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn shuffle_transform_maps_subtori_to_perps(v in primitive_basis(6)) {
        let t = Subtorus::from_basis(v).unwrap();
        let image = fm_transform_with(&class_of_subtorus(&t), SignConvention::Shuffle);
        let dual = class_of_subtorus(&perp_subtorus(&t));
        prop_assert!(image == dual || image == -&dual);
    }

    #[test]
    fn perp_has_complementary_dimension(v in primitive_basis(6)) {
        let t = Subtorus::from_basis(v).unwrap();
        let p = perp_subtorus(&t);
        prop_assert_eq!(t.dim() + p.dim(), t.ambient_dim());
        prop_assert!((&t.basis().transpose() * p.basis()).is_zero());
        let joined = t.basis().hstack(p.basis()).unwrap();
        prop_assert!(!joined.determinant().unwrap().is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pairing_with_fibre_is_intersection_index((g, d) in (2usize..=5).prop_flat_map(|t| (unimodular(t), 1..t))) {
        let n = g.rows() - d;
        let c = GeometricCocycle::new(d, n, g.select_columns(&(0..d).collect::<Vec<_>>()), None).unwrap();
        let paired = pairing(&cocycle_class(&c), &fibre_class(d, n)).unwrap();
        prop_assert_eq!(paired, intersection_index(&c));
    }

    #[test]
    fn index_is_independent_of_offset_and_base_point(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::random_transverse_cocycle(&mut rng, 2, 2, 40);
        let d = c.base_dim();
        let expected = intersection_index(&c).abs();
        for _ in 0..3 {
            let offset: Vec<BigRational> = (0..c.offset().len()).map(|_| common::random_rational(&mut rng)).collect();
            let point: Vec<BigRational> = (0..d).map(|_| common::random_rational(&mut rng)).collect();
            let shifted = c.clone().with_offset(offset).unwrap();
            prop_assert_eq!(BigInt::from(intersection_index_oracle(&shifted, &point).unwrap()), expected.clone());
        }
    }

    #[test]
    fn reparametrization_scales_index_by_determinant(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::random_transverse_cocycle(&mut rng, 2, 1, 50);
        let g = common::random_unimodular(&mut rng, 2);
        let moved = GeometricCocycle::new(2, 1, c.param() * &g, None).unwrap();
        prop_assert_eq!(intersection_index(&moved), intersection_index(&c) * g.determinant().unwrap());
        prop_assert_eq!(
            cocycle_class(&moved),
            cocycle_class(&c).scale(&g.determinant().unwrap())
        );
    }
}
