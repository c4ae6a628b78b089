//! Property tests for the structural invariants of each layer.

use frobenius_lift::algebra::FrobeniusAlgebra;
use frobenius_lift::expr::{parse, Expression, Monomial, PolynomialForm};
use frobenius_lift::field::Grid;
use frobenius_lift::hierarchy::{generate_densities, Hierarchy};
use frobenius_lift::manifold::{FrobeniusManifold, LiftedManifold, Prepotential};
use frobenius_lift::scalar::{qr, Q};
use num_traits::Zero;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Q> {
    (-9i64..10, 1i64..5).prop_map(|(n, d)| qr(n, d))
}

fn element(n: usize) -> impl Strategy<Value = Vec<Q>> {
    prop::collection::vec(rational(), n)
}

/// A Frobenius algebra from the built-in families; degenerate trace forms
/// are filtered out.
fn algebra() -> impl Strategy<Value = FrobeniusAlgebra> {
    prop_oneof![
        (rational(), rational(), 1usize..=2).prop_filter_map("degenerate trace form", |(e, m, k)| {
            FrobeniusAlgebra::z2(&e, &m, k).ok()
        }),
        (1usize..=4).prop_flat_map(|n| (Just(n), 0..n)).prop_map(|(n, k)| FrobeniusAlgebra::zn(n, k).unwrap()),
        (1usize..=4).prop_map(|n| FrobeniusAlgebra::zn_trace(n).unwrap()),
    ]
}

fn polynomial_expr(vars: usize) -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![(-5i64..6).prop_map(Expression::int), (0..vars).prop_map(Expression::var)];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expression::Sum),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expression::Product),
            (inner, 0u32..4).prop_map(|(e, k)| e.pow(k)),
        ]
    })
}

fn manifold() -> impl Strategy<Value = FrobeniusManifold> {
    prop_oneof![Just(FrobeniusManifold::cubic1d()), Just(FrobeniusManifold::a2()), Just(FrobeniusManifold::cp1())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn algebra_axioms(alg in algebra(), seed in any::<u64>()) {
        let n = alg.dim();
        let mut rng = frobenius_lift::algebra::seeded_rng(seed);
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Q> {
            use rand::Rng;
            (0..n).map(|_| qr(rng.random_range(-5..6), rng.random_range(1..4))).collect()
        };
        let (x, y, z) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let m = |a: &[Q], b: &[Q]| alg.multiply(a, b).unwrap();
        prop_assert_eq!(m(&x, &y), m(&y, &x));
        prop_assert_eq!(m(&m(&x, &y), &z), m(&x, &m(&y, &z)));
        prop_assert_eq!(m(&alg.unit::<Q>(), &x), x.clone());
        prop_assert_eq!(alg.trace(&m(&m(&x, &y), &z)), alg.trace(&m(&x, &m(&y, &z))));
        prop_assert_eq!(m(&x, &y).len(), n);
    }

    #[test]
    fn validation_passes_on_built_in_families(alg in algebra(), seed in any::<u64>()) {
        let report = alg.validate(seed, 4);
        prop_assert!(report.passed(), "{:?}", report.checks);
    }

    #[test]
    fn inverse_round_trip(alg in algebra(), a in element(4), b in element(4)) {
        let n = alg.dim();
        let (a, b) = (&a[..n], &b[..n]);
        if let Ok(inv) = alg.invert(a) {
            prop_assert_eq!(alg.multiply(a, &inv).unwrap(), alg.unit::<Q>());
            let ab = alg.multiply(a, b).unwrap();
            prop_assert_eq!(alg.multiply(&ab, &inv).unwrap(), b.to_vec());
        }
    }

    #[test]
    fn print_parse_round_trip(e in polynomial_expr(3)) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(back.to_string(), printed);
        prop_assert_eq!(back.to_polynomial().unwrap(), e.to_polynomial().unwrap());
    }

    #[test]
    fn polynomial_form_matches_tree(e in polynomial_expr(3), point in element(3)) {
        let p = e.to_polynomial().unwrap();
        prop_assert_eq!(p.eval_exact(&point), e.eval_exact(&point).unwrap());
        prop_assert!(p.terms().all(|(_, c)| !c.is_zero()));
    }

    #[test]
    fn polynomial_form_is_canonical(a in polynomial_expr(3), b in polynomial_expr(3)) {
        let (pa, pb) = (a.to_polynomial().unwrap(), b.to_polynomial().unwrap());
        let sum_ab = Expression::Sum(vec![a.clone(), b.clone()]).to_polynomial().unwrap();
        let sum_ba = Expression::Sum(vec![b, a]).to_polynomial().unwrap();
        prop_assert_eq!(&sum_ab, &sum_ba);
        prop_assert!((&sum_ab - &pb).eq(&pa));
        prop_assert!((&pa - &pa).is_empty());
    }

    #[test]
    fn derivative_commutes_with_normal_form(e in polynomial_expr(3), var in 0usize..3) {
        let direct = e.differentiate(var).to_polynomial().unwrap();
        prop_assert_eq!(direct, e.to_polynomial().unwrap().differentiate(var));
    }

    #[test]
    fn product_rule(a in polynomial_expr(2), b in polynomial_expr(2), point in element(2)) {
        let prod = Expression::Product(vec![a.clone(), b.clone()]);
        let lhs = prod.differentiate(0).eval_exact(&point).unwrap();
        let rhs = a.differentiate(0).eval_exact(&point).unwrap() * b.eval_exact(&point).unwrap()
            + a.eval_exact(&point).unwrap() * b.differentiate(0).eval_exact(&point).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn hat_map_is_a_homomorphism(alg in algebra(), a in polynomial_expr(2), b in polynomial_expr(2), p in element(4), r in element(4)) {
        let n = alg.dim();
        let point = vec![p[..n].to_vec(), r[..n].to_vec()];
        let ha = a.eval_algebra(&alg, &point).unwrap();
        let hb = b.eval_algebra(&alg, &point).unwrap();
        let prod = Expression::Product(vec![a.clone(), b.clone()]).eval_algebra(&alg, &point).unwrap();
        let sum = Expression::Sum(vec![a, b]).eval_algebra(&alg, &point).unwrap();
        prop_assert_eq!(prod, alg.multiply(&ha, &hb).unwrap());
        prop_assert_eq!(sum, ha.iter().zip(&hb).map(|(x, y)| x + y).collect::<Vec<_>>());
    }

    #[test]
    fn hat_map_restricts_to_scalars(a in polynomial_expr(2), x in rational(), y in rational(), alg in algebra()) {
        let n = alg.dim();
        let embed = |s: &Q| { let mut v = vec![Q::zero(); n]; v[0] = s.clone(); v };
        let hat = a.eval_algebra(&alg, &[embed(&x), embed(&y)]).unwrap();
        prop_assert_eq!(hat, embed(&a.eval_exact(&[x, y]).unwrap()));
    }

    #[test]
    fn lifted_metric_and_euler_factorize(base in manifold(), alg in algebra()) {
        let (m, n) = (base.dim(), alg.dim());
        let lifted = LiftedManifold::new(base.clone(), alg.clone()).unwrap();
        let eta = lifted.metric();
        for a in 0..m {
            for i in 0..n {
                for b in 0..m {
                    for j in 0..n {
                        prop_assert_eq!(&eta[a * n + i][b * n + j], &(&base.metric()[a][b] * &alg.eta()[i][j]));
                    }
                }
                let e = lifted.euler();
                prop_assert_eq!(&e.charges[a * n + i], &base.euler().charges[a]);
                let shift = if i == 0 { base.euler().shifts[a].clone() } else { Q::zero() };
                prop_assert_eq!(&e.shifts[a * n + i], &shift);
            }
        }
        prop_assert_eq!(&lifted.euler().dimension, &base.euler().dimension);
    }

    #[test]
    fn grid_is_uniform_and_periodic(length in 0.5f64..50.0, exponent in 1u32..11, other in 3usize..1000) {
        prop_assert_eq!(Grid::new(length, other).is_ok(), other.is_power_of_two());
        let points = 1usize << exponent;
        let g = Grid::new(length, points).unwrap();
        for j in 0..points {
            prop_assert!((g.x(j) - j as f64 * length / points as f64).abs() < 1e-12 * length);
        }
        prop_assert!((g.spacing() * points as f64 - length).abs() < 1e-12 * length);
    }

    #[test]
    fn inverse_derivative_is_zero_mean(amplitudes in prop::collection::vec(-1.0f64..1.0, 4), offset in -2.0f64..2.0) {
        let g = Grid::new(2.0 * std::f64::consts::PI, 64).unwrap();
        let f: Vec<f64> = (0..64).map(|j| {
            let x = g.x(j);
            offset + amplitudes.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).cos()).sum::<f64>()
        }).collect();
        let inv = g.inverse_derivative(&f);
        prop_assert!(g.mean(&inv).abs() < 1e-12);
        let back = g.derivative(&inv, 1);
        for (b, v) in back.iter().zip(&f) {
            prop_assert!((b - (v - offset)).abs() < 1e-10);
        }
    }
}

#[test]
fn casimir_densities_are_flat_coordinates_lowered() {
    for base in [FrobeniusManifold::cubic1d(), FrobeniusManifold::a2(), FrobeniusManifold::cp1()] {
        let m = base.dim();
        for sigma in 0..m {
            let Ok(table) = generate_densities(&base, sigma, 0) else { continue };
            let mut expected = PolynomialForm::zero();
            for beta in 0..m {
                expected.add_term(Monomial::var(beta), base.metric()[sigma][beta].clone());
            }
            assert_eq!(table.level(0), Some(&expected), "{} sigma {sigma}", base.label());
        }
    }
}

#[test]
fn first_operator_has_constant_metric_and_no_connection() {
    let alg = FrobeniusAlgebra::z2(&qr(1, 2), &Q::zero(), 2).unwrap();
    let h = Hierarchy::new(LiftedManifold::new(FrobeniusManifold::a2(), alg).unwrap(), 1).unwrap();
    let p1 = h.first_operator();
    let eta_inv = h.lifted().eta_inv();
    let d = p1.dim();
    for (i, row) in eta_inv.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            assert_eq!(p1.metric(i, j), &PolynomialForm::constant(entry.clone()));
            for k in 0..d {
                assert!(p1.christoffel(i, j, k).is_empty());
            }
        }
    }
}
