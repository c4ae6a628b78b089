//! Flow-level checks: conservation and commutativity of lifted hierarchies,
//! gradients against finite differences, and reduction to scalar equations.

use frobenius_lift::algebra::{seeded_rng, FrobeniusAlgebra};
use frobenius_lift::dispersive::{
    hamiltonian_flow, kdv_operators, mch_conserved_densities, mch_pair, mch_rhs, poisson_bracket, JetFunctional, MchSign,
};
use frobenius_lift::expr::parse;
use frobenius_lift::field::{smooth_random_field, FieldGrid, Grid};
use frobenius_lift::hierarchy::Hierarchy;
use frobenius_lift::integrate::{integrate, StepPlan};
use frobenius_lift::manifold::{FrobeniusManifold, LiftedManifold};
use frobenius_lift::operator::{directional_derivative, pairing, FieldOperator};
use frobenius_lift::scalar::{q, qr, Q};
use num_traits::Zero;

fn grid() -> Grid {
    Grid::new(2.0 * std::f64::consts::PI, 128).unwrap()
}

fn a2_hierarchy(eps: Q) -> Hierarchy {
    let alg = FrobeniusAlgebra::z2(&eps, &Q::zero(), 2).unwrap();
    Hierarchy::new(LiftedManifold::new(FrobeniusManifold::a2(), alg).unwrap(), 3).unwrap()
}

#[test]
fn hierarchy_gradient_matches_finite_differences() {
    let h = a2_hierarchy(qr(1, 3));
    let g = grid();
    let mut rng = seeded_rng(21);
    let state = smooth_random_field(&g, 2, 2, 0.5, 0.3, &mut rng);
    let dir = smooth_random_field(&g, 2, 2, 1.0, 0.0, &mut rng);
    for (level, sigma, r) in [(1, 0, 0), (2, 1, 1), (3, 0, 1), (3, 1, 0)] {
        let grad = h.variational_derivative(level, sigma, r, &state).unwrap();
        let exact = pairing(&g, &grad, dir.components());
        let fd = directional_derivative(
            |u| h.hamiltonian(level, sigma, r, &state.with_components(u.to_vec())).unwrap(),
            state.components(),
            dir.components(),
        );
        assert!((exact - fd).abs() < 1e-9 * (1.0 + exact.abs()), "{level} {sigma} {r}: {exact} vs {fd}");
    }
}

#[test]
fn lifted_hamiltonians_commute_under_both_operators() {
    let h = a2_hierarchy(q(1));
    let g = grid();
    let state = smooth_random_field(&g, 2, 2, 0.5, 0.2, &mut seeded_rng(22));
    let labels: Vec<(usize, usize, usize)> =
        (0..=3).flat_map(|n| (0..2).flat_map(move |s| (0..2).map(move |r| (n, s, r)))).collect();
    let grads: Vec<Vec<Vec<f64>>> =
        labels.iter().map(|&(n, s, r)| h.variational_derivative(n, s, r, &state).unwrap()).collect();
    for a in &grads {
        for b in &grads {
            let p1 = pairing(&g, a, &h.first_operator().apply(&g, state.components(), b));
            assert!(p1.abs() < 1e-10, "P1 bracket {p1}");
        }
    }
    // The second operator pairs densities one level below the top.
    for (a, la) in grads.iter().zip(&labels) {
        for (b, lb) in grads.iter().zip(&labels) {
            if la.0 < 3 && lb.0 < 3 {
                let p2 = pairing(&g, a, &h.second_operator().apply(&g, state.components(), b));
                assert!(p2.abs() < 1e-9, "P2 bracket {la:?} {lb:?}: {p2}");
            }
        }
    }
}

#[test]
fn commuting_flows_leave_only_stepping_error() {
    let h = a2_hierarchy(qr(-1, 2));
    let g = grid();
    let s0 = smooth_random_field(&g, 2, 2, 0.3, 0.5, &mut seeded_rng(23));
    let step = |s: &FieldGrid, flow: (usize, usize, usize), dt: f64| {
        let (n, sg, r) = flow;
        let plan = StepPlan::new(dt / 4.0, dt);
        integrate(&|x: &FieldGrid| h.flow(n, sg, r, x), s, &plan, &[]).unwrap().final_state
    };
    let (fa, fb) = ((2, 0, 1), (1, 1, 0));
    let commutator = |dt: f64| {
        let ab = step(&step(&s0, fa, dt), fb, dt);
        let ba = step(&step(&s0, fb, dt), fa, dt);
        ab.max_abs_diff(&ba)
    };
    let (c1, c2) = (commutator(1e-2), commutator(5e-3));
    // Commuting flows leave only the time-stepping error, which drops by
    // far more than the factor 4 a nonzero Lie bracket would give.
    assert!(c1 < 1e-9 && c2 < c1, "{c1} {c2}");
}

#[test]
fn monge_flow_is_the_algebra_burgers_equation() {
    let alg = FrobeniusAlgebra::zn(3, 0).unwrap();
    let h = Hierarchy::new(LiftedManifold::new(FrobeniusManifold::cubic1d(), alg.clone()).unwrap(), 2).unwrap();
    let g = grid();
    let u = smooth_random_field(&g, 1, 3, 0.4, 0.1, &mut seeded_rng(24));
    let flow = h.flow(2, 0, 0, &u).unwrap();
    let ux = u.derivative(1);
    let expected = frobenius_lift::field::algebra_product(&alg, u.components(), ux.components());
    let err = flow.components().iter().flatten().zip(expected.iter().flatten()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-10, "{err}");
}

/// Scalar KdV velocity written out by hand for the density
/// `½u_x² + u³` and the operator `−D`: `u_t = u_xxx − 6 u u_x`.
fn scalar_kdv(g: &Grid, u: &[f64]) -> Vec<f64> {
    let ux = g.derivative(u, 1);
    let uxxx = g.derivative(u, 3);
    (0..u.len()).map(|j| uxxx[j] - 6.0 * u[j] * ux[j]).collect()
}

#[test]
fn lifted_kdv_restricts_to_scalar_kdv_on_the_unit_line() {
    let g = grid();
    let density = parse("1/2*t2^2 + t1^3").unwrap();
    for alg in [FrobeniusAlgebra::z2(&q(1), &q(0), 1).unwrap(), FrobeniusAlgebra::zn(3, 0).unwrap()] {
        let n = alg.dim();
        let r = n - 1;
        let h = JetFunctional::new(density.clone(), 1, r).unwrap();
        let (h1, _) = kdv_operators(&alg);
        let base = smooth_random_field(&g, 1, 1, 0.5, 0.1, &mut seeded_rng(25));
        let mut comps = vec![vec![0.0; g.points()]; n];
        comps[0] = base.component(0, 0).to_vec();
        let u = FieldGrid::from_components(&g, 1, n, comps).unwrap();
        let flow = hamiltonian_flow(&alg, &h, &h1, &u).unwrap();
        let expected = scalar_kdv(&g, base.component(0, 0));
        // Data on the unit line flows along e_r times the scalar velocity.
        let er = alg.basis::<f64>(r);
        let oracle: Vec<Vec<f64>> =
            (0..n).map(|c| expected.iter().map(|v| v * er[c]).collect()).collect();
        let direct = h1.apply(&g, u.components(), &h.covector(&alg, &u).unwrap());
        let err = flow.components().iter().flatten().zip(oracle.iter().flatten()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "{}: {err}", alg.label());
        assert_eq!(flow.components(), &direct[..]);
    }
}

#[test]
fn mch_casimir_lies_in_the_kernel_of_the_first_operator() {
    let g = Grid::new(20.0, 128).unwrap();
    let alg = FrobeniusAlgebra::z2(&q(0), &q(0), 2).unwrap();
    let (c1, _) = mch_pair(&alg);
    let state = smooth_random_field(&g, 1, 2, 0.3, 0.0, &mut seeded_rng(26));
    let densities = mch_conserved_densities();
    for r in 0..2 {
        let casimir = JetFunctional::new(densities[0].1.clone(), 1, r).unwrap();
        for (_, d) in &densities {
            let other = JetFunctional::new(d.clone(), 1, 1 - r).unwrap();
            let b = poisson_bracket(&alg, &casimir, &other, &c1, &state).unwrap();
            assert!(b.abs() < 1e-10, "{b}");
        }
    }
}

#[test]
fn mch_conserves_its_densities_for_every_basis_index() {
    let g = Grid::new(20.0, 128).unwrap();
    let alg = FrobeniusAlgebra::z2(&q(0), &q(0), 2).unwrap();
    let state = smooth_random_field(&g, 1, 2, 0.2, 0.0, &mut seeded_rng(27));
    let v = mch_rhs(&alg, &state, MchSign::Printed).unwrap();
    for (name, d) in mch_conserved_densities() {
        for r in 0..2 {
            let f = JetFunctional::new(d.clone(), 1, r).unwrap();
            let grad = f.variational_derivative(&alg, &state).unwrap();
            // dH/dt = Σ ∫ ω(δĥ ∘ û_t) with the A-valued gradient.
            let rate: f64 = (0..g.points())
                .map(|j| alg.trace_f64(&alg.mul_f64(&grad.element(0, j), &v.element(0, j))))
                .sum::<f64>()
                * g.spacing();
            assert!(rate.abs() < 1e-12, "{name} r={r}: {rate}");
        }
    }
}

#[test]
fn poisson_bracket_is_antisymmetric() {
    let g = grid();
    let alg = FrobeniusAlgebra::zn(2, 1).unwrap();
    let (_, k2) = kdv_operators(&alg);
    let state = smooth_random_field(&g, 1, 2, 0.5, 0.2, &mut seeded_rng(28));
    let f = JetFunctional::new(parse("t1^3").unwrap(), 1, 0).unwrap();
    let h = JetFunctional::new(parse("1/2*t2^2 + t1^2*t2").unwrap(), 1, 1).unwrap();
    let fg = poisson_bracket(&alg, &f, &h, &k2, &state).unwrap();
    let gf = poisson_bracket(&alg, &h, &f, &k2, &state).unwrap();
    assert!((fg + gf).abs() < 1e-10 * (1.0 + fg.abs()), "{fg} {gf}");
}
