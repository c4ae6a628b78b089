//! Algebra-valued dispersive systems on a single field `v̂ = Σ v^i e_i`.
//!
//! Operators act on covectors `ξ_j` and return vector components; raising
//! uses the algebra metric, `ξ♯ = η^{ij}ξ_j e_i`. The lifted scalar
//! coefficients are `c_p^{ij} = η^{ia}c_{pa}^j` and the quartic tensor
//! `T^{ij}_{mn} = c_p^{ij}c_{mn}^p` that appears in the non-local operators.
//! `D⁻¹` is the mean-projected inverse derivative.

use std::fmt;

use rustfft::num_complex::Complex;
use thiserror::Error;

use crate::algebra::FrobeniusAlgebra;
use crate::expr::{ExprError, Expression};
use crate::field::{algebra_product, FieldGrid, Grid};
use crate::hierarchy::raised_constants;
use crate::operator::FieldOperator;
use crate::scalar::to_f64;

#[derive(Debug, Error, PartialEq)]
pub enum DispersiveError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("1 + D² is not invertible on this grid: |1 - k²| = {0:e} at a resolved wavenumber")]
    Resonant(f64),
    #[error("expected {expected} algebra-valued fields, found {found}")]
    Fields { expected: usize, found: usize },
    #[error("density arity {arity} is not a multiple of {fields} fields")]
    JetShape { arity: usize, fields: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersiveKind {
    KdvFirst,
    KdvSecond,
    MkdvFirst,
    MkdvSecond,
    MchFirst,
    MchSecond,
}

impl fmt::Display for DispersiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DispersiveKind::KdvFirst => "-D",
            DispersiveKind::KdvSecond => "-D^3 + 2uD + u_X",
            DispersiveKind::MkdvFirst => "D",
            DispersiveKind::MkdvSecond => "D^3 - D v D^-1 v D",
            DispersiveKind::MchFirst => "D^3 + D",
            DispersiveKind::MchSecond => "D v D^-1 v D",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct DispersiveOperator {
    kind: DispersiveKind,
    alg: FrobeniusAlgebra,
    eta_inv: Vec<f64>,
    /// `T^{ij}_{mn}` flattened `[i][j][m][n]`.
    quartic: Vec<f64>,
}

impl DispersiveOperator {
    pub fn new(kind: DispersiveKind, alg: &FrobeniusAlgebra) -> Self {
        let n = alg.dim();
        let raised = raised_constants(alg);
        let mut quartic = vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    for k in 0..n {
                        quartic[((i * n + j) * n + m) * n + k] = (0..n)
                            .map(|p| to_f64(&raised[(p * n + i) * n + j]) * to_f64(alg.structure_constant(m, k, p)))
                            .sum();
                    }
                }
            }
        }
        Self { kind, alg: alg.clone(), eta_inv: alg.eta_inv_f64().iter().flatten().copied().collect(), quartic }
    }

    pub fn kind(&self) -> DispersiveKind {
        self.kind
    }

    fn sharp(&self, xi: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.alg.dim();
        (0..n)
            .map(|i| {
                let mut out = vec![0.0; xi[0].len()];
                for (j, x) in xi.iter().enumerate() {
                    let w = self.eta_inv[i * n + j];
                    if w != 0.0 {
                        out.iter_mut().zip(x).for_each(|(o, v)| *o += w * v);
                    }
                }
                out
            })
            .collect()
    }

    /// `D[T^{ij}_{mn} v^m D⁻¹(v^n Dξ_j)]`.
    fn nonlocal(&self, grid: &Grid, v: &[Vec<f64>], xi: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.alg.dim();
        let points = grid.points();
        let dxi: Vec<Vec<f64>> = xi.iter().map(|x| grid.derivative(x, 1)).collect();
        // w[k][j] = D⁻¹(v^k Dξ_j)
        let w: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| grid.inverse_derivative(&v[k].iter().zip(&dxi[j]).map(|(a, b)| a * b).collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        (0..n)
            .map(|i| {
                let mut inner = vec![0.0; points];
                for j in 0..n {
                    for m in 0..n {
                        for k in 0..n {
                            let t = self.quartic[((i * n + j) * n + m) * n + k];
                            if t != 0.0 {
                                for p in 0..points {
                                    inner[p] += t * v[m][p] * w[k][j][p];
                                }
                            }
                        }
                    }
                }
                grid.derivative(&inner, 1)
            })
            .collect()
    }
}

fn combine(a: &[Vec<f64>], ca: f64, b: &[Vec<f64>], cb: f64) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| ca * p + cb * q).collect()).collect()
}

fn derive_all(grid: &Grid, f: &[Vec<f64>], order: u32) -> Vec<Vec<f64>> {
    f.iter().map(|x| grid.derivative(x, order)).collect()
}

impl FieldOperator for DispersiveOperator {
    fn components(&self) -> usize {
        self.alg.dim()
    }

    fn apply(&self, grid: &Grid, state: &[Vec<f64>], covector: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let s = self.sharp(covector);
        match self.kind {
            DispersiveKind::KdvFirst => derive_all(grid, &s, 1).into_iter().map(|d| d.iter().map(|x| -x).collect()).collect(),
            DispersiveKind::MkdvFirst => derive_all(grid, &s, 1),
            DispersiveKind::MchFirst => combine(&derive_all(grid, &s, 3), 1.0, &derive_all(grid, &s, 1), 1.0),
            DispersiveKind::KdvSecond => {
                let ds = derive_all(grid, &s, 1);
                let ux = derive_all(grid, state, 1);
                let a = algebra_product(&self.alg, state, &ds);
                let b = algebra_product(&self.alg, &ux, &s);
                let local = combine(&a, 2.0, &b, 1.0);
                combine(&derive_all(grid, &s, 3), -1.0, &local, 1.0)
            }
            DispersiveKind::MkdvSecond => {
                combine(&derive_all(grid, &s, 3), 1.0, &self.nonlocal(grid, state, covector), -1.0)
            }
            DispersiveKind::MchSecond => self.nonlocal(grid, state, covector),
        }
    }
}

/// `(−D, −D³ + 2û∘D + û_X∘)`.
pub fn kdv_operators(alg: &FrobeniusAlgebra) -> (DispersiveOperator, DispersiveOperator) {
    (DispersiveOperator::new(DispersiveKind::KdvFirst, alg), DispersiveOperator::new(DispersiveKind::KdvSecond, alg))
}

/// `(η D, η D³ − T D v D⁻¹ v D)`.
pub fn mkdv_operators(alg: &FrobeniusAlgebra) -> (DispersiveOperator, DispersiveOperator) {
    (DispersiveOperator::new(DispersiveKind::MkdvFirst, alg), DispersiveOperator::new(DispersiveKind::MkdvSecond, alg))
}

/// `(η(D³ + D), T D v D⁻¹ v D)`.
pub fn mch_pair(alg: &FrobeniusAlgebra) -> (DispersiveOperator, DispersiveOperator) {
    (DispersiveOperator::new(DispersiveKind::MchFirst, alg), DispersiveOperator::new(DispersiveKind::MchSecond, alg))
}

fn single_field(state: &FieldGrid) -> Result<(), DispersiveError> {
    if state.fields() != 1 {
        return Err(DispersiveError::Fields { expected: 1, found: state.fields() });
    }
    Ok(())
}

/// `û = −v̂_x + ½ v̂∘v̂`.
pub fn miura(alg: &FrobeniusAlgebra, v: &FieldGrid) -> Result<FieldGrid, DispersiveError> {
    single_field(v)?;
    let vx = v.derivative(1);
    let sq = algebra_product(alg, v.components(), v.components());
    Ok(v.with_components(combine(vx.components(), -1.0, &sq, 0.5)))
}

/// Largest entry of `(−D + v̂∘) D (D + v̂∘) ŵ − H₂(û) ŵ` with `û = miura(v̂)`,
/// where `H₂` is the lifted second KdV operator applied to the covector of `ŵ`.
pub fn miura_operator_identity_check(
    alg: &FrobeniusAlgebra,
    v: &FieldGrid,
    w: &FieldGrid,
) -> Result<f64, DispersiveError> {
    single_field(v)?;
    single_field(w)?;
    let grid = v.grid();
    let vc = v.components();
    let wc = w.components();
    let inner = combine(&derive_all(grid, wc, 1), 1.0, &algebra_product(alg, vc, wc), 1.0);
    let mid = derive_all(grid, &inner, 1);
    let lhs = combine(&derive_all(grid, &mid, 1), -1.0, &algebra_product(alg, vc, &mid), 1.0);
    let u = miura(alg, v)?;
    let eta = alg.eta_f64();
    let n = alg.dim();
    let flat: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..grid.points()).map(|p| (0..n).map(|i| eta[j][i] * wc[i][p]).sum()).collect())
        .collect();
    let (_, h2) = kdv_operators(alg);
    let rhs = h2.apply(grid, u.components(), &flat);
    Ok(lhs.iter().flatten().zip(rhs.iter().flatten()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Left-hand side convention of the modified Camassa–Holm equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MchSign {
    /// `v_T + v_XXT`, inverted by the symbol `1 − k²`.
    #[default]
    Printed,
    /// `v_T − v_XXT`, inverted by `1 + k²`.
    Flipped,
}

/// Smallest `|symbol|` over resolved modes; guards the inversion of `1 ± D²`.
pub fn mch_resonance_gap(grid: &Grid, sign: MchSign) -> f64 {
    grid.wavenumbers()
        .iter()
        .map(|k| match sign {
            MchSign::Printed => (1.0 - k * k).abs(),
            MchSign::Flipped => 1.0 + k * k,
        })
        .fold(f64::INFINITY, f64::min)
}

/// The six-term right-hand side before inverting `1 ± D²`:
/// `½v₃v₁v₁ + v₂v₂v₁ + ½v₃vv + 2v₂v₁v + ½v₁³ + (3/2)v₁vv`, subscripts
/// counting `X`-derivatives and all products in the algebra.
pub fn mch_forcing(alg: &FrobeniusAlgebra, v: &FieldGrid) -> Result<Vec<Vec<f64>>, DispersiveError> {
    single_field(v)?;
    let v0 = v.components();
    let v1 = v.derivative(1);
    let v2 = v.derivative(2);
    let v3 = v.derivative(3);
    let (v1, v2, v3) = (v1.components(), v2.components(), v3.components());
    let p = |a: &[Vec<f64>], b: &[Vec<f64>], c: &[Vec<f64>]| algebra_product(alg, &algebra_product(alg, a, b), c);
    let terms = [
        (0.5, p(v3, v1, v1)),
        (1.0, p(v2, v2, v1)),
        (0.5, p(v3, v0, v0)),
        (2.0, p(v2, v1, v0)),
        (0.5, p(v1, v1, v1)),
        (1.5, p(v1, v0, v0)),
    ];
    let mut out = vec![vec![0.0; v.grid().points()]; alg.dim()];
    for (c, t) in &terms {
        out = combine(&out, 1.0, t, *c);
    }
    Ok(out)
}

/// `v̂_T = (1 ± D²)⁻¹` applied to [`mch_forcing`].
pub fn mch_rhs(alg: &FrobeniusAlgebra, v: &FieldGrid, sign: MchSign) -> Result<FieldGrid, DispersiveError> {
    let grid = v.grid();
    let gap = mch_resonance_gap(grid, sign);
    if gap < 1e-8 {
        return Err(DispersiveError::Resonant(gap));
    }
    let forcing = mch_forcing(alg, v)?;
    let s = match sign {
        MchSign::Printed => -1.0,
        MchSign::Flipped => 1.0,
    };
    let out = forcing
        .iter()
        .map(|f| grid.apply_multiplier(f, |k| Complex::new(1.0 / (1.0 + s * k * k), 0.0)))
        .collect();
    Ok(v.with_components(out))
}

/// Scalar densities conserved by the scalar modified Camassa–Holm flow, in
/// jet variables `(v, v_x)`: the Casimir `v`, then `½(v² − v_x²)` and
/// `¼(v⁴ − 2v²v_x² − v_x⁴/3)`.
pub fn mch_conserved_densities() -> Vec<(&'static str, Expression)> {
    [
        ("casimir", "t1"),
        ("quadratic", "1/2*t1^2 - 1/2*t2^2"),
        ("quartic", "1/4*t1^4 - 1/2*t1^2*t2^2 - 1/12*t2^4"),
    ]
    .into_iter()
    .map(|(name, text)| (name, crate::expr::parse(text).expect("built-in density")))
    .collect()
}

/// `H[û] = ∫ ω(ĥ(û, û_x, …) ∘ e_r) dX` for a density in jet variables:
/// variable `α + m·k` is the `k`-th `X`-derivative of field `α`.
#[derive(Debug, Clone)]
pub struct JetFunctional {
    density: Expression,
    fields: usize,
    order: usize,
    r: usize,
    partials: Vec<Expression>,
}

impl JetFunctional {
    pub fn new(density: Expression, fields: usize, r: usize) -> Result<Self, DispersiveError> {
        let arity = density.arity().max(1);
        if fields == 0 {
            return Err(DispersiveError::JetShape { arity, fields });
        }
        let jets = arity.div_ceil(fields);
        let partials = (0..jets * fields).map(|v| density.differentiate(v)).collect();
        Ok(Self { density, fields, order: jets - 1, r, partials })
    }

    pub fn density(&self) -> &Expression {
        &self.density
    }

    pub fn basis_index(&self) -> usize {
        self.r
    }

    fn check(&self, state: &FieldGrid) -> Result<(), DispersiveError> {
        if state.fields() != self.fields {
            return Err(DispersiveError::Fields { expected: self.fields, found: state.fields() });
        }
        Ok(())
    }

    /// Jet of the state: `[k][α]` holds `∂^k` of field `α` as components.
    fn jet(&self, state: &FieldGrid) -> Vec<FieldGrid> {
        (0..=self.order).map(|k| state.derivative(k as u32)).collect()
    }

    fn point(&self, jet: &[FieldGrid], j: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(jet.len() * self.fields);
        for d in jet {
            for a in 0..self.fields {
                out.push(d.element(a, j));
            }
        }
        out
    }

    /// Pointwise `ω(ĥ ∘ e_r)`.
    pub fn density_field(&self, alg: &FrobeniusAlgebra, state: &FieldGrid) -> Result<Vec<f64>, DispersiveError> {
        self.check(state)?;
        let jet = self.jet(state);
        let er = alg.basis::<f64>(self.r);
        (0..state.grid().points())
            .map(|j| {
                let h = self.density.eval_algebra(alg, &self.point(&jet, j))?;
                Ok(alg.trace_f64(&alg.mul_f64(&h, &er)))
            })
            .collect()
    }

    pub fn value(&self, alg: &FrobeniusAlgebra, state: &FieldGrid) -> Result<f64, DispersiveError> {
        Ok(state.grid().integrate(&self.density_field(alg, state)?))
    }

    /// Algebra-valued `δH/δû^β = Σ_k (−D)^k (∂h/∂u^β_k)^∧ ∘ e_r`, as a state
    /// shaped like the input.
    pub fn variational_derivative(&self, alg: &FrobeniusAlgebra, state: &FieldGrid) -> Result<FieldGrid, DispersiveError> {
        self.check(state)?;
        let n = alg.dim();
        let grid = state.grid();
        let points = grid.points();
        let jet = self.jet(state);
        let er = alg.basis::<f64>(self.r);
        let mut out = vec![vec![0.0; points]; self.fields * n];
        for k in 0..=self.order {
            for beta in 0..self.fields {
                let partial = &self.partials[beta + self.fields * k];
                if partial.is_constant() && partial.as_const().is_some_and(num_traits::Zero::is_zero) {
                    continue;
                }
                let mut y = vec![vec![0.0; points]; n];
                for j in 0..points {
                    let x = alg.mul_f64(&partial.eval_algebra(alg, &self.point(&jet, j))?, &er);
                    for i in 0..n {
                        y[i][j] = x[i];
                    }
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                for i in 0..n {
                    let d = grid.derivative(&y[i], k as u32);
                    out[beta * n + i].iter_mut().zip(d).for_each(|(o, v)| *o += sign * v);
                }
            }
        }
        Ok(state.with_components(out))
    }

    /// Component covector `ξ_(βj) = ω(δH/δû^β ∘ e_j)`.
    pub fn covector(&self, alg: &FrobeniusAlgebra, state: &FieldGrid) -> Result<Vec<Vec<f64>>, DispersiveError> {
        let x = self.variational_derivative(alg, state)?;
        let n = alg.dim();
        let eta = alg.eta_f64();
        let points = state.grid().points();
        let mut out = vec![vec![0.0; points]; self.fields * n];
        for beta in 0..self.fields {
            for j in 0..n {
                for i in 0..n {
                    let w = eta[i][j];
                    if w != 0.0 {
                        let src = x.component(beta, i);
                        out[beta * n + j].iter_mut().zip(src).for_each(|(o, v)| *o += w * v);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `{F, G} = ∫ Σ ξ^G · P(ξ^F) dX` with the component covectors of both
/// functionals.
pub fn poisson_bracket<P: FieldOperator + ?Sized>(
    alg: &FrobeniusAlgebra,
    f: &JetFunctional,
    g: &JetFunctional,
    op: &P,
    state: &FieldGrid,
) -> Result<f64, DispersiveError> {
    let xf = f.covector(alg, state)?;
    let xg = g.covector(alg, state)?;
    let pf = op.apply(state.grid(), state.components(), &xf);
    Ok(crate::operator::pairing(state.grid(), &xg, &pf))
}

/// Flow generated by `H` through `P`: `∂û/∂T = P(û) ξ^H`.
pub fn hamiltonian_flow<P: FieldOperator + ?Sized>(
    alg: &FrobeniusAlgebra,
    h: &JetFunctional,
    op: &P,
    state: &FieldGrid,
) -> Result<FieldGrid, DispersiveError> {
    let xi = h.covector(alg, state)?;
    Ok(state.with_components(op.apply(state.grid(), state.components(), &xi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::seeded_rng;
    use crate::expr::parse;
    use crate::field::smooth_random_field;
    use crate::operator::skew_adjointness_defect;
    use crate::scalar::q;

    fn grid() -> Grid {
        Grid::new(2.0 * std::f64::consts::PI, 128).unwrap()
    }

    fn random(grid: &Grid, comps: usize, seed: u64) -> FieldGrid {
        smooth_random_field(grid, 1, comps, 0.8, 0.3, &mut seeded_rng(seed))
    }

    #[test]
    fn all_operators_are_skew() {
        let g = grid();
        for alg in [FrobeniusAlgebra::trivial(), FrobeniusAlgebra::z2(&q(0), &q(0), 2).unwrap(), FrobeniusAlgebra::zn(3, 0).unwrap()] {
            let n = alg.dim();
            let (k1, k2) = kdv_operators(&alg);
            let (m1, m2) = mkdv_operators(&alg);
            let (c1, c2) = mch_pair(&alg);
            for op in [k1, k2, m1, m2, c1, c2] {
                let u = random(&g, n, 1);
                let a = random(&g, n, 2);
                let b = random(&g, n, 3);
                let d = skew_adjointness_defect(&op, &g, u.components(), a.components(), b.components());
                assert!(d < 1e-10, "{} on {}: {d}", op.kind(), alg.label());
            }
        }
    }

    #[test]
    fn operators_at_zero_state() {
        let g = grid();
        let alg = FrobeniusAlgebra::z2(&q(1), &q(0), 2).unwrap();
        let zero = FieldGrid::zeros(&g, 1, 2);
        let xi = random(&g, 2, 4);
        let (_, m2) = mkdv_operators(&alg);
        let (_, k2) = kdv_operators(&alg);
        let sharp = m2.sharp(xi.components());
        let d3 = derive_all(&g, &sharp, 3);
        let a = m2.apply(&g, zero.components(), xi.components());
        let b = k2.apply(&g, zero.components(), xi.components());
        for i in 0..2 {
            for p in 0..g.points() {
                assert!((a[i][p] - d3[i][p]).abs() < 1e-12);
                assert!((b[i][p] + d3[i][p]).abs() < 1e-12);
            }
        }
        let (c1, _) = mch_pair(&alg);
        let constant = FieldGrid::from_fn(&g, 1, 2, |_, _, c| 1.0 + c as f64);
        assert!(c1.apply(&g, xi.components(), constant.components()).iter().flatten().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn scalar_mkdv_second_operator() {
        // D³ξ − D(v D⁻¹(v Dξ)) written out directly.
        let g = grid();
        let v = random(&g, 1, 5);
        let xi = random(&g, 1, 6);
        let (_, m2) = mkdv_operators(&FrobeniusAlgebra::trivial());
        let got = m2.apply(&g, v.components(), xi.components());
        let vv = v.component(0, 0);
        let dx = g.derivative(xi.component(0, 0), 1);
        let inner = g.inverse_derivative(&vv.iter().zip(&dx).map(|(a, b)| a * b).collect::<Vec<_>>());
        let outer = g.derivative(&vv.iter().zip(&inner).map(|(a, b)| a * b).collect::<Vec<_>>(), 1);
        let d3 = g.derivative(xi.component(0, 0), 3);
        for p in 0..g.points() {
            assert!((got[0][p] - (d3[p] - outer[p])).abs() < 1e-10);
        }
    }

    #[test]
    fn miura_examples() {
        let g = grid();
        let alg = FrobeniusAlgebra::trivial();
        let v = FieldGrid::from_fn(&g, 1, 1, |x, _, _| x.sin());
        let u = miura(&alg, &v).unwrap();
        for p in 0..g.points() {
            let x = g.x(p);
            assert!((u.component(0, 0)[p] - (-x.cos() + 0.5 * x.sin().powi(2))).abs() < 1e-12);
        }
        let z3 = FrobeniusAlgebra::zn(3, 0).unwrap();
        let c = FieldGrid::from_fn(&g, 1, 3, |_, _, i| [0.5, 1.0, -2.0][i]);
        let uc = miura(&z3, &c).unwrap();
        let half_sq = z3.mul_f64(&[0.5, 1.0, -2.0], &[0.5, 1.0, -2.0]);
        for i in 0..3 {
            assert!(uc.component(0, i).iter().all(|x| (x - 0.5 * half_sq[i]).abs() < 1e-12));
        }
        let w = random(&g, 1, 7);
        let twice = miura(&alg, &w.scaled(2.0)).unwrap();
        assert!(twice.max_abs_diff(&miura(&alg, &w).unwrap().scaled(2.0)) > 1e-3);
    }

    #[test]
    fn miura_conjugation() {
        let g = Grid::new(2.0 * std::f64::consts::PI, 256).unwrap();
        for alg in [FrobeniusAlgebra::trivial(), FrobeniusAlgebra::z2(&q(1), &q(0), 2).unwrap()] {
            let n = alg.dim();
            let v = random(&g, n, 8);
            let w = random(&g, n, 9);
            assert!(miura_operator_identity_check(&alg, &v, &w).unwrap() < 1e-8);
            let zero = FieldGrid::zeros(&g, 1, n);
            assert!(miura_operator_identity_check(&alg, &zero, &w).unwrap() < 1e-10);
        }
    }

    #[test]
    fn mch_scalar_forcing_is_a_total_derivative() {
        // ½D[(v + v_xx)(v² + v_x²)] expands to the six terms.
        let g = Grid::new(20.0, 256).unwrap();
        let v = smooth_random_field(&g, 1, 1, 0.3, 0.1, &mut seeded_rng(11));
        let got = mch_forcing(&FrobeniusAlgebra::trivial(), &v).unwrap();
        let a = v.component(0, 0);
        let ax = g.derivative(a, 1);
        let axx = g.derivative(a, 2);
        let prod: Vec<f64> = (0..g.points()).map(|p| 0.5 * (a[p] + axx[p]) * (a[p] * a[p] + ax[p] * ax[p])).collect();
        let expect = g.derivative(&prod, 1);
        for p in 0..g.points() {
            assert!((got[0][p] - expect[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn mch_resonance_is_rejected() {
        let alg = FrobeniusAlgebra::trivial();
        let g = Grid::new(2.0 * std::f64::consts::PI, 32).unwrap();
        let v = FieldGrid::from_fn(&g, 1, 1, |x, _, _| x.sin());
        assert!(matches!(mch_rhs(&alg, &v, MchSign::Printed), Err(DispersiveError::Resonant(_))));
        assert!(mch_rhs(&alg, &v, MchSign::Flipped).is_ok());
        let zero = FieldGrid::zeros(&Grid::new(20.0, 32).unwrap(), 1, 1);
        assert_eq!(mch_rhs(&alg, &zero, MchSign::Printed).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn functional_examples() {
        let g = grid();
        let alg = FrobeniusAlgebra::zn(2, 0).unwrap();
        let zero_mean = FieldGrid::from_fn(&g, 1, 2, |x, _, c| (x + c as f64).sin());
        let lin = JetFunctional::new(parse("t1").unwrap(), 1, 0).unwrap();
        assert!(lin.value(&alg, &zero_mean).unwrap().abs() < 1e-12);
        // Z2 with ω(a) = a1 + a2: ω(U∘U) = a1² + 2a1a2 for U = (a1, a2).
        let h1 = JetFunctional::new(parse("1/2*t1^2").unwrap(), 1, 0).unwrap();
        let a = FieldGrid::from_fn(&g, 1, 2, |x, _, c| if c == 0 { 1.0 } else { x.cos() });
        assert!((h1.value(&alg, &a).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        let b = FieldGrid::from_fn(&g, 1, 2, |x, _, c| if c == 0 { x.cos() } else { 1.0 });
        assert!((h1.value(&alg, &b).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let sum = JetFunctional::new(parse("1/2*t1^2 + t1").unwrap(), 1, 0).unwrap();
        let v = random(&g, 2, 12);
        let lhs = sum.value(&alg, &v).unwrap();
        assert!((lhs - h1.value(&alg, &v).unwrap() - lin.value(&alg, &v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn variational_derivative_matches_directional_difference() {
        let g = grid();
        let alg = FrobeniusAlgebra::z2(&q(1), &q(1), 1).unwrap();
        let h = JetFunctional::new(parse("1/4*t1^4 - 1/2*t1^2*t2^2 + t2^3*t1").unwrap(), 1, 1).unwrap();
        let u = random(&g, 2, 13);
        let dir = random(&g, 2, 14);
        let x = h.variational_derivative(&alg, &u).unwrap();
        let pairing: Vec<f64> = (0..g.points())
            .map(|p| alg.trace_f64(&alg.mul_f64(&x.element(0, p), &dir.element(0, p))))
            .collect();
        let analytic = g.integrate(&pairing);
        let fd = crate::operator::directional_derivative(
            |w| h.value(&alg, &u.with_components(w.to_vec())).unwrap(),
            u.components(),
            dir.components(),
        );
        assert!((analytic - fd).abs() < 1e-6 * analytic.abs().max(1.0), "{analytic} {fd}");
    }

    #[test]
    fn brackets_are_skew_and_casimirs_are_central() {
        let g = grid();
        let alg = FrobeniusAlgebra::z2(&q(2), &q(0), 2).unwrap();
        let u = random(&g, 2, 15);
        let f = JetFunctional::new(parse("1/3*t1^3 + 1/2*t2^2").unwrap(), 1, 0).unwrap();
        let gg = JetFunctional::new(parse("t1^2*t2").unwrap(), 1, 1).unwrap();
        let (m1, m2) = mkdv_operators(&alg);
        for op in [&m1, &m2] {
            let fg = poisson_bracket(&alg, &f, &gg, op, &u).unwrap();
            let gf = poisson_bracket(&alg, &gg, &f, op, &u).unwrap();
            assert!((fg + gf).abs() < 1e-10 * fg.abs().max(1.0));
            assert!(poisson_bracket(&alg, &f, &f, op, &u).unwrap().abs() < 1e-10);
        }
        for r in 0..2 {
            let casimir = JetFunctional::new(parse("t1").unwrap(), 1, r).unwrap();
            assert!(poisson_bracket(&alg, &casimir, &f, &m1, &u).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn lifted_kdv_flow_is_lifted_right_hand_side() {
        // H = ∫(½u_x² + u³) through −D gives u_T = u_xxx − 6uu_x; the lift
        // with basis index r gives (û_xxx − 6û∘û_x)∘e_r.
        let g = grid();
        let alg = FrobeniusAlgebra::zn(3, 0).unwrap();
        let (k1, _) = kdv_operators(&alg);
        let u = random(&g, 3, 16);
        for r in 0..3 {
            let h = JetFunctional::new(parse("1/2*t2^2 + t1^3").unwrap(), 1, r).unwrap();
            let flow = hamiltonian_flow(&alg, &h, &k1, &u).unwrap();
            let uxxx = u.derivative(3);
            let prod = algebra_product(&alg, u.components(), u.derivative(1).components());
            let k = combine(uxxx.components(), 1.0, &prod, -6.0);
            let er: Vec<Vec<f64>> = (0..3).map(|i| vec![if i == r { 1.0 } else { 0.0 }; g.points()]).collect();
            let expect = algebra_product(&alg, &k, &er);
            let diff = flow.components().iter().flatten().zip(expect.iter().flatten()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-10, "r = {r}: {diff}");
        }
    }
}
