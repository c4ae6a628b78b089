//! Principal hierarchy of hydrodynamic type.
//!
//! Densities `h_{N,σ}` of a polynomial Frobenius manifold are generated by
//! the deformed-flatness recursion `∂_a∂_b h_N = c_ab^μ ∂_μ h_{N-1}` with
//! `h_{0,σ} = η_σβ t^β`. Every `h_N` with `N ≥ 1` is normalized to contain no
//! terms of degree below two, which forces `∂_1 h_N = h_{N-1}` whenever `t¹`
//! is the unity direction.
//!
//! Indices `σ` and `r` are 0-based throughout this module.

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::{AlgebraError, FrobeniusAlgebra};
use crate::expr::{CompiledPolynomial, ExprError, Expression, Monomial, PolynomialForm};
use crate::field::{FieldError, FieldGrid, Grid};
use crate::linalg::QMatrix;
use crate::manifold::{EulerData, FrobeniusManifold, LiftedManifold, ManifoldError};
use crate::operator::FieldOperator;
use crate::scalar::{q, qr, to_f64, Ring, Q};

#[derive(Debug, Error, PartialEq)]
pub enum HierarchyError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("prepotential contains exp; densities need a polynomial prepotential")]
    NotPolynomial,
    #[error("recursion has no polynomial solution at level {level} for primary index {sigma}")]
    Inconsistent { level: usize, sigma: usize },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("flow routes disagree by {0:e}")]
    RoutesDisagree(f64),
    #[error("normalization constant vanishes for level {level}, primary index {sigma}")]
    Resonant { level: usize, sigma: usize },
    #[error("state shape {found:?} does not match {expected:?}")]
    Shape { expected: (usize, usize), found: (usize, usize) },
}

/// `c_ab^k = F_abν η^{νk}`, flattened `[a][b][k]`.
pub fn structure_polynomials(f: &PolynomialForm, eta_inv: &QMatrix) -> Vec<PolynomialForm> {
    let dim = eta_inv.len();
    let mut out = vec![PolynomialForm::zero(); dim.pow(3)];
    for a in 0..dim {
        let fa = f.differentiate(a);
        for b in 0..dim {
            let fab = fa.differentiate(b);
            for nu in 0..dim {
                let fabn = fab.differentiate(nu);
                if fabn.is_zero() {
                    continue;
                }
                for k in 0..dim {
                    if !eta_inv[nu][k].is_zero() {
                        let slot = &mut out[(a * dim + b) * dim + k];
                        *slot = &*slot + &fabn.scale(&eta_inv[nu][k]);
                    }
                }
            }
        }
    }
    out
}

/// Densities `h_{0,σ}, …, h_{N_max,σ}` for one primary index.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub sigma: usize,
    pub levels: Vec<PolynomialForm>,
}

impl DensityTable {
    pub fn level(&self, n: usize) -> Option<&PolynomialForm> {
        self.levels.get(n)
    }

    /// Canonical strings, one per level.
    pub fn to_strings(&self, names: &[&str]) -> Vec<String> {
        self.levels.iter().map(|h| h.format_with(names)).collect()
    }
}

/// Hessian of `h` as exact polynomials, flattened `[a][b]`.
fn hessian(h: &PolynomialForm, dim: usize) -> Vec<PolynomialForm> {
    let grad: Vec<PolynomialForm> = (0..dim).map(|a| h.differentiate(a)).collect();
    (0..dim * dim).map(|ab| grad[ab / dim].differentiate(ab % dim)).collect()
}

/// `R_ab = c_ab^μ ∂_μ g`, flattened `[a][b]`.
fn contracted_gradient(c: &[PolynomialForm], g: &PolynomialForm, dim: usize) -> Vec<PolynomialForm> {
    let grad: Vec<PolynomialForm> = (0..dim).map(|mu| g.differentiate(mu)).collect();
    (0..dim * dim)
        .map(|ab| {
            let mut acc = PolynomialForm::zero();
            for (mu, gm) in grad.iter().enumerate() {
                let cab = &c[ab * dim + mu];
                if !cab.is_zero() && !gm.is_zero() {
                    acc = &acc + &(cab * gm);
                }
            }
            acc
        })
        .collect()
}

/// The unique polynomial without terms of degree below two whose Hessian is
/// `r`, if one exists. For a homogeneous `H` of degree `d`,
/// `t^a t^b ∂_a∂_b H = d(d-1) H`, so each term of `r_ab` of degree `e`
/// contributes `t^a t^b · term / ((e+2)(e+1))`.
fn integrate_hessian(r: &[PolynomialForm], dim: usize) -> Option<PolynomialForm> {
    let mut h = PolynomialForm::zero();
    for a in 0..dim {
        for b in 0..dim {
            for (m, c) in r[a * dim + b].terms() {
                let e = i64::from(m.degree());
                let mut exps: Vec<u32> = m.exponents().to_vec();
                exps.resize(dim.max(exps.len()), 0);
                exps[a] += 1;
                exps[b] += 1;
                h.add_term(Monomial::new(exps), c * qr(1, (e + 2) * (e + 1)));
            }
        }
    }
    (hessian(&h, dim) == r).then_some(h)
}

pub fn generate_densities(m: &FrobeniusManifold, sigma: usize, n_max: usize) -> Result<DensityTable, HierarchyError> {
    let dim = m.eta_inv().len();
    if sigma >= dim {
        return Err(HierarchyError::Index(format!("primary index {sigma} for a {dim}-dimensional manifold")));
    }
    let f = m.polynomial().ok_or(HierarchyError::NotPolynomial)?;
    let c = structure_polynomials(f, m.eta_inv());
    generate_with_structure(&c, crate::manifold::Prepotential::metric(m), sigma, n_max)
}

fn generate_with_structure(
    c: &[PolynomialForm],
    eta: &QMatrix,
    sigma: usize,
    n_max: usize,
) -> Result<DensityTable, HierarchyError> {
    let dim = eta.len();
    let mut h0 = PolynomialForm::zero();
    for (beta, e) in eta[sigma].iter().enumerate() {
        h0.add_term(Monomial::var(beta), e.clone());
    }
    let mut levels = vec![h0];
    for level in 1..=n_max {
        let r = contracted_gradient(c, &levels[level - 1], dim);
        let h = integrate_hessian(&r, dim).ok_or(HierarchyError::Inconsistent { level, sigma })?;
        levels.push(h);
    }
    Ok(DensityTable { sigma, levels })
}

/// `t̂^α = Σ_i t^{(αi)} e_i` with polynomial coordinates.
fn polynomial_hat_point(m: usize, n: usize) -> Vec<Vec<PolynomialForm>> {
    (0..m).map(|a| (0..n).map(|i| PolynomialForm::var(a * n + i)).collect()).collect()
}

/// `𝔥 = ω(ĥ ∘ e_r)` as a polynomial in the flattened lifted coordinates.
pub fn lift_density(
    h: &PolynomialForm,
    m: usize,
    r: usize,
    alg: &FrobeniusAlgebra,
) -> Result<PolynomialForm, HierarchyError> {
    let n = alg.dim();
    if r >= n {
        return Err(HierarchyError::Index(format!("basis index {r} for a {n}-dimensional algebra")));
    }
    let hat = h.to_expression().eval_algebra(alg, &polynomial_hat_point(m, n))?;
    Ok(alg.trace(&alg.mul_unchecked(&hat, &alg.basis(r))))
}

/// `𝔥 = ω(ĥ ∘ e_r)` at a numerical lifted point.
pub fn lift_density_value(h: &Expression, m: usize, r: usize, alg: &FrobeniusAlgebra, t: &[f64]) -> Result<f64, HierarchyError> {
    let n = alg.dim();
    let point: Vec<Vec<f64>> = (0..m).map(|a| t[a * n..(a + 1) * n].to_vec()).collect();
    let hat = h.eval_algebra(alg, &point)?;
    Ok(alg.trace_f64(&alg.mul_f64(&hat, &alg.basis(r))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HydroKind {
    First,
    Second,
    BalinskiNovikov,
    PolynomialLift,
    Recursion(usize),
    Custom,
}

impl fmt::Display for HydroKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HydroKind::First => write!(f, "P1"),
            HydroKind::Second => write!(f, "P2"),
            HydroKind::BalinskiNovikov => write!(f, "BalinskiNovikov"),
            HydroKind::PolynomialLift => write!(f, "polynomial-lift"),
            HydroKind::Recursion(n) => write!(f, "recursion-{n}"),
            HydroKind::Custom => write!(f, "custom"),
        }
    }
}

/// `(Pξ)^i = g^{ij}(u) ξ_{j,X} + Γ^{ij}_k(u) u^k_X ξ_j`.
#[derive(Debug, Clone)]
pub struct HydroOperator {
    kind: HydroKind,
    dim: usize,
    g: Vec<PolynomialForm>,
    gamma: Vec<PolynomialForm>,
    g_fast: Vec<CompiledPolynomial>,
    gamma_fast: Vec<CompiledPolynomial>,
}

/// `c_k^{ij} = η^{ia} c_{ka}^j`, flattened `[k][i][j]`.
pub(crate) fn raised_constants(alg: &FrobeniusAlgebra) -> Vec<Q> {
    let n = alg.dim();
    let eta_inv = alg.eta_inv();
    let mut out = vec![Q::zero(); n.pow(3)];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                out[(k * n + i) * n + j] =
                    (0..n).fold(Q::zero(), |acc, a| acc + &eta_inv[i][a] * alg.structure_constant(k, a, j));
            }
        }
    }
    out
}

fn constant_matrix(m: &QMatrix) -> Vec<PolynomialForm> {
    m.iter().flatten().map(|c| PolynomialForm::constant(c.clone())).collect()
}

fn add_scaled(slot: &mut PolynomialForm, p: &PolynomialForm, c: &Q) {
    if !c.is_zero() && !p.is_zero() {
        *slot = &*slot + &p.scale(c);
    }
}

impl HydroOperator {
    /// `g` flattened `[i][j]`, `gamma` flattened `[i][j][k]` for `Γ^{ij}_k`.
    pub fn from_parts(
        kind: HydroKind,
        dim: usize,
        g: Vec<PolynomialForm>,
        gamma: Vec<PolynomialForm>,
    ) -> Result<Self, HierarchyError> {
        if g.len() != dim * dim || gamma.len() != dim.pow(3) {
            return Err(HierarchyError::Shape { expected: (dim * dim, dim.pow(3)), found: (g.len(), gamma.len()) });
        }
        Ok(Self {
            g_fast: g.iter().map(PolynomialForm::compile).collect(),
            gamma_fast: gamma.iter().map(PolynomialForm::compile).collect(),
            kind,
            dim,
            g,
            gamma,
        })
    }

    /// `η^{ij} d/dX`.
    pub fn first(eta_inv: &QMatrix) -> Self {
        let dim = eta_inv.len();
        Self::from_parts(HydroKind::First, dim, constant_matrix(eta_inv), vec![PolynomialForm::zero(); dim.pow(3)])
            .expect("shapes agree")
    }

    /// Second operator of a polynomial prepotential:
    /// `g^{ab} = η^{aμ}η^{bν} F_μνγ E^γ`, `Γ^{ab}_γ = ((d+1)/2 − q_b) c^{ab}_γ`
    /// with `c^{ab}_γ = η^{aμ} c_{μγ}^b`.
    pub fn second(f: &PolynomialForm, eta_inv: &QMatrix, euler: &EulerData) -> Self {
        let dim = eta_inv.len();
        let e: Vec<PolynomialForm> = (0..dim)
            .map(|g| {
                let mut p = PolynomialForm::var(g).scale(&(Q::one() - &euler.charges[g]));
                p.add_term(Monomial::one(), euler.shifts[g].clone());
                p
            })
            .collect();
        let third: Vec<PolynomialForm> = {
            let second = hessian(f, dim);
            (0..dim.pow(3)).map(|k| second[k / dim].differentiate(k % dim)).collect()
        };
        // F_μν(E) = F_μνγ E^γ
        let fe: Vec<PolynomialForm> = (0..dim * dim)
            .map(|mn| (0..dim).fold(PolynomialForm::zero(), |acc, g| &acc + &(&third[mn * dim + g] * &e[g])))
            .collect();
        let mut g = vec![PolynomialForm::zero(); dim * dim];
        for a in 0..dim {
            for b in 0..dim {
                for mu in 0..dim {
                    for nu in 0..dim {
                        add_scaled(&mut g[a * dim + b], &fe[mu * dim + nu], &(&eta_inv[a][mu] * &eta_inv[b][nu]));
                    }
                }
            }
        }
        let c = structure_polynomials(f, eta_inv);
        let half_d1 = (&euler.dimension + q(1)) * qr(1, 2);
        let mut gamma = vec![PolynomialForm::zero(); dim.pow(3)];
        for a in 0..dim {
            for b in 0..dim {
                let w = &half_d1 - &euler.charges[b];
                for gi in 0..dim {
                    let slot = &mut gamma[(a * dim + b) * dim + gi];
                    for mu in 0..dim {
                        add_scaled(slot, &c[(mu * dim + gi) * dim + b], &(&eta_inv[a][mu] * &w));
                    }
                }
            }
        }
        Self::from_parts(HydroKind::Second, dim, g, gamma).expect("shapes agree")
    }

    /// `g^{ij} = c_k^{ij}u^k + λη^{ij}`, `Γ^{ij}_k = ½c_k^{ij}`.
    pub fn balinski_novikov(alg: &FrobeniusAlgebra, lambda: &Q) -> Self {
        let n = alg.dim();
        let c = raised_constants(alg);
        let mut g = vec![PolynomialForm::zero(); n * n];
        let mut gamma = vec![PolynomialForm::zero(); n.pow(3)];
        for i in 0..n {
            for j in 0..n {
                let slot = &mut g[i * n + j];
                slot.add_term(Monomial::one(), lambda * &alg.eta_inv()[i][j]);
                for k in 0..n {
                    let ckij = &c[(k * n + i) * n + j];
                    slot.add_term(Monomial::var(k), ckij.clone());
                    gamma[(i * n + j) * n + k] = PolynomialForm::constant(ckij * qr(1, 2));
                }
            }
        }
        Self::from_parts(HydroKind::BalinskiNovikov, n, g, gamma).expect("shapes agree")
    }

    /// Lift of `f(u) d/dX + ½f'(u)u_X` for `f = Σ coeffs[k] u^k`:
    /// `g^{ij} = f̂(û)^p c_p^{ij}`, `Γ^{ij}_k = ½ f̂'(û)^a c_{ak}^p c_p^{ij}`.
    pub fn polynomial_lift(alg: &FrobeniusAlgebra, coeffs: &[Q]) -> Self {
        let n = alg.dim();
        let u: Vec<PolynomialForm> = (0..n).map(PolynomialForm::var).collect();
        let mut f_hat = vec![PolynomialForm::zero(); n];
        let mut df_hat = vec![PolynomialForm::zero(); n];
        let mut power = alg.unit::<PolynomialForm>();
        for (k, ck) in coeffs.iter().enumerate() {
            for i in 0..n {
                add_scaled(&mut f_hat[i], &power[i], ck);
                if k + 1 < coeffs.len() {
                    add_scaled(&mut df_hat[i], &power[i], &(&coeffs[k + 1] * Q::from_integer((k as i64 + 1).into())));
                }
            }
            power = alg.mul_unchecked(&power, &u);
        }
        let c = raised_constants(alg);
        let mut g = vec![PolynomialForm::zero(); n * n];
        let mut gamma = vec![PolynomialForm::zero(); n.pow(3)];
        for i in 0..n {
            for j in 0..n {
                for p in 0..n {
                    let cpij = &c[(p * n + i) * n + j];
                    add_scaled(&mut g[i * n + j], &f_hat[p], cpij);
                    for k in 0..n {
                        for a in 0..n {
                            let w = alg.structure_constant(a, k, p) * cpij * qr(1, 2);
                            add_scaled(&mut gamma[(i * n + j) * n + k], &df_hat[a], &w);
                        }
                    }
                }
            }
        }
        Self::from_parts(HydroKind::PolynomialLift, n, g, gamma).expect("shapes agree")
    }

    /// `g_(0) = η^{-1}, Γ_(0) = 0` and
    /// `g_(n+1)^{ij} = 2c_r^{ip}u^r η_pq g_(n)^{qj}`,
    /// `Γ_(n+1)^{ij}_k = 2c_r^{ip}u^r η_pq Γ_(n)^{qj}_k + c_k^{ip} η_pq g_(n)^{qj}`.
    pub fn metric_recursion(alg: &FrobeniusAlgebra, steps: usize) -> Vec<Self> {
        let n = alg.dim();
        let c = raised_constants(alg);
        let eta = alg.eta();
        // lower[k][i][q] = c_k^{ip} η_pq
        let lower: Vec<Q> = (0..n.pow(3))
            .map(|kiq| {
                let (k, i, qq) = (kiq / (n * n), (kiq / n) % n, kiq % n);
                (0..n).fold(Q::zero(), |acc, p| acc + &c[(k * n + i) * n + p] * &eta[p][qq])
            })
            .collect();
        // mult[i][q] = 2 c_r^{ip} u^r η_pq
        let mult: Vec<PolynomialForm> = (0..n * n)
            .map(|iq| {
                let mut p = PolynomialForm::zero();
                for r in 0..n {
                    p.add_term(Monomial::var(r), &lower[(r * n + iq / n) * n + iq % n] * q(2));
                }
                p
            })
            .collect();
        let mut out = vec![Self::first(alg.eta_inv())];
        out[0].kind = HydroKind::Recursion(0);
        for step in 1..=steps {
            let prev = &out[step - 1];
            let mut g = vec![PolynomialForm::zero(); n * n];
            let mut gamma = vec![PolynomialForm::zero(); n.pow(3)];
            for i in 0..n {
                for j in 0..n {
                    for qq in 0..n {
                        let m_iq = &mult[i * n + qq];
                        let g_qj = &prev.g[qq * n + j];
                        g[i * n + j] = &g[i * n + j] + &(m_iq * g_qj);
                        for k in 0..n {
                            let slot = &mut gamma[(i * n + j) * n + k];
                            *slot = &*slot + &(m_iq * &prev.gamma[(qq * n + j) * n + k]);
                            add_scaled(slot, g_qj, &lower[(k * n + i) * n + qq]);
                        }
                    }
                }
            }
            out.push(Self::from_parts(HydroKind::Recursion(step), n, g, gamma).expect("shapes agree"));
        }
        out
    }

    pub fn kind(&self) -> &HydroKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self, i: usize, j: usize) -> &PolynomialForm {
        &self.g[i * self.dim + j]
    }

    /// `Γ^{ij}_k`.
    pub fn christoffel(&self, i: usize, j: usize, k: usize) -> &PolynomialForm {
        &self.gamma[(i * self.dim + j) * self.dim + k]
    }

    pub fn metric_at(&self, u: &[f64]) -> Vec<f64> {
        self.g_fast.iter().map(|p| p.eval(u)).collect()
    }

    pub fn flatness_defects(&self, u: &[Q]) -> FlatnessDefects {
        flatness_defects(self, u)
    }
}

impl FieldOperator for HydroOperator {
    fn components(&self) -> usize {
        self.dim
    }

    fn apply(&self, grid: &Grid, state: &[Vec<f64>], covector: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.dim;
        let points = grid.points();
        let dxi: Vec<Vec<f64>> = covector.iter().map(|x| grid.derivative(x, 1)).collect();
        let has_gamma = self.gamma_fast.iter().any(|p| !p.is_zero());
        let ux: Vec<Vec<f64>> = if has_gamma { state.iter().map(|s| grid.derivative(s, 1)).collect() } else { Vec::new() };
        let mut out = vec![vec![0.0; points]; n];
        let mut u = vec![0.0; n];
        for p in 0..points {
            for (k, s) in state.iter().enumerate() {
                u[k] = s[p];
            }
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    let g = &self.g_fast[i * n + j];
                    if !g.is_zero() {
                        acc += g.eval(&u) * dxi[j][p];
                    }
                    if has_gamma {
                        for k in 0..n {
                            let gm = &self.gamma_fast[(i * n + j) * n + k];
                            if !gm.is_zero() {
                                acc += gm.eval(&u) * ux[k][p] * covector[j][p];
                            }
                        }
                    }
                }
                out[i][p] = acc;
            }
        }
        out
    }
}

/// Residuals of the flat contravariant pair `(g, Γ)` at a point, each the
/// largest absolute entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessDefects {
    /// `g^{ij} − g^{ji}`.
    pub symmetry: Q,
    /// `∂_k g^{ij} − Γ^{ij}_k − Γ^{ji}_k`.
    pub compatibility: Q,
    /// `g^{is}Γ^{jk}_s − g^{js}Γ^{ik}_s`.
    pub torsion: Q,
    /// `g^{is}(∂_sΓ^{jk}_l − ∂_lΓ^{jk}_s) + Γ^{ij}_sΓ^{sk}_l − Γ^{ik}_sΓ^{sj}_l`.
    pub curvature: Q,
}

impl FlatnessDefects {
    pub fn is_flat(&self) -> bool {
        self.symmetry.is_zero() && self.compatibility.is_zero() && self.torsion.is_zero() && self.curvature.is_zero()
    }
}

fn max_abs(acc: Q, x: Q) -> Q {
    let a = if x < Q::zero() { -x } else { x };
    if a > acc {
        a
    } else {
        acc
    }
}

/// Exact flatness residuals at a rational point, with coefficient
/// derivatives taken symbolically.
pub fn flatness_defects(op: &HydroOperator, u: &[Q]) -> FlatnessDefects {
    let n = op.dim;
    let g: Vec<Q> = op.g.iter().map(|p| p.eval_exact(u)).collect();
    let gm: Vec<Q> = op.gamma.iter().map(|p| p.eval_exact(u)).collect();
    let dg: Vec<Q> = (0..n.pow(3)).map(|ijk| op.g[ijk / n].differentiate(ijk % n).eval_exact(u)).collect();
    let dgm: Vec<Q> = (0..n.pow(4)).map(|x| op.gamma[x / n].differentiate(x % n).eval_exact(u)).collect();
    let gi = |i: usize, j: usize| &g[i * n + j];
    let ga = |i: usize, j: usize, k: usize| &gm[(i * n + j) * n + k];
    let dga = |i: usize, j: usize, k: usize, s: usize| &dgm[((i * n + j) * n + k) * n + s];
    let mut d = FlatnessDefects { symmetry: Q::zero(), compatibility: Q::zero(), torsion: Q::zero(), curvature: Q::zero() };
    for i in 0..n {
        for j in 0..n {
            d.symmetry = max_abs(d.symmetry.clone(), gi(i, j) - gi(j, i));
            for k in 0..n {
                let compat = &dg[(i * n + j) * n + k] - ga(i, j, k) - ga(j, i, k);
                d.compatibility = max_abs(d.compatibility.clone(), compat);
                let tors = (0..n).fold(Q::zero(), |acc, s| acc + gi(i, s) * ga(j, k, s) - gi(j, s) * ga(i, k, s));
                d.torsion = max_abs(d.torsion.clone(), tors);
                for l in 0..n {
                    let mut r = Q::zero();
                    for s in 0..n {
                        r += gi(i, s) * (dga(j, k, l, s) - dga(j, k, s, l));
                        r += ga(i, j, s) * ga(s, k, l) - ga(i, k, s) * ga(s, j, l);
                    }
                    d.curvature = max_abs(d.curvature.clone(), r);
                }
            }
        }
    }
    d
}

/// Densities, their lifts and the flows of the principal hierarchy of `M ⊗ A`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    lifted: LiftedManifold,
    tables: Vec<DensityTable>,
    /// `∂h_{N,σ}/∂t^β`, indexed `[σ][N][β]`.
    gradients: Vec<Vec<Vec<Expression>>>,
    /// Exact `𝔥_{N,σ,r}`, indexed `[σ][N][r]`.
    lifted_densities: Vec<Vec<Vec<PolynomialForm>>>,
    /// Compiled `∂𝔥_{N,σ,r}/∂t^{(b)}`, indexed `[σ][N][r][b]`.
    lifted_gradients: Vec<Vec<Vec<Vec<CompiledPolynomial>>>>,
    p1: HydroOperator,
    p2: HydroOperator,
}

impl Hierarchy {
    pub fn new(lifted: LiftedManifold, n_max: usize) -> Result<Self, HierarchyError> {
        let base = lifted.base();
        let alg = lifted.algebra();
        let (m, n) = (base.eta_inv().len(), alg.dim());
        let lifted_poly = lifted.polynomial().ok_or(HierarchyError::NotPolynomial)?;
        let tables = (0..m).map(|s| generate_densities(base, s, n_max)).collect::<Result<Vec<_>, _>>()?;
        let gradients = tables
            .iter()
            .map(|t| t.levels.iter().map(|h| (0..m).map(|b| h.differentiate(b).to_expression()).collect()).collect())
            .collect();
        let mut lifted_densities = Vec::with_capacity(m);
        let mut lifted_gradients = Vec::with_capacity(m);
        for t in &tables {
            let mut by_level = Vec::new();
            let mut grads_by_level = Vec::new();
            for h in &t.levels {
                let per_r = (0..n).map(|r| lift_density(h, m, r, alg)).collect::<Result<Vec<_>, _>>()?;
                grads_by_level.push(
                    per_r.iter().map(|p| (0..m * n).map(|b| p.differentiate(b).compile()).collect()).collect(),
                );
                by_level.push(per_r);
            }
            lifted_densities.push(by_level);
            lifted_gradients.push(grads_by_level);
        }
        let p1 = HydroOperator::first(lifted.eta_inv());
        let p2 = HydroOperator::second(lifted_poly, lifted.eta_inv(), crate::manifold::Prepotential::euler(&lifted));
        Ok(Self { lifted, tables, gradients, lifted_densities, lifted_gradients, p1, p2 })
    }

    pub fn lifted(&self) -> &LiftedManifold {
        &self.lifted
    }

    pub fn n_max(&self) -> usize {
        self.tables[0].levels.len() - 1
    }

    pub fn tables(&self) -> &[DensityTable] {
        &self.tables
    }

    pub fn first_operator(&self) -> &HydroOperator {
        &self.p1
    }

    pub fn second_operator(&self) -> &HydroOperator {
        &self.p2
    }

    fn base_dim(&self) -> usize {
        self.tables.len()
    }

    fn alg_dim(&self) -> usize {
        self.lifted.algebra().dim()
    }

    fn check(&self, level: usize, sigma: usize, r: usize) -> Result<(), HierarchyError> {
        if level > self.n_max() || sigma >= self.base_dim() || r >= self.alg_dim() {
            return Err(HierarchyError::Index(format!("(N, σ, r) = ({level}, {sigma}, {r})")));
        }
        Ok(())
    }

    fn check_state(&self, state: &FieldGrid) -> Result<(), HierarchyError> {
        let expected = (self.base_dim(), self.alg_dim());
        let found = (state.fields(), state.comps());
        if expected != found {
            return Err(HierarchyError::Shape { expected, found });
        }
        Ok(())
    }

    pub fn lifted_density(&self, level: usize, sigma: usize, r: usize) -> Result<&PolynomialForm, HierarchyError> {
        self.check(level, sigma, r)?;
        Ok(&self.lifted_densities[sigma][level][r])
    }

    /// Exact residual of `∂_a∂_b 𝔥_N − c^A_ab^k ∂_k 𝔥_{N-1}`; zero when the
    /// lifted recursion holds identically.
    pub fn recursion_residual(&self, level: usize, sigma: usize, r: usize) -> Result<Vec<PolynomialForm>, HierarchyError> {
        self.check(level, sigma, r)?;
        if level == 0 {
            return Err(HierarchyError::Index("recursion starts at level 1".into()));
        }
        let third = self.lifted.third_derivative_polynomials().ok_or(HierarchyError::NotPolynomial)?;
        let dim = self.lifted.eta_inv().len();
        let mut c = vec![PolynomialForm::zero(); dim.pow(3)];
        for ab in 0..dim * dim {
            for nu in 0..dim {
                for k in 0..dim {
                    add_scaled(&mut c[ab * dim + k], &third[ab * dim + nu], &self.lifted.eta_inv()[nu][k]);
                }
            }
        }
        let h = &self.lifted_densities[sigma][level][r];
        let prev = &self.lifted_densities[sigma][level - 1][r];
        let hess = hessian(h, dim);
        let rhs = contracted_gradient(&c, prev, dim);
        Ok(hess.iter().zip(&rhs).map(|(a, b)| a - b).collect())
    }

    /// Normalization `κ = N + q_σ − d/2 − ½` relating the two operators:
    /// `P2 δH_{N-1} = κ P1 δH_N`.
    pub fn kappa(&self, level: usize, sigma: usize) -> Q {
        let euler = crate::manifold::Prepotential::euler(self.lifted.base());
        Q::from_integer((level as i64).into()) + &euler.charges[sigma] - &euler.dimension * qr(1, 2) - qr(1, 2)
    }

    /// `𝔥_{N,σ,r}` evaluated along the state.
    pub fn density_field(&self, level: usize, sigma: usize, r: usize, state: &FieldGrid) -> Result<Vec<f64>, HierarchyError> {
        self.check(level, sigma, r)?;
        self.check_state(state)?;
        let h = self.lifted_densities[sigma][level][r].compile();
        Ok((0..state.grid().points()).map(|j| h.eval(&state.point(j))).collect())
    }

    /// `H_{N,σ,r} = ∫ 𝔥_{N,σ,r} dX`.
    pub fn hamiltonian(&self, level: usize, sigma: usize, r: usize, state: &FieldGrid) -> Result<f64, HierarchyError> {
        Ok(state.grid().integrate(&self.density_field(level, sigma, r, state)?))
    }

    /// Componentwise gradient `∂𝔥_{N,σ,r}/∂t^{(b)}` along the state.
    pub fn variational_derivative(
        &self,
        level: usize,
        sigma: usize,
        r: usize,
        state: &FieldGrid,
    ) -> Result<Vec<Vec<f64>>, HierarchyError> {
        self.check(level, sigma, r)?;
        self.check_state(state)?;
        let grads = &self.lifted_gradients[sigma][level][r];
        let points = state.grid().points();
        let mut out = vec![vec![0.0; points]; grads.len()];
        for j in 0..points {
            let u = state.point(j);
            for (b, g) in grads.iter().enumerate() {
                out[b][j] = g.eval(&u);
            }
        }
        Ok(out)
    }

    /// `∂ĥ_{N,σ}/∂t^β (t̂) ∘ e_r` for every `β`, as `m` algebra-valued fields.
    pub fn avalued_gradient(
        &self,
        level: usize,
        sigma: usize,
        r: usize,
        state: &FieldGrid,
    ) -> Result<Vec<Vec<Vec<f64>>>, HierarchyError> {
        self.check(level, sigma, r)?;
        self.check_state(state)?;
        let alg = self.lifted.algebra();
        let (m, n) = (self.base_dim(), self.alg_dim());
        let er = alg.basis::<f64>(r);
        let points = state.grid().points();
        let mut out = vec![vec![vec![0.0; points]; n]; m];
        for j in 0..points {
            let hat: Vec<Vec<f64>> = (0..m).map(|a| state.element(a, j)).collect();
            for (beta, grad) in self.gradients[sigma][level].iter().enumerate() {
                let x = alg.mul_f64(&grad.eval_algebra(alg, &hat)?, &er);
                for i in 0..n {
                    out[beta][i][j] = x[i];
                }
            }
        }
        Ok(out)
    }

    /// Right-hand side of `∂t̂/∂T^{(N,σ,r)}`, computed componentwise through
    /// the first operator on the lifted manifold and again algebra-valued as
    /// `η^{αβ} d/dX (∂ĥ/∂t^β ∘ e_r)`; the routes must agree to 1e-10.
    pub fn flow(&self, level: usize, sigma: usize, r: usize, state: &FieldGrid) -> Result<FieldGrid, HierarchyError> {
        let xi = self.variational_derivative(level, sigma, r, state)?;
        let componentwise = self.p1.apply(state.grid(), state.components(), &xi);
        let grid = state.grid();
        let (m, n) = (self.base_dim(), self.alg_dim());
        let y = self.avalued_gradient(level, sigma, r, state)?;
        let eta_inv = self.lifted.base().eta_inv();
        let mut avalued = vec![vec![0.0; grid.points()]; m * n];
        for alpha in 0..m {
            for (beta, yb) in y.iter().enumerate() {
                let w = to_f64(&eta_inv[alpha][beta]);
                if w == 0.0 {
                    continue;
                }
                for i in 0..n {
                    let d = grid.derivative(&yb[i], 1);
                    for (o, v) in avalued[alpha * n + i].iter_mut().zip(d) {
                        *o += w * v;
                    }
                }
            }
        }
        let scale = 1.0 + componentwise.iter().flatten().fold(0.0_f64, |a, x| a.max(x.abs()));
        let diff = componentwise
            .iter()
            .flatten()
            .zip(avalued.iter().flatten())
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        if diff > 1e-10 * scale {
            return Err(HierarchyError::RoutesDisagree(diff));
        }
        Ok(state.with_components(avalued))
    }

    /// `P2 δH_{N-1,σ,r} / κ`, which coincides with [`Hierarchy::flow`].
    pub fn second_flow(&self, level: usize, sigma: usize, r: usize, state: &FieldGrid) -> Result<FieldGrid, HierarchyError> {
        if level == 0 {
            return Err(HierarchyError::Index("the second operator needs level ≥ 1".into()));
        }
        self.check(level, sigma, r)?;
        let kappa = self.kappa(level, sigma);
        if kappa.is_zero() {
            return Err(HierarchyError::Resonant { level, sigma });
        }
        let xi = self.variational_derivative(level - 1, sigma, r, state)?;
        let out = self.p2.apply(state.grid(), state.components(), &xi);
        Ok(state.with_components(out).scaled(1.0 / to_f64(&kappa)))
    }
}
