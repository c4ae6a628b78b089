//! Frobenius manifolds given by a prepotential, and their tensor product
//! with a Frobenius algebra: `F^A = ω(F̂)` in coordinates `t^{(αi)}`.
//!
//! Lifted coordinates are flattened as `a = α·n + i` (0-based), which prints
//! as `v{a+1}`.

use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::algebra::{seeded_rng, AlgebraError, Check, FrobeniusAlgebra};
use crate::expr::{ExprError, Expression, PolynomialForm};
use crate::linalg::{det_f, det_q, inverse_q, to_f64_matrix, FMatrix, QMatrix};
use crate::scalar::{q, qr, to_f64, Rat, Q};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ManifoldError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("metric entry ({0}, {1}) from the prepotential is not constant")]
    MetricNotConstant(usize, usize),
    #[error("metric from the prepotential is degenerate")]
    Degenerate,
    #[error("prepotential uses {found} variables but the dimension is {dim}")]
    Arity { dim: usize, found: usize },
    #[error("euler data has {found} entries, expected {expected}")]
    EulerLength { expected: usize, found: usize },
    #[error("structure functions are not {0} at a sample point")]
    NotAnFAlgebra(&'static str),
    #[error("unknown manifold preset {0:?}")]
    UnknownPreset(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Euler field `E = Σ ((1 - q_α) t^α + r_α) ∂_α` with scaling dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerData {
    pub charges: Vec<Q>,
    pub shifts: Vec<Q>,
    pub dimension: Q,
}

impl EulerData {
    pub fn trivial(dim: usize) -> Self {
        Self { charges: vec![Q::zero(); dim], shifts: vec![Q::zero(); dim], dimension: Q::zero() }
    }

    /// Components `E^α(t)`.
    pub fn vector(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(self.charges.iter().zip(&self.shifts))
            .map(|(x, (qa, ra))| (1.0 - to_f64(qa)) * x + to_f64(ra))
            .collect()
    }
}

fn idx3(m: usize, a: usize, b: usize, c: usize) -> usize {
    (a * m + b) * m + c
}

fn idx4(m: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * m + b) * m + c) * m + d
}

/// Common interface of base and lifted manifolds for the numeric checks.
pub trait Prepotential {
    fn dim(&self) -> usize;
    fn metric(&self) -> &QMatrix;
    fn metric_inv_f64(&self) -> &FMatrix;
    fn euler(&self) -> &EulerData;
    /// All `F_abc` at `t`, flattened `[a][b][c]`.
    fn third_derivatives(&self, t: &[f64]) -> Vec<f64>;
    /// All `F_abcd` at `t`, flattened `[a][b][c][d]`.
    fn fourth_derivatives(&self, t: &[f64]) -> Vec<f64>;
}

/// `c_ab^g(t) = F_abm η^{mg}`, flattened `[a][b][g]`.
pub fn structure_functions<P: Prepotential + ?Sized>(p: &P, t: &[f64]) -> Vec<f64> {
    let m = p.dim();
    let f3 = p.third_derivatives(t);
    raise_last(&f3, p.metric_inv_f64(), m)
}

fn raise_last(f3: &[f64], eta_inv: &FMatrix, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            for g in 0..m {
                c[idx3(m, a, b, g)] = (0..m).map(|mu| f3[idx3(m, a, b, mu)] * eta_inv[mu][g]).sum();
            }
        }
    }
    c
}

/// Max over free indices of `|F_gsa η^{ab} F_bdm - F_msa η^{ab} F_bdg|`.
pub fn wdvv_residual<P: Prepotential + ?Sized>(p: &P, t: &[f64]) -> f64 {
    let m = p.dim();
    let f3 = p.third_derivatives(t);
    let c = raise_last(&f3, p.metric_inv_f64(), m);
    // F_gsa η^{ab} F_bdm = c_gs^b F_bdm
    let mut worst = 0.0_f64;
    for g in 0..m {
        for s in 0..m {
            for d in 0..m {
                for mu in 0..m {
                    let lhs: f64 = (0..m).map(|b| c[idx3(m, g, s, b)] * f3[idx3(m, b, d, mu)]).sum();
                    let rhs: f64 = (0..m).map(|b| c[idx3(m, mu, s, b)] * f3[idx3(m, b, d, g)]).sum();
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    worst
}

/// Max over `a, b, c` of `|E^k F_kabc + (d - q_a - q_b - q_c) F_abc|`, the
/// third derivative of `E(F) - (3 - d)F`.
pub fn quasi_homogeneity_residual<P: Prepotential + ?Sized>(p: &P, t: &[f64]) -> f64 {
    let m = p.dim();
    let e = p.euler().vector(t);
    let qs: Vec<f64> = p.euler().charges.iter().map(to_f64).collect();
    let d = to_f64(&p.euler().dimension);
    let f3 = p.third_derivatives(t);
    let f4 = p.fourth_derivatives(t);
    let mut worst = 0.0_f64;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let flow: f64 = (0..m).map(|k| e[k] * f4[idx4(m, k, a, b, c)]).sum();
                let r = flow + (d - qs[a] - qs[b] - qs[c]) * f3[idx3(m, a, b, c)];
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

/// Intersection form `g^{ab} = η^{aμ} η^{bν} F_μνγ E^γ`.
pub fn intersection_form<P: Prepotential + ?Sized>(p: &P, t: &[f64]) -> FMatrix {
    let m = p.dim();
    let f3 = p.third_derivatives(t);
    let e = p.euler().vector(t);
    let eta_inv = p.metric_inv_f64();
    let contracted: Vec<Vec<f64>> = (0..m)
        .map(|mu| (0..m).map(|nu| (0..m).map(|g| f3[idx3(m, mu, nu, g)] * e[g]).sum()).collect())
        .collect();
    (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    let mut s = 0.0;
                    for mu in 0..m {
                        for nu in 0..m {
                            s += eta_inv[a][mu] * eta_inv[b][nu] * contracted[mu][nu];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// A Frobenius manifold given by a prepotential in flat coordinates.
#[derive(Debug, Clone)]
pub struct FrobeniusManifold {
    dim: usize,
    prepotential: Expression,
    polynomial: Option<PolynomialForm>,
    third: Vec<Expression>,
    fourth: Vec<Expression>,
    eta: QMatrix,
    eta_inv: QMatrix,
    eta_inv_f: FMatrix,
    euler: EulerData,
    label: String,
}

impl FrobeniusManifold {
    pub fn new(
        prepotential: Expression,
        dim: usize,
        euler: EulerData,
        label: impl Into<String>,
    ) -> Result<Self, ManifoldError> {
        let found = prepotential.arity();
        if found > dim {
            return Err(ManifoldError::Arity { dim, found });
        }
        for len in [euler.charges.len(), euler.shifts.len()] {
            if len != dim {
                return Err(ManifoldError::EulerLength { expected: dim, found: len });
            }
        }
        let first: Vec<Expression> = (0..dim).map(|a| prepotential.differentiate(a)).collect();
        let second: Vec<Expression> = (0..dim * dim).map(|ab| first[ab / dim].differentiate(ab % dim)).collect();
        let third: Vec<Expression> = (0..dim * dim * dim)
            .map(|abc| second[abc / dim].differentiate(abc % dim))
            .collect();
        let fourth: Vec<Expression> = (0..dim.pow(4)).map(|i| third[i / dim].differentiate(i % dim)).collect();
        let mut eta = vec![vec![Q::zero(); dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                let entry = &third[idx3(dim, 0, a, b)];
                eta[a][b] = match entry {
                    Expression::Const(c) => c.clone(),
                    e if !e.has_exp() => {
                        let p = e.to_polynomial()?;
                        if p.degree().unwrap_or(0) > 0 {
                            return Err(ManifoldError::MetricNotConstant(a + 1, b + 1));
                        }
                        p.coefficient(&[])
                    }
                    _ => return Err(ManifoldError::MetricNotConstant(a + 1, b + 1)),
                };
            }
        }
        if det_q(&eta).is_zero() {
            return Err(ManifoldError::Degenerate);
        }
        let eta_inv = inverse_q(&eta).ok_or(ManifoldError::Degenerate)?;
        let polynomial = if prepotential.has_exp() { None } else { Some(prepotential.to_polynomial()?) };
        Ok(Self {
            dim,
            polynomial,
            third,
            fourth,
            eta_inv_f: to_f64_matrix(&eta_inv),
            eta,
            eta_inv,
            euler,
            prepotential,
            label: label.into(),
        })
    }

    /// `F = (t¹)³/6`, `E = t¹ ∂_1`.
    pub fn cubic1d() -> Self {
        let f = crate::expr::parse("1/6*t1^3").unwrap();
        Self::new(f, 1, EulerData::trivial(1), "cubic1d").unwrap()
    }

    /// `F = ½(t¹)²t² − (t²)⁴/72`, charges `(0, 1/3)`, `d = 1/3`.
    pub fn a2() -> Self {
        let f = crate::expr::parse("1/2*t1^2*t2 - 1/72*t2^4").unwrap();
        let euler = EulerData { charges: vec![q(0), qr(1, 3)], shifts: vec![q(0), q(0)], dimension: qr(1, 3) };
        Self::new(f, 2, euler, "A2").unwrap()
    }

    /// Quantum cohomology of the projective line: `F = ½(t¹)²t² + e^{t²}`,
    /// `E = t¹∂_1 + 2∂_2`, `d = 1`.
    pub fn cp1() -> Self {
        let f = crate::expr::parse("1/2*t1^2*t2 + exp(t2)").unwrap();
        let euler = EulerData { charges: vec![q(0), q(1)], shifts: vec![q(0), q(2)], dimension: q(1) };
        Self::new(f, 2, euler, "CP1").unwrap()
    }

    /// The algebra itself as a flat manifold: `F = ω(t∘t∘t)/6`.
    pub fn from_algebra(alg: &FrobeniusAlgebra) -> Self {
        let n = alg.dim();
        let t: Vec<PolynomialForm> = (0..n).map(PolynomialForm::var).collect();
        let cube = alg.mul_unchecked(&alg.mul_unchecked(&t, &t), &t);
        let f = alg.trace(&cube).scale_by(&qr(1, 6));
        Self::new(f.to_expression(), n, EulerData::trivial(n), format!("M[{}]", alg.label())).unwrap()
    }

    pub fn preset(name: &str) -> Result<Self, ManifoldError> {
        match name {
            "cubic1d" => Ok(Self::cubic1d()),
            "A2" => Ok(Self::a2()),
            "CP1" => Ok(Self::cp1()),
            other => Err(ManifoldError::UnknownPreset(other.to_string())),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn prepotential(&self) -> &Expression {
        &self.prepotential
    }

    pub fn polynomial(&self) -> Option<&PolynomialForm> {
        self.polynomial.as_ref()
    }

    /// Symbolic `F_abc`.
    pub fn third_derivative(&self, a: usize, b: usize, c: usize) -> &Expression {
        &self.third[idx3(self.dim, a, b, c)]
    }

    pub fn fourth_derivative(&self, a: usize, b: usize, c: usize, d: usize) -> &Expression {
        &self.fourth[idx4(self.dim, a, b, c, d)]
    }

    pub fn eta_inv(&self) -> &QMatrix {
        &self.eta_inv
    }

    /// Symbolic `c_ab^g = F_abm η^{mg}`, flattened `[a][b][g]`.
    pub fn structure_expressions(&self) -> Vec<Expression> {
        let m = self.dim;
        let mut out = Vec::with_capacity(m * m * m);
        for a in 0..m {
            for b in 0..m {
                for g in 0..m {
                    let terms: Vec<Expression> = (0..m)
                        .filter(|&mu| !self.eta_inv[mu][g].is_zero())
                        .map(|mu| {
                            Expression::Product(vec![
                                Expression::Const(self.eta_inv[mu][g].clone()),
                                self.third_derivative(a, b, mu).clone(),
                            ])
                        })
                        .collect();
                    out.push(Expression::Sum(terms).simplify());
                }
            }
        }
        out
    }

    /// Manifold checks at seeded sample points in `[-1, 1]^m`.
    pub fn verify(&self, seed: u64, samples: usize) -> Vec<Check> {
        let mut rng = seeded_rng(seed);
        let mut wdvv = 0.0_f64;
        let mut quasi = 0.0_f64;
        for _ in 0..samples {
            let t = sample_point_f64(&mut rng, self.dim);
            wdvv = wdvv.max(wdvv_residual(self, &t));
            quasi = quasi.max(quasi_homogeneity_residual(self, &t));
        }
        vec![
            Check::new("metric_constant", true, format!("det = {}", Rat(&det_q(&self.eta)))),
            Check::new("wdvv", wdvv < 1e-9, format!("max residual {wdvv:.3e}")),
            Check::new("quasi_homogeneity", quasi < 1e-9, format!("max residual {quasi:.3e}")),
        ]
    }
}

impl Prepotential for FrobeniusManifold {
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self) -> &QMatrix {
        &self.eta
    }
    fn metric_inv_f64(&self) -> &FMatrix {
        &self.eta_inv_f
    }
    fn euler(&self) -> &EulerData {
        &self.euler
    }
    fn third_derivatives(&self, t: &[f64]) -> Vec<f64> {
        self.third.iter().map(|e| e.eval_scalar(t).expect("arity checked")).collect()
    }
    fn fourth_derivatives(&self, t: &[f64]) -> Vec<f64> {
        self.fourth.iter().map(|e| e.eval_scalar(t).expect("arity checked")).collect()
    }
}

trait ScaleBy {
    fn scale_by(&self, c: &Q) -> Self;
}

impl ScaleBy for PolynomialForm {
    fn scale_by(&self, c: &Q) -> Self {
        crate::scalar::Ring::scale(self, c)
    }
}

/// Rational sample point in `[-1, 1]^dim` with denominators at most 8.
pub fn sample_point(rng: &mut impl Rng, dim: usize) -> Vec<Q> {
    (0..dim)
        .map(|_| {
            let den = rng.random_range(1..=8);
            qr(rng.random_range(-den..=den), den)
        })
        .collect()
}

pub fn sample_point_f64(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    sample_point(rng, dim).iter().map(to_f64).collect()
}

/// Variable names `v1 .. v{mn}` for the flattened lifted coordinates.
pub fn lifted_names(count: usize) -> Vec<String> {
    (1..=count).map(|k| format!("v{k}")).collect()
}

/// `M ⊗ A`.
#[derive(Debug, Clone)]
pub struct LiftedManifold {
    base: FrobeniusManifold,
    algebra: FrobeniusAlgebra,
    polynomial: Option<PolynomialForm>,
    poly_third: Option<Vec<PolynomialForm>>,
    poly_fourth: Option<Vec<PolynomialForm>>,
    w3: Vec<f64>,
    w4: Vec<f64>,
    eta: QMatrix,
    eta_inv: QMatrix,
    eta_inv_f: FMatrix,
    euler: EulerData,
}

/// `t̂^α = Σ_i t^{(αi)} e_i` for ring-valued flattened coordinates.
fn hat_point<T: Clone>(t: &[T], m: usize, n: usize) -> Vec<Vec<T>> {
    (0..m).map(|a| t[a * n..(a + 1) * n].to_vec()).collect()
}

/// `F^A = ω(F̂)` as a polynomial in the flattened coordinates, when `F̂`
/// stays polynomial (exp-free `F`, or exp of nilpotent arguments only).
pub fn lift_polynomial(f: &Expression, m: usize, alg: &FrobeniusAlgebra) -> Result<PolynomialForm, ExprError> {
    let n = alg.dim();
    let vars: Vec<PolynomialForm> = (0..m * n).map(PolynomialForm::var).collect();
    let hat = f.eval_algebra(alg, &hat_point(&vars, m, n))?;
    Ok(alg.trace(&hat))
}

impl LiftedManifold {
    pub fn new(base: FrobeniusManifold, algebra: FrobeniusAlgebra) -> Result<Self, ManifoldError> {
        let polynomial = match lift_polynomial(&base.prepotential, base.dim, &algebra) {
            Ok(p) => Some(p),
            Err(ExprError::ExpNotPolynomial) => None,
            Err(e) => return Err(e.into()),
        };
        Self::assemble(base, algebra, polynomial)
    }

    /// Lift whose prepotential is replaced by `poly` (all other data kept);
    /// used to exercise the verification on non-product prepotentials.
    pub fn from_polynomial(
        base: FrobeniusManifold,
        algebra: FrobeniusAlgebra,
        poly: PolynomialForm,
    ) -> Result<Self, ManifoldError> {
        Self::assemble(base, algebra, Some(poly))
    }

    fn assemble(
        base: FrobeniusManifold,
        algebra: FrobeniusAlgebra,
        polynomial: Option<PolynomialForm>,
    ) -> Result<Self, ManifoldError> {
        let (m, n) = (base.dim, algebra.dim());
        let mn = m * n;
        let mut eta = vec![vec![Q::zero(); mn]; mn];
        for a in 0..m {
            for i in 0..n {
                for b in 0..m {
                    for j in 0..n {
                        eta[a * n + i][b * n + j] = &base.eta[a][b] * &algebra.eta()[i][j];
                    }
                }
            }
        }
        let eta_inv = inverse_q(&eta).ok_or(ManifoldError::Degenerate)?;
        let mut charges = Vec::with_capacity(mn);
        let mut shifts = Vec::with_capacity(mn);
        for a in 0..m {
            for i in 0..n {
                charges.push(base.euler.charges[a].clone());
                shifts.push(if i == 0 { base.euler.shifts[a].clone() } else { Q::zero() });
            }
        }
        let euler = EulerData { charges, shifts, dimension: base.euler.dimension.clone() };
        let (poly_third, poly_fourth) = match &polynomial {
            Some(p) => {
                let first: Vec<PolynomialForm> = (0..mn).map(|a| p.differentiate(a)).collect();
                let second: Vec<PolynomialForm> = (0..mn * mn).map(|k| first[k / mn].differentiate(k % mn)).collect();
                let third: Vec<PolynomialForm> = (0..mn.pow(3)).map(|k| second[k / mn].differentiate(k % mn)).collect();
                let fourth: Vec<PolynomialForm> = (0..mn.pow(4)).map(|k| third[k / mn].differentiate(k % mn)).collect();
                (Some(third), Some(fourth))
            }
            None => (None, None),
        };
        let mut w3 = vec![0.0; n.pow(4)];
        let mut w4 = vec![0.0; n.pow(5)];
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        w3[((p * n + i) * n + j) * n + k] = to_f64(&algebra.trace_of_basis_product(&[p, i, j, k]));
                        for l in 0..n {
                            w4[(((p * n + i) * n + j) * n + k) * n + l] =
                                to_f64(&algebra.trace_of_basis_product(&[p, i, j, k, l]));
                        }
                    }
                }
            }
        }
        Ok(Self {
            eta_inv_f: to_f64_matrix(&eta_inv),
            base,
            algebra,
            polynomial,
            poly_third,
            poly_fourth,
            w3,
            w4,
            eta,
            eta_inv,
            euler,
        })
    }

    pub fn base(&self) -> &FrobeniusManifold {
        &self.base
    }

    pub fn algebra(&self) -> &FrobeniusAlgebra {
        &self.algebra
    }

    pub fn polynomial(&self) -> Option<&PolynomialForm> {
        self.polynomial.as_ref()
    }

    pub fn eta_inv(&self) -> &QMatrix {
        &self.eta_inv
    }

    /// Exact `∂_a∂_b∂_c F^A`, flattened `[a][b][c]`, when the lift is polynomial.
    pub fn third_derivative_polynomials(&self) -> Option<&[PolynomialForm]> {
        self.poly_third.as_deref()
    }

    /// `F^A(t)` through the hat map.
    pub fn value(&self, t: &[f64]) -> f64 {
        let (m, n) = (self.base.dim, self.algebra.dim());
        let hat = self
            .base
            .prepotential
            .eval_algebra(&self.algebra, &hat_point(t, m, n))
            .expect("dimensions fixed at construction");
        self.algebra.trace_f64(&hat)
    }

    /// The exp-free summands of `F`, lifted exactly.
    pub fn polynomial_part(&self) -> Option<PolynomialForm> {
        let f = &self.base.prepotential;
        let terms: Vec<Expression> = match f {
            Expression::Sum(v) => v.iter().filter(|t| !t.has_exp()).cloned().collect(),
            t if !t.has_exp() => vec![t.clone()],
            _ => Vec::new(),
        };
        lift_polynomial(&Expression::Sum(terms), self.base.dim, &self.algebra).ok()
    }

    /// Third derivatives by the chain rule `∂F^A/∂t^{(αi)} = ω((∂_αF)^∧ ∘ e_i)`,
    /// independent of the polynomial expansion.
    pub fn third_derivatives_hat(&self, t: &[f64]) -> Vec<f64> {
        let (m, n) = (self.base.dim, self.algebra.dim());
        let mn = m * n;
        let point = hat_point(t, m, n);
        let mut out = vec![0.0; mn.pow(3)];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let h = self
                        .base
                        .third_derivative(a, b, c)
                        .eval_algebra(&self.algebra, &point)
                        .expect("dimensions fixed at construction");
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                let v: f64 = (0..n).map(|p| h[p] * self.w3[((p * n + i) * n + j) * n + k]).sum();
                                out[idx3(mn, a * n + i, b * n + j, c * n + k)] = v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn fourth_derivatives_hat(&self, t: &[f64]) -> Vec<f64> {
        let (m, n) = (self.base.dim, self.algebra.dim());
        let mn = m * n;
        let point = hat_point(t, m, n);
        let mut out = vec![0.0; mn.pow(4)];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let h = self
                            .base
                            .fourth_derivative(a, b, c, d)
                            .eval_algebra(&self.algebra, &point)
                            .expect("dimensions fixed at construction");
                        for i in 0..n {
                            for j in 0..n {
                                for k in 0..n {
                                    for l in 0..n {
                                        let v: f64 = (0..n)
                                            .map(|p| h[p] * self.w4[(((p * n + i) * n + j) * n + k) * n + l])
                                            .sum();
                                        out[idx4(mn, a * n + i, b * n + j, c * n + k, d * n + l)] = v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Lifted structure constants from the lifting formula
    /// `c_{(αi)(βj)}^{(γk)} = [ĉ_αβ^γ]^p c_ij^q c_pq^k`, flattened.
    pub fn structure_constants_lifted(&self, t: &[f64]) -> Vec<f64> {
        let lift = StructureFunctions::new(self.base.structure_expressions(), self.base.dim);
        lift.lift_eval(&self.algebra, t)
    }
}

impl Prepotential for LiftedManifold {
    fn dim(&self) -> usize {
        self.base.dim * self.algebra.dim()
    }
    fn metric(&self) -> &QMatrix {
        &self.eta
    }
    fn metric_inv_f64(&self) -> &FMatrix {
        &self.eta_inv_f
    }
    fn euler(&self) -> &EulerData {
        &self.euler
    }
    fn third_derivatives(&self, t: &[f64]) -> Vec<f64> {
        match &self.poly_third {
            Some(p) => p.iter().map(|x| x.eval_f64(t)).collect(),
            None => self.third_derivatives_hat(t),
        }
    }
    fn fourth_derivatives(&self, t: &[f64]) -> Vec<f64> {
        match &self.poly_fourth {
            Some(p) => p.iter().map(|x| x.eval_f64(t)).collect(),
            None => self.fourth_derivatives_hat(t),
        }
    }
}

/// `M ⊗ A`, see [`LiftedManifold::new`].
pub fn tensor_with_algebra(base: &FrobeniusManifold, alg: &FrobeniusAlgebra) -> Result<LiftedManifold, ManifoldError> {
    LiftedManifold::new(base.clone(), alg.clone())
}

/// `F^A` for a one-parameter algebra family whose table and trace form are
/// polynomial in the parameter. The parameter becomes the last variable
/// (index `mn`); the result is recovered by exact interpolation over
/// integer nodes and confirmed at one further node.
pub fn lift_polynomial_in_parameter(
    f: &Expression,
    m: usize,
    family: impl Fn(&Q) -> Result<FrobeniusAlgebra, AlgebraError>,
) -> Result<PolynomialForm, ManifoldError> {
    if f.has_exp() {
        return Err(ManifoldError::Unsupported("symbolic parameter requires an exp-free prepotential".into()));
    }
    let degree = f.to_polynomial()?.degree().unwrap_or(0) as i64;
    let n = family(&q(1))?.dim();
    let param = m * n;
    let nodes: Vec<Q> = (1..=degree + 1).map(q).collect();
    let mut values = Vec::with_capacity(nodes.len());
    for x in &nodes {
        values.push(lift_polynomial(f, m, &family(x)?)?);
    }
    let result = newton_interpolate(&nodes, &values, param);
    let check = q(degree + 2);
    if result.specialize(param, &check) != lift_polynomial(f, m, &family(&check)?)? {
        return Err(ManifoldError::Unsupported("lift is not polynomial in the parameter".into()));
    }
    Ok(result)
}

/// Interpolating polynomial in variable `var` through `(nodes[k], values[k])`.
fn newton_interpolate(nodes: &[Q], values: &[PolynomialForm], var: usize) -> PolynomialForm {
    use crate::scalar::Ring;
    let k = nodes.len();
    let mut coef: Vec<PolynomialForm> = values.to_vec();
    for level in 1..k {
        for i in (level..k).rev() {
            let denom = Q::one() / (&nodes[i] - &nodes[i - level]);
            coef[i] = (coef[i].clone() - coef[i - 1].clone()).scale(&denom);
        }
    }
    let x = PolynomialForm::var(var);
    let mut acc = coef[k - 1].clone();
    for i in (0..k - 1).rev() {
        let factor = x.clone() - PolynomialForm::constant(nodes[i].clone());
        acc = &acc * &factor + coef[i].clone();
    }
    acc
}

/// Point-dependent structure functions `c_αβ^γ(t)` of an F-manifold.
#[derive(Debug, Clone)]
pub struct StructureFunctions {
    dim: usize,
    exprs: Vec<Expression>,
}

impl StructureFunctions {
    /// `exprs` flattened `[α][β][γ]`.
    pub fn new(exprs: Vec<Expression>, dim: usize) -> Self {
        assert_eq!(exprs.len(), dim.pow(3), "structure functions must have dim^3 entries");
        Self { dim, exprs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: &[f64]) -> Vec<f64> {
        self.exprs.iter().map(|e| e.eval_scalar(t).unwrap_or(f64::NAN)).collect()
    }

    /// Lifted constants at the flattened point `t`.
    pub fn lift_eval(&self, alg: &FrobeniusAlgebra, t: &[f64]) -> Vec<f64> {
        let (m, n) = (self.dim, alg.dim());
        let mn = m * n;
        let point = hat_point(t, m, n);
        let c = alg.structure_constants_f64();
        let mut out = vec![0.0; mn.pow(3)];
        for a in 0..m {
            for b in 0..m {
                for g in 0..m {
                    let h = self.exprs[idx3(m, a, b, g)]
                        .eval_algebra(alg, &point)
                        .expect("arity checked at lift");
                    for i in 0..n {
                        for j in 0..n {
                            // ĉ ∘ e_i ∘ e_j
                            for k in 0..n {
                                let mut v = 0.0;
                                for p in 0..n {
                                    for qd in 0..n {
                                        v += h[p] * c[(i * n + j) * n + qd] * c[(p * n + qd) * n + k];
                                    }
                                }
                                out[idx3(mn, a * n + i, b * n + j, g * n + k)] = v;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Worst commutativity and associativity defects of constants `c[a][b][g]`.
pub fn f_algebra_defects(c: &[f64], dim: usize) -> (f64, f64) {
    let mut comm = 0.0_f64;
    let mut assoc = 0.0_f64;
    for a in 0..dim {
        for b in 0..dim {
            for g in 0..dim {
                comm = comm.max((c[idx3(dim, a, b, g)] - c[idx3(dim, b, a, g)]).abs());
                for d in 0..dim {
                    let lhs: f64 = (0..dim).map(|s| c[idx3(dim, a, b, s)] * c[idx3(dim, s, g, d)]).sum();
                    let rhs: f64 = (0..dim).map(|s| c[idx3(dim, b, g, s)] * c[idx3(dim, a, s, d)]).sum();
                    assoc = assoc.max((lhs - rhs).abs());
                }
            }
        }
    }
    (comm, assoc)
}

/// Structure functions of `M ⊗ A`, evaluated through the hat map.
#[derive(Debug, Clone)]
pub struct LiftedStructureFunctions {
    base: StructureFunctions,
    algebra: FrobeniusAlgebra,
}

impl LiftedStructureFunctions {
    pub fn dim(&self) -> usize {
        self.base.dim * self.algebra.dim()
    }

    pub fn eval(&self, t: &[f64]) -> Vec<f64> {
        self.base.lift_eval(&self.algebra, t)
    }
}

/// Lifts point-dependent structure functions to `M ⊗ A`, checking the input
/// and the output for commutativity and associativity at sample points.
pub fn fmanifold_lift(
    c: &StructureFunctions,
    alg: &FrobeniusAlgebra,
    seed: u64,
    samples: usize,
) -> Result<LiftedStructureFunctions, ManifoldError> {
    let m = c.dim;
    let mut rng = seeded_rng(seed);
    for _ in 0..samples {
        let t = sample_point_f64(&mut rng, m);
        let (comm, assoc) = f_algebra_defects(&c.eval(&t), m);
        if comm > 1e-10 {
            return Err(ManifoldError::NotAnFAlgebra("commutative"));
        }
        if assoc > 1e-10 {
            return Err(ManifoldError::NotAnFAlgebra("associative"));
        }
    }
    let lifted = LiftedStructureFunctions { base: c.clone(), algebra: alg.clone() };
    let mn = lifted.dim();
    for _ in 0..samples {
        let t = sample_point_f64(&mut rng, mn);
        let (comm, assoc) = f_algebra_defects(&lifted.eval(&t), mn);
        if comm > 1e-9 || assoc > 1e-9 {
            return Err(ManifoldError::NotAnFAlgebra("associative after lifting"));
        }
    }
    Ok(lifted)
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorReport {
    pub base: String,
    pub algebra: String,
    pub dim: usize,
    pub checks: Vec<Check>,
    pub wdvv_max_residual: f64,
    pub quasi_homogeneity_max_residual: f64,
    pub prepotential: Option<String>,
    pub polynomial_part: Option<String>,
}

impl TensorReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Checks that `L` is a tensor product: (i) the metric factorizes, (ii) at
/// points with `t^{(αi)} = 0` for `α, i > 1` the structure constants factor
/// as `c_αβ^γ(t^{(·1)}) c_ij^k`, (iii) the Euler data has the lifted shape and
/// `F^A` is quasi-homogeneous. WDVV is checked on `[-1, 1]^{mn}`.
pub fn verify_tensor_product(l: &LiftedManifold, seed: u64, samples: usize) -> TensorReport {
    let (m, n) = (l.base.dim, l.algebra.dim());
    let mn = m * n;
    let mut rng = seeded_rng(seed);
    let mut checks = Vec::new();

    // (i) η_{(αi)(βj)} read from the c_{(11)(αi)(βj)} slice
    let metric_ok;
    let metric_detail;
    if let Some(third) = &l.poly_third {
        metric_ok = (0..mn).all(|a| {
            (0..mn).all(|b| {
                let p = &third[idx3(mn, 0, a, b)];
                p.degree().unwrap_or(0) == 0 && p.coefficient(&[]) == l.eta[a][b]
            })
        });
        metric_detail = "exact".to_string();
    } else {
        let mut worst = 0.0_f64;
        for _ in 0..3 {
            let t = sample_point_f64(&mut rng, mn);
            let f3 = l.third_derivatives(&t);
            for a in 0..mn {
                for b in 0..mn {
                    worst = worst.max(rel_diff(f3[idx3(mn, 0, a, b)], to_f64(&l.eta[a][b])));
                }
            }
        }
        metric_ok = worst < 1e-12;
        metric_detail = format!("max deviation {worst:.3e}");
    }
    checks.push(Check::new("metric_factorization", metric_ok, metric_detail));

    // (ii) product structure on the slice
    let ca = l.algebra.structure_constants_f64();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let mut t = sample_point_f64(&mut rng, mn);
        for a in 1..m {
            for i in 1..n {
                t[a * n + i] = 0.0;
            }
        }
        let base_point: Vec<f64> = (0..m).map(|a| t[a * n]).collect();
        let cb = structure_functions(&l.base, &base_point);
        let cl = structure_functions(l, &t);
        for a in 0..m {
            for b in 0..m {
                for g in 0..m {
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                let expect = cb[idx3(m, a, b, g)] * ca[(i * n + j) * n + k];
                                let got = cl[idx3(mn, a * n + i, b * n + j, g * n + k)];
                                worst = worst.max(rel_diff(got, expect));
                            }
                        }
                    }
                }
            }
        }
    }
    checks.push(Check::new("product_structure", worst < 1e-10, format!("max deviation {worst:.3e}")));

    // (iii) Euler shape and quasi-homogeneity
    let shape_ok = (0..m).all(|a| {
        (0..n).all(|i| {
            let k = a * n + i;
            l.euler.charges[k] == l.base.euler.charges[a]
                && l.euler.shifts[k] == if i == 0 { l.base.euler.shifts[a].clone() } else { Q::zero() }
        })
    }) && l.euler.dimension == l.base.euler.dimension;
    checks.push(Check::new("euler_shape", shape_ok, "q_(αi) = q_α, r_(αi) = r_α δ_i1"));

    let mut quasi = 0.0_f64;
    let mut wdvv = 0.0_f64;
    for _ in 0..samples {
        let t = sample_point_f64(&mut rng, mn);
        quasi = quasi.max(quasi_homogeneity_residual(l, &t));
        wdvv = wdvv.max(wdvv_residual(l, &t));
    }
    let quasi_exact = l.polynomial.as_ref().map(|p| euler_defect(p, &l.euler).iter().all(|(deg, _)| *deg <= 2));
    let quasi_ok = quasi < 1e-9 && quasi_exact.unwrap_or(true);
    let detail = match quasi_exact {
        Some(ok) => format!("exact modulo quadratics: {ok}; max residual {quasi:.3e}"),
        None => format!("max residual {quasi:.3e}"),
    };
    checks.push(Check::new("quasi_homogeneity", quasi_ok, detail));
    checks.push(Check::new("wdvv", wdvv < 1e-9, format!("max residual {wdvv:.3e} at {samples} points")));

    let names = lifted_names(mn);
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    TensorReport {
        base: l.base.label.clone(),
        algebra: l.algebra.label().to_string(),
        dim: mn,
        checks,
        wdvv_max_residual: wdvv,
        quasi_homogeneity_max_residual: quasi,
        prepotential: l.polynomial.as_ref().map(|p| p.format_with(&name_refs)),
        polynomial_part: if l.polynomial.is_none() {
            l.polynomial_part().map(|p| p.format_with(&name_refs))
        } else {
            None
        },
    }
}

/// Monomials (degree, coefficient) of `E(P) − (3 − d)P`.
pub fn euler_defect(p: &PolynomialForm, euler: &EulerData) -> Vec<(u32, Q)> {
    use crate::scalar::Ring;
    let weights: Vec<Q> = euler.charges.iter().map(|c| Q::one() - c).collect();
    let mut e = p.weighted_euler(&weights);
    for (k, r) in euler.shifts.iter().enumerate() {
        if !r.is_zero() {
            e = e + p.differentiate(k).scale(r);
        }
    }
    let defect = e - p.scale(&(q(3) - &euler.dimension));
    defect.terms().map(|(m, c)| (m.degree(), c.clone())).collect()
}

/// Whether multiplication by a generic tangent vector is invertible at `t`.
pub fn generic_element_invertible<P: Prepotential + ?Sized>(p: &P, t: &[f64], x: &[f64]) -> bool {
    let m = p.dim();
    let c = structure_functions(p, t);
    let l: FMatrix = (0..m)
        .map(|g| (0..m).map(|b| (0..m).map(|a| x[a] * c[idx3(m, a, b, g)]).sum()).collect())
        .collect();
    det_f(&l).abs() > 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_symbols;

    #[test]
    fn cubic1d_structure() {
        let m = FrobeniusManifold::cubic1d();
        let c = structure_functions(&m, &[0.3]);
        assert_eq!(c, vec![1.0]);
        assert_eq!(wdvv_residual(&m, &[0.7]), 0.0);
        let g = intersection_form(&m, &[0.4]);
        assert!((g[0][0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn a2_at_origin() {
        let m = FrobeniusManifold::a2();
        let f3 = m.third_derivatives(&[0.0, 0.0]);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut idx = [a, b, c];
                    idx.sort();
                    let expect = if idx == [0, 0, 1] { 1.0 } else { 0.0 };
                    assert_eq!(f3[idx3(2, a, b, c)], expect);
                }
            }
        }
        assert_eq!(m.metric(), &vec![vec![q(0), q(1)], vec![q(1), q(0)]]);
    }

    #[test]
    fn unity_axiom() {
        let mut rng = seeded_rng(3);
        for m in [FrobeniusManifold::a2(), FrobeniusManifold::cp1()] {
            let t = sample_point_f64(&mut rng, 2);
            let c = structure_functions(&m, &t);
            for b in 0..2 {
                for g in 0..2 {
                    assert!((c[idx3(2, 0, b, g)] - if b == g { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn presets_verify() {
        for m in [FrobeniusManifold::cubic1d(), FrobeniusManifold::a2(), FrobeniusManifold::cp1()] {
            for c in m.verify(11, 20) {
                assert!(c.passed, "{} {}: {}", m.label(), c.name, c.detail);
            }
        }
    }

    #[test]
    fn corrupted_prepotential_breaks_wdvv() {
        let f = crate::expr::parse("1/2*t1^2*t2 + 1/2*t1*t2^2 - 1/72*t2^4 + t1*t2^3").unwrap();
        assert!(FrobeniusManifold::new(f, 2, EulerData::trivial(2), "bad").is_err());
        let f = crate::expr::parse("1/2*t1^2*t2 - 1/72*t2^4 + 1/10*t2^5").unwrap();
        let m = FrobeniusManifold::new(f, 2, EulerData::trivial(2), "bad").unwrap();
        // WDVV is vacuous in dimension 2 for F = ½t1²t2 + f(t2); use a 3-dim perturbation
        assert!(wdvv_residual(&m, &[0.3, 0.5]) < 1e-12);
        let f = crate::expr::parse("1/2*t1^2*t3 + 1/2*t1*t2^2 + t2^2*t3^2 + 1/3*t2*t3^3").unwrap();
        let m = FrobeniusManifold::new(f, 3, EulerData::trivial(3), "bad3").unwrap();
        assert!(wdvv_residual(&m, &[0.3, 0.5, -0.7]) > 1e-3);
    }

    #[test]
    fn metric_must_be_constant() {
        let f = crate::expr::parse("1/2*t1^2*t2 + t1^2*t2^2").unwrap();
        assert_eq!(
            FrobeniusManifold::new(f, 2, EulerData::trivial(2), "x").unwrap_err(),
            ManifoldError::MetricNotConstant(1, 2)
        );
    }

    #[test]
    fn a2_z2_closed_form() {
        let base = FrobeniusManifold::a2();
        let got = lift_polynomial_in_parameter(base.prepotential(), 2, |e| FrobeniusAlgebra::z2(e, &q(0), 2)).unwrap();
        let names = ["v1", "v2", "v3", "v4", "eps"];
        let expect = parse_with_symbols(
            "1/2*v1^2*v4 + v1*v2*v3 - 1/18*v3^3*v4 + eps*(1/2*v2^2*v4 - 1/18*v3*v4^3)",
            &names,
        )
        .unwrap()
        .to_polynomial()
        .unwrap();
        assert_eq!(got, expect);
    }

    #[test]
    fn trivial_algebra_lift_is_identity() {
        for base in [FrobeniusManifold::a2(), FrobeniusManifold::cubic1d()] {
            let lifted = tensor_with_algebra(&base, &FrobeniusAlgebra::trivial()).unwrap();
            assert_eq!(lifted.polynomial(), base.polynomial());
        }
    }

    #[test]
    fn one_dim_lift_is_algebra_manifold() {
        let alg = FrobeniusAlgebra::zn(3, 1).unwrap();
        let lifted = tensor_with_algebra(&FrobeniusManifold::cubic1d(), &alg).unwrap();
        let direct = FrobeniusManifold::from_algebra(&alg);
        assert_eq!(lifted.polynomial(), direct.polynomial());
    }

    #[test]
    fn newton_interpolation_recovers_polynomial() {
        let target = crate::expr::parse("3*t1*t2^2 - t2 + 1/2").unwrap().to_polynomial().unwrap();
        let nodes: Vec<Q> = (1..=4).map(q).collect();
        let values: Vec<PolynomialForm> = nodes.iter().map(|x| target.specialize(1, x)).collect();
        assert_eq!(newton_interpolate(&nodes, &values, 1), target);
    }
}
