//! Scalar and algebra-valued evaluation.
//!
//! `eval_algebra` is the hat map: every variable is replaced by an algebra
//! element and the tree is evaluated with the algebra product. Only `exp`
//! depends on the coefficient ring, see [`ExpRing`].

use num_traits::{One, Zero};

use super::{ExprError, Expression, PolynomialForm};
use crate::algebra::FrobeniusAlgebra;
use crate::scalar::{Ring, Q};

/// Coefficient rings in which `exp` can be evaluated (possibly partially).
pub trait ExpRing: Ring {
    fn scalar_exp(x: &Self) -> Result<Self, ExprError>;
    fn algebra_exp(alg: &FrobeniusAlgebra, a: &[Self]) -> Result<Vec<Self>, ExprError>;
}

impl ExpRing for f64 {
    fn scalar_exp(x: &Self) -> Result<Self, ExprError> {
        Ok(x.exp())
    }
    fn algebra_exp(alg: &FrobeniusAlgebra, a: &[Self]) -> Result<Vec<Self>, ExprError> {
        Ok(alg.exp_f64(a))
    }
}

/// Exact only for nilpotent arguments.
impl ExpRing for Q {
    fn scalar_exp(x: &Self) -> Result<Self, ExprError> {
        if x.is_zero() {
            Ok(Q::one())
        } else {
            Err(ExprError::ExpNotExact)
        }
    }
    fn algebra_exp(alg: &FrobeniusAlgebra, a: &[Self]) -> Result<Vec<Self>, ExprError> {
        alg.exp_nilpotent(a).ok_or(ExprError::ExpNotExact)
    }
}

/// Polynomial only for nilpotent arguments.
impl ExpRing for PolynomialForm {
    fn scalar_exp(x: &Self) -> Result<Self, ExprError> {
        if x.is_zero() {
            Ok(PolynomialForm::one())
        } else {
            Err(ExprError::ExpNotPolynomial)
        }
    }
    fn algebra_exp(alg: &FrobeniusAlgebra, a: &[Self]) -> Result<Vec<Self>, ExprError> {
        alg.exp_nilpotent(a).ok_or(ExprError::ExpNotPolynomial)
    }
}

fn ring_pow<T: Clone + One>(base: &T, n: u32, mul: impl Fn(&T, &T) -> T) -> T {
    let mut result = T::one();
    let mut b = base.clone();
    let mut k = n;
    let mut first = true;
    while k > 0 {
        if k & 1 == 1 {
            result = if first { b.clone() } else { mul(&result, &b) };
            first = false;
        }
        k >>= 1;
        if k > 0 {
            b = mul(&b, &b);
        }
    }
    result
}

impl Expression {
    fn check_arity(&self, len: usize) -> Result<(), ExprError> {
        let need = self.arity();
        if len < need {
            return Err(ExprError::Arity { expected: need, found: len });
        }
        Ok(())
    }

    /// Evaluation in a commutative coefficient ring.
    pub fn eval_in<T: ExpRing>(&self, point: &[T]) -> Result<T, ExprError> {
        self.check_arity(point.len())?;
        self.eval_ring(point)
    }

    fn eval_ring<T: ExpRing>(&self, point: &[T]) -> Result<T, ExprError> {
        Ok(match self {
            Expression::Const(c) => T::from_rational(c),
            Expression::Var(i) => point[*i].clone(),
            Expression::Sum(v) => {
                let mut acc = T::zero();
                for c in v {
                    acc = acc + c.eval_ring(point)?;
                }
                acc
            }
            Expression::Product(v) => {
                let mut acc = T::one();
                for c in v {
                    acc = acc * c.eval_ring(point)?;
                }
                acc
            }
            Expression::Pow(b, n) => ring_pow(&b.eval_ring(point)?, *n, |x, y| x.clone() * y.clone()),
            Expression::Exp(g) => T::scalar_exp(&g.eval_ring(point)?)?,
        })
    }

    pub fn eval_scalar(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.eval_in(point)
    }

    /// Exact rational value; `exp` is only accepted at zero.
    pub fn eval_exact(&self, point: &[Q]) -> Result<Q, ExprError> {
        self.eval_in(point)
    }

    /// The hat map `f ↦ f̂`: variable `α` takes the element `point[α]`.
    pub fn eval_algebra<T: ExpRing>(&self, alg: &FrobeniusAlgebra, point: &[Vec<T>]) -> Result<Vec<T>, ExprError> {
        self.check_arity(point.len())?;
        for p in point {
            if p.len() != alg.dim() {
                return Err(crate::algebra::AlgebraError::DimensionMismatch { expected: alg.dim(), found: p.len() }.into());
            }
        }
        self.eval_hat(alg, point)
    }

    fn eval_hat<T: ExpRing>(&self, alg: &FrobeniusAlgebra, point: &[Vec<T>]) -> Result<Vec<T>, ExprError> {
        Ok(match self {
            Expression::Const(c) => {
                let mut e = alg.unit::<T>();
                e[0] = T::from_rational(c);
                e
            }
            Expression::Var(i) => point[*i].clone(),
            Expression::Sum(v) => {
                let mut acc = vec![T::zero(); alg.dim()];
                for c in v {
                    let x = c.eval_hat(alg, point)?;
                    acc = acc.into_iter().zip(x).map(|(a, b)| a + b).collect();
                }
                acc
            }
            Expression::Product(v) => {
                let mut acc = alg.unit::<T>();
                for c in v {
                    acc = alg.mul_unchecked(&acc, &c.eval_hat(alg, point)?);
                }
                acc
            }
            Expression::Pow(b, n) => {
                let base = b.eval_hat(alg, point)?;
                if *n == 0 {
                    alg.unit::<T>()
                } else {
                    let mut result: Option<Vec<T>> = None;
                    let mut sq = base;
                    let mut k = *n;
                    while k > 0 {
                        if k & 1 == 1 {
                            result = Some(match result {
                                None => sq.clone(),
                                Some(r) => alg.mul_unchecked(&r, &sq),
                            });
                        }
                        k >>= 1;
                        if k > 0 {
                            sq = alg.mul_unchecked(&sq, &sq);
                        }
                    }
                    result.unwrap()
                }
            }
            Expression::Exp(g) => T::algebra_exp(alg, &g.eval_hat(alg, point)?)?,
        })
    }
}
