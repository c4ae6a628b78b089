//! Sparse multivariate polynomials with exact rational coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use super::{var_name, ExprError, Expression};
use crate::scalar::{format_rational, to_f64, Ring, Q};

/// Exponent multi-index with trailing zeros trimmed, ordered by total degree
/// and then lexicographically with higher powers of earlier variables first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(mut exps: Vec<u32>) -> Self {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        Monomial(exps)
    }

    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(i: usize) -> Self {
        let mut e = vec![0; i + 1];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn exponent(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        Monomial::new((0..n).map(|i| self.exponent(i) + other.exponent(i)).collect())
    }

    fn write(&self, out: &mut String, names: &[&str]) {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                out.push('*');
            }
            first = false;
            out.push_str(&var_name(i, names));
            if e > 1 {
                out.push('^');
                out.push_str(&e.to_string());
            }
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical polynomial: no zero coefficients are stored, so structural
/// equality is mathematical equality.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolynomialForm {
    terms: BTreeMap<Monomial, Q>,
}

impl PolynomialForm {
    pub fn constant(c: Q) -> Self {
        let mut p = Self::default();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(i: usize) -> Self {
        let mut p = Self::default();
        p.add_term(Monomial::var(i), Q::one());
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Q)>) -> Self {
        let mut p = Self::default();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(m).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exps: &[u32]) -> Q {
        self.terms.get(&Monomial::new(exps.to_vec())).cloned().unwrap_or_else(Q::zero)
    }

    /// Largest total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Number of variables actually referenced (largest index + 1).
    pub fn nvars(&self) -> usize {
        self.terms.keys().map(|m| m.0.len()).max().unwrap_or(0)
    }

    pub fn differentiate(&self, i: usize) -> Self {
        let mut out = Self::default();
        for (m, c) in &self.terms {
            let e = m.exponent(i);
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[i] -= 1;
            out.add_term(Monomial::new(exps), c * Q::from_integer(e.into()));
        }
        out
    }

    pub fn differentiate_many(&self, vars: &[usize]) -> Self {
        vars.iter().fold(self.clone(), |acc, &v| acc.differentiate(v))
    }

    /// Applies the weighted Euler operator `Σ_i w_i t_i ∂_i`.
    pub fn weighted_euler(&self, weights: &[Q]) -> Self {
        let mut out = Self::default();
        for (m, c) in &self.terms {
            let w = m.0.iter().enumerate().fold(Q::zero(), |acc, (i, &e)| {
                acc + weights.get(i).cloned().unwrap_or_else(Q::zero) * Q::from_integer(e.into())
            });
            out.add_term(m.clone(), c * w);
        }
        out
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.0.iter()
                    .enumerate()
                    .fold(to_f64(c), |acc, (i, &e)| acc * point[i].powi(e as i32))
            })
            .sum()
    }

    pub fn eval_exact(&self, point: &[Q]) -> Q {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.0.iter()
                    .enumerate()
                    .fold(c.clone(), |acc, (i, &e)| acc * num_traits::pow(point[i].clone(), e as usize))
            })
            .fold(Q::zero(), |a, b| a + b)
    }

    /// Substitutes `t_var = value` and returns the resulting polynomial.
    pub fn specialize(&self, var: usize, value: &Q) -> Self {
        let mut out = Self::default();
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            let mut exps = m.0.clone();
            if e > 0 {
                exps[var] = 0;
            }
            out.add_term(Monomial::new(exps), c * num_traits::pow(value.clone(), e as usize));
        }
        out
    }

    /// Collects the coefficient of `t_var^k` for each `k`.
    pub fn coefficients_in(&self, var: usize) -> Vec<Self> {
        let top = self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0) as usize;
        let mut out = vec![Self::default(); top + 1];
        for (m, c) in &self.terms {
            let e = m.exponent(var) as usize;
            let mut exps = m.0.clone();
            if e > 0 {
                exps[var] = 0;
            }
            out[e].add_term(Monomial::new(exps), c.clone());
        }
        out
    }

    pub fn to_expression(&self) -> Expression {
        let terms: Vec<Expression> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut factors = Vec::new();
                if !c.is_one() || m.0.iter().all(|&e| e == 0) {
                    factors.push(Expression::Const(c.clone()));
                }
                for (i, &e) in m.0.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => factors.push(Expression::Var(i)),
                        e => factors.push(Expression::var(i).pow(e)),
                    }
                }
                if factors.len() == 1 {
                    factors.pop().unwrap()
                } else {
                    Expression::Product(factors)
                }
            })
            .collect();
        match terms.len() {
            0 => Expression::int(0),
            1 => terms.into_iter().next().unwrap(),
            _ => Expression::Sum(terms),
        }
    }

    /// Canonical text, e.g. `1/2*t1^2*t2 - 1/72*t2^4`.
    pub fn format_with(&self, names: &[&str]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (k, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let a = c.abs();
            if m.degree() == 0 {
                out.push_str(&format_rational(&a));
                continue;
            }
            if !a.is_one() {
                out.push_str(&format_rational(&a));
                out.push('*');
            }
            m.write(&mut out, names);
        }
        out
    }
}

/// Double-precision evaluator with the monomial structure unpacked.
#[derive(Debug, Clone, Default)]
pub struct CompiledPolynomial {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
}

impl CompiledPolynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (c, factors) in &self.terms {
            let mut v = *c;
            for &(i, e) in factors {
                v *= match e {
                    1 => x[i],
                    2 => x[i] * x[i],
                    e => x[i].powi(e as i32),
                };
            }
            total += v;
        }
        total
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl PolynomialForm {
    pub fn compile(&self) -> CompiledPolynomial {
        CompiledPolynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let factors = m.0.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, &e)| (i, e)).collect();
                    (to_f64(c), factors)
                })
                .collect(),
        }
    }
}

impl fmt::Display for PolynomialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format_with(&[]))
    }
}

impl Zero for PolynomialForm {
    fn zero() -> Self {
        Self::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for PolynomialForm {
    fn one() -> Self {
        Self::constant(Q::one())
    }
}

impl Add for PolynomialForm {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Add for &PolynomialForm {
    type Output = PolynomialForm;
    fn add(self, rhs: Self) -> PolynomialForm {
        self.clone() + rhs.clone()
    }
}

impl AddAssign<&PolynomialForm> for PolynomialForm {
    fn add_assign(&mut self, rhs: &PolynomialForm) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl Sub for &PolynomialForm {
    type Output = PolynomialForm;
    fn sub(self, rhs: Self) -> PolynomialForm {
        self.clone() - rhs.clone()
    }
}

impl Sub for PolynomialForm {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for PolynomialForm {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.terms.values_mut().for_each(|c| *c = -c.clone());
        self
    }
}

impl Mul for PolynomialForm {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl Mul for &PolynomialForm {
    type Output = PolynomialForm;
    fn mul(self, rhs: Self) -> PolynomialForm {
        let mut out = PolynomialForm::default();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Ring for PolynomialForm {
    fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::default();
        }
        let mut p = self.clone();
        p.terms.values_mut().for_each(|v| *v *= c);
        p
    }
    fn from_rational(c: &Q) -> Self {
        Self::constant(c.clone())
    }
}

impl Expression {
    /// Expands an exp-free tree into canonical polynomial form.
    pub fn to_polynomial(&self) -> Result<PolynomialForm, ExprError> {
        Ok(match self {
            Expression::Const(c) => PolynomialForm::constant(c.clone()),
            Expression::Var(i) => PolynomialForm::var(*i),
            Expression::Sum(v) => {
                let mut acc = PolynomialForm::default();
                for c in v {
                    acc = acc + c.to_polynomial()?;
                }
                acc
            }
            Expression::Product(v) => {
                let mut acc = PolynomialForm::one();
                for c in v {
                    acc = &acc * &c.to_polynomial()?;
                }
                acc
            }
            Expression::Pow(b, n) => {
                let base = b.to_polynomial()?;
                let mut acc = PolynomialForm::one();
                for _ in 0..*n {
                    acc = &acc * &base;
                }
                acc
            }
            Expression::Exp(_) => return Err(ExprError::ExpNotPolynomial),
        })
    }
}
