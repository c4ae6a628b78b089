//! Analytic expressions in flat coordinates: rationals, variables, sums,
//! products, non-negative integer powers and `exp`.

mod eval;
mod parse;
mod poly;

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::scalar::{format_rational, q, Q};

pub use eval::ExpRing;
pub use parse::{parse, parse_with_symbols};
pub use poly::{CompiledPolynomial, Monomial, PolynomialForm};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("division by a non-constant expression at {pos}")]
    DivisionByNonConstant { pos: usize },
    #[error("division by zero at {pos}")]
    DivisionByZero { pos: usize },
    #[error("exponent at {pos} must be a non-negative integer literal")]
    BadExponent { pos: usize },
    #[error("unknown identifier {name:?} at {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("expected {expected} arguments, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("exp has no polynomial form")]
    ExpNotPolynomial,
    #[error("exp of this argument is not exactly representable")]
    ExpNotExact,
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expression {
    Const(Q),
    Var(usize),
    Sum(Vec<Expression>),
    Product(Vec<Expression>),
    Pow(Box<Expression>, u32),
    Exp(Box<Expression>),
}

impl Expression {
    pub fn constant(c: Q) -> Self {
        Expression::Const(c)
    }

    pub fn int(n: i64) -> Self {
        Expression::Const(q(n))
    }

    pub fn var(i: usize) -> Self {
        Expression::Var(i)
    }

    pub fn pow(self, n: u32) -> Self {
        Expression::Pow(Box::new(self), n)
    }

    pub fn exp(self) -> Self {
        Expression::Exp(Box::new(self))
    }

    /// One more than the largest variable index used; zero for constants.
    pub fn arity(&self) -> usize {
        match self {
            Expression::Const(_) => 0,
            Expression::Var(i) => i + 1,
            Expression::Sum(v) | Expression::Product(v) => v.iter().map(Self::arity).max().unwrap_or(0),
            Expression::Pow(b, _) | Expression::Exp(b) => b.arity(),
        }
    }

    pub fn has_exp(&self) -> bool {
        match self {
            Expression::Const(_) | Expression::Var(_) => false,
            Expression::Sum(v) | Expression::Product(v) => v.iter().any(Self::has_exp),
            Expression::Pow(b, _) => b.has_exp(),
            Expression::Exp(_) => true,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.arity() == 0
    }

    pub fn as_const(&self) -> Option<&Q> {
        match self {
            Expression::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Negation that folds into a leading constant where possible.
    pub fn negate(self) -> Self {
        match self {
            Expression::Const(c) => Expression::Const(-c),
            Expression::Product(mut v) => {
                if let Some(Expression::Const(c)) = v.first_mut() {
                    *c = -c.clone();
                    Expression::Product(v)
                } else {
                    v.insert(0, Expression::int(-1));
                    Expression::Product(v)
                }
            }
            other => Expression::Product(vec![Expression::int(-1), other]),
        }
    }

    /// Exact partial derivative with respect to variable `i`, simplified.
    pub fn differentiate(&self, i: usize) -> Self {
        self.derive_raw(i).simplify()
    }

    pub fn differentiate_many(&self, vars: &[usize]) -> Self {
        vars.iter().fold(self.clone(), |acc, &v| acc.differentiate(v))
    }

    fn derive_raw(&self, i: usize) -> Self {
        match self {
            Expression::Const(_) => Expression::int(0),
            Expression::Var(j) => Expression::int(if *j == i { 1 } else { 0 }),
            Expression::Sum(v) => Expression::Sum(v.iter().map(|c| c.derive_raw(i)).collect()),
            Expression::Product(v) => Expression::Sum(
                (0..v.len())
                    .map(|k| {
                        let mut factors = v.clone();
                        factors[k] = v[k].derive_raw(i);
                        Expression::Product(factors)
                    })
                    .collect(),
            ),
            Expression::Pow(b, n) => {
                if *n == 0 {
                    Expression::int(0)
                } else {
                    Expression::Product(vec![
                        Expression::int(*n as i64),
                        Expression::Pow(b.clone(), n - 1),
                        b.derive_raw(i),
                    ])
                }
            }
            Expression::Exp(g) => Expression::Product(vec![self.clone(), g.derive_raw(i)]),
        }
    }

    /// Local algebraic cleanup: flattens nested sums and products, folds
    /// constants, removes neutral elements and trivial powers. Does not expand.
    pub fn simplify(&self) -> Self {
        match self {
            Expression::Const(_) | Expression::Var(_) => self.clone(),
            Expression::Sum(v) => {
                let mut constant = Q::zero();
                let mut rest = Vec::new();
                for c in v.iter().map(Self::simplify) {
                    match c {
                        Expression::Const(k) => constant += k,
                        Expression::Sum(inner) => {
                            for t in inner {
                                match t {
                                    Expression::Const(k) => constant += k,
                                    t => rest.push(t),
                                }
                            }
                        }
                        t => rest.push(t),
                    }
                }
                if !constant.is_zero() {
                    rest.insert(0, Expression::Const(constant));
                }
                match rest.len() {
                    0 => Expression::int(0),
                    1 => rest.pop().unwrap(),
                    _ => Expression::Sum(rest),
                }
            }
            Expression::Product(v) => {
                let mut constant = Q::one();
                let mut rest = Vec::new();
                for c in v.iter().map(Self::simplify) {
                    match c {
                        Expression::Const(k) => constant *= k,
                        Expression::Product(inner) => {
                            for t in inner {
                                match t {
                                    Expression::Const(k) => constant *= k,
                                    t => rest.push(t),
                                }
                            }
                        }
                        t => rest.push(t),
                    }
                }
                if constant.is_zero() {
                    return Expression::int(0);
                }
                if !constant.is_one() || rest.is_empty() {
                    rest.insert(0, Expression::Const(constant));
                }
                match rest.len() {
                    1 => rest.pop().unwrap(),
                    _ => Expression::Product(rest),
                }
            }
            Expression::Pow(b, n) => {
                let b = b.simplify();
                match (b, *n) {
                    (_, 0) => Expression::int(1),
                    (b, 1) => b,
                    (Expression::Const(c), n) => Expression::Const(num_traits::pow(c, n as usize)),
                    (Expression::Pow(inner, m), n) => Expression::Pow(inner, m * n),
                    (b, n) => Expression::Pow(Box::new(b), n),
                }
            }
            Expression::Exp(g) => match g.simplify() {
                Expression::Const(c) if c.is_zero() => Expression::int(1),
                g => Expression::Exp(Box::new(g)),
            },
        }
    }

    /// Replaces every variable `i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Expression]) -> Self {
        match self {
            Expression::Const(_) => self.clone(),
            Expression::Var(i) => subs[*i].clone(),
            Expression::Sum(v) => Expression::Sum(v.iter().map(|c| c.substitute(subs)).collect()),
            Expression::Product(v) => Expression::Product(v.iter().map(|c| c.substitute(subs)).collect()),
            Expression::Pow(b, n) => Expression::Pow(Box::new(b.substitute(subs)), *n),
            Expression::Exp(g) => Expression::Exp(Box::new(g.substitute(subs))),
        }
    }

    /// Text form using the given variable names (`t1, t2, ...` past the end).
    pub fn to_string_with(&self, names: &[&str]) -> String {
        let mut out = String::new();
        self.write_top(&mut out, names);
        out
    }

    fn write(&self, out: &mut String, names: &[&str]) {
        match self {
            Expression::Const(c) => {
                if c.is_negative() || !c.is_integer() {
                    out.push('(');
                    out.push_str(&format_rational(c));
                    out.push(')');
                } else {
                    out.push_str(&format_rational(c));
                }
            }
            Expression::Var(i) => out.push_str(&var_name(*i, names)),
            Expression::Sum(v) => {
                for (k, c) in v.iter().enumerate() {
                    if k > 0 {
                        out.push_str(" + ");
                    }
                    match c {
                        Expression::Sum(_) => c.write_paren(out, names),
                        Expression::Const(x) => out.push_str(&format_rational(x)),
                        Expression::Product(_) => c.write_product(out, names),
                        _ => c.write(out, names),
                    }
                }
            }
            Expression::Product(_) => self.write_product(out, names),
            Expression::Pow(b, n) => {
                match b.as_ref() {
                    Expression::Var(_) | Expression::Exp(_) => b.write(out, names),
                    Expression::Const(c) if !c.is_negative() && c.is_integer() => b.write(out, names),
                    _ => b.write_paren(out, names),
                }
                out.push('^');
                out.push_str(&n.to_string());
            }
            Expression::Exp(g) => {
                out.push_str("exp(");
                g.write_top(out, names);
                out.push(')');
            }
        }
    }

    /// Products print their leading constant bare (`-1/2*t1`); every other
    /// non-integer or negative constant factor is parenthesized.
    fn write_product(&self, out: &mut String, names: &[&str]) {
        let Expression::Product(v) = self else {
            return self.write(out, names);
        };
        for (k, c) in v.iter().enumerate() {
            if k > 0 {
                out.push('*');
            }
            match c {
                Expression::Const(x) if k == 0 => out.push_str(&format_rational(x)),
                Expression::Sum(_) | Expression::Product(_) => c.write_paren(out, names),
                _ => c.write(out, names),
            }
        }
    }

    fn write_paren(&self, out: &mut String, names: &[&str]) {
        out.push('(');
        self.write_top(out, names);
        out.push(')');
    }

    fn write_top(&self, out: &mut String, names: &[&str]) {
        match self {
            Expression::Const(x) => out.push_str(&format_rational(x)),
            Expression::Product(_) => self.write_product(out, names),
            _ => self.write(out, names),
        }
    }
}

pub(crate) fn var_name(i: usize, names: &[&str]) -> String {
    names.get(i).map_or_else(|| format!("t{}", i + 1), |s| s.to_string())
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_with(&[]))
    }
}

impl std::str::FromStr for Expression {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
