//! Numerical checks shared by every Poisson operator on periodic fields.
//!
//! States and covectors are lists of component arrays on a common grid.
//! For the linear functionals `F_a[u] = ∫ a·u` the bracket is
//! `{F_a, F_b}[u] = ∫ a·P(u)b`, so skew-symmetry and the Jacobi identity can
//! be tested on arbitrary smooth test covectors.

use crate::field::Grid;

pub trait FieldOperator {
    /// Number of scalar components acted on.
    fn components(&self) -> usize;

    /// `P(u)ξ`, one output array per component.
    fn apply(&self, grid: &Grid, state: &[Vec<f64>], covector: &[Vec<f64>]) -> Vec<Vec<f64>>;
}

pub fn pairing(grid: &Grid, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| grid.integrate(&mul(x, y))).sum()
}

fn abs_pairing(grid: &Grid, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| grid.integrate(&x.iter().zip(y).map(|(p, q)| (p * q).abs()).collect::<Vec<_>>()))
        .sum()
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn shifted(u: &[Vec<f64>], v: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    u.iter().zip(v).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + h * y).collect()).collect()
}

fn sup(u: &[Vec<f64>]) -> f64 {
    u.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `|⟨a, Pb⟩ + ⟨b, Pa⟩|` relative to `∫|a·Pb| + ∫|b·Pa|`.
pub fn skew_adjointness_defect<P: FieldOperator + ?Sized>(
    op: &P,
    grid: &Grid,
    state: &[Vec<f64>],
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> f64 {
    let pa = op.apply(grid, state, a);
    let pb = op.apply(grid, state, b);
    let sum = pairing(grid, a, &pb) + pairing(grid, b, &pa);
    let scale = abs_pairing(grid, a, &pb) + abs_pairing(grid, b, &pa);
    if scale == 0.0 {
        0.0
    } else {
        sum.abs() / scale
    }
}

pub fn bracket<P: FieldOperator + ?Sized>(op: &P, grid: &Grid, state: &[Vec<f64>], a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    pairing(grid, a, &op.apply(grid, state, b))
}

/// Derivative of `g` at `u` along `v` by Richardson-extrapolated central
/// differences; exact for `g` polynomial of degree at most four in the shift.
pub fn directional_derivative(g: impl Fn(&[Vec<f64>]) -> f64, u: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
    let h = 1e-2 * (1.0 + sup(u)) / sup(v).max(1e-300);
    let central = |h: f64| (g(&shifted(u, v, h)) - g(&shifted(u, v, -h))) / (2.0 * h);
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiDefect {
    /// Cyclic sum `{{F_a,F_b},F_c} + {{F_b,F_c},F_a} + {{F_c,F_a},F_b}`.
    pub absolute: f64,
    /// Largest single term of the cyclic sum.
    pub scale: f64,
}

impl JacobiDefect {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.absolute
        } else {
            self.absolute / self.scale
        }
    }
}

/// Jacobi identity on three linear functionals. `{F_a,F_b}` has gradient
/// `δ{F_a,F_b}`, so `{{F_a,F_b},F_c}[u]` is the derivative of `{F_a,F_b}`
/// along `P(u)c`.
pub fn jacobi_defect<P: FieldOperator + ?Sized>(
    op: &P,
    grid: &Grid,
    state: &[Vec<f64>],
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    c: &[Vec<f64>],
) -> JacobiDefect {
    let term = |x: &[Vec<f64>], y: &[Vec<f64>], z: &[Vec<f64>]| {
        let flow = op.apply(grid, state, z);
        directional_derivative(|w| bracket(op, grid, w, x, y), state, &flow)
    };
    let terms = [term(a, b, c), term(b, c, a), term(c, a, b)];
    JacobiDefect {
        absolute: terms.iter().sum::<f64>().abs(),
        scale: terms.iter().fold(0.0_f64, |m, t| m.max(t.abs())),
    }
}
