//! Periodic uniform grids and algebra-valued fields on them.
//!
//! A [`FieldGrid`] stores `fields × comps` real arrays; component `(α, i)`
//! is array `α·comps + i`, matching the flattening of lifted coordinates.
//! Derivatives are spectral.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::algebra::FrobeniusAlgebra;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("domain length must be positive, got {0}")]
    BadLength(f64),
    #[error("inverse derivative needs a zero-mean field, mean is {0:e}")]
    NonzeroMean(f64),
    #[error("operator 1 + D^2 is singular at wavenumber {0}")]
    Resonant(f64),
    #[error("field shape mismatch: {0}")]
    Shape(String),
}

struct Spectral {
    length: f64,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

/// Periodic grid `x_j = j L / M`, `j = 0..M`, with cached transforms.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<Spectral>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid(L = {}, M = {})", self.inner.length, self.inner.points)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.length == other.inner.length && self.inner.points == other.inner.points
    }
}

impl Grid {
    pub fn new(length: f64, points: usize) -> Result<Self, FieldError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(FieldError::BadLength(length));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(FieldError::NotPowerOfTwo(points));
        }
        let mut planner = FftPlanner::new();
        let scale = 2.0 * std::f64::consts::PI / length;
        let wavenumbers = (0..points)
            .map(|m| {
                let signed = if m <= points / 2 { m as f64 } else { m as f64 - points as f64 };
                signed * scale
            })
            .collect();
        Ok(Self {
            inner: Arc::new(Spectral {
                length,
                points,
                forward: planner.plan_fft_forward(points),
                inverse: planner.plan_fft_inverse(points),
                wavenumbers,
            }),
        })
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn points(&self) -> usize {
        self.inner.points
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Signed wavenumbers `2πm/L` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    fn to_spectrum(&self, f: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.inner.forward.process(&mut buf);
        buf
    }

    fn values_from_spectrum(&self, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
        self.inner.inverse.process(&mut buf);
        let inv = 1.0 / self.inner.points as f64;
        buf.iter().map(|c| c.re * inv).collect()
    }

    /// Applies the Fourier multiplier `symbol(k)`.
    pub fn apply_multiplier(&self, f: &[f64], symbol: impl Fn(f64) -> Complex<f64>) -> Vec<f64> {
        let mut spec = self.to_spectrum(f);
        for (c, &k) in spec.iter_mut().zip(&self.inner.wavenumbers) {
            *c *= symbol(k);
        }
        self.values_from_spectrum(spec)
    }

    /// `d^order f / dx^order`; the Nyquist mode is dropped for odd orders.
    pub fn derivative(&self, f: &[f64], order: u32) -> Vec<f64> {
        if order == 0 {
            return f.to_vec();
        }
        let nyquist = self.inner.points / 2;
        let mut spec = self.to_spectrum(f);
        for (m, c) in spec.iter_mut().enumerate() {
            if order % 2 == 1 && m == nyquist {
                *c = Complex::new(0.0, 0.0);
                continue;
            }
            *c *= Complex::new(0.0, self.inner.wavenumbers[m]).powu(order);
        }
        self.values_from_spectrum(spec)
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }

    /// `∫_0^L f dx` by the trapezoidal rule (spectrally accurate here).
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.spacing()
    }

    /// Zero-mean antiderivative of a zero-mean field.
    pub fn antiderivative(&self, f: &[f64]) -> Result<Vec<f64>, FieldError> {
        let mean = self.mean(f);
        if mean.abs() > 1e-10 {
            return Err(FieldError::NonzeroMean(mean));
        }
        Ok(self.inverse_derivative(f))
    }

    /// `D⁻¹` on the zero-mean part of `f`: the mean is projected out first,
    /// the result has zero mean. This is the skew-adjoint inverse used
    /// inside non-local operators.
    pub fn inverse_derivative(&self, f: &[f64]) -> Vec<f64> {
        let nyquist = self.inner.points / 2;
        let mut spec = self.to_spectrum(f);
        for (m, c) in spec.iter_mut().enumerate() {
            let k = self.inner.wavenumbers[m];
            if m == 0 || m == nyquist {
                *c = Complex::new(0.0, 0.0);
            } else {
                *c /= Complex::new(0.0, k);
            }
        }
        self.values_from_spectrum(spec)
    }

    /// Fourth-order central differences, for cross-checking.
    pub fn fd_derivative(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let h = self.spacing();
        (0..n)
            .map(|j| {
                let at = |o: isize| f[(j as isize + o).rem_euclid(n as isize) as usize];
                (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
            })
            .collect()
    }
}

/// `fields` algebra-valued fields with `comps` coefficients each.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    grid: Grid,
    fields: usize,
    comps: usize,
    data: Vec<Vec<f64>>,
}

impl FieldGrid {
    pub fn zeros(grid: &Grid, fields: usize, comps: usize) -> Self {
        Self { grid: grid.clone(), fields, comps, data: vec![vec![0.0; grid.points()]; fields * comps] }
    }

    /// Builds values from `f(x, field, comp)`.
    pub fn from_fn(grid: &Grid, fields: usize, comps: usize, f: impl Fn(f64, usize, usize) -> f64) -> Self {
        let data = (0..fields * comps)
            .map(|a| (0..grid.points()).map(|j| f(grid.x(j), a / comps, a % comps)).collect())
            .collect();
        Self { grid: grid.clone(), fields, comps, data }
    }

    pub fn from_components(grid: &Grid, fields: usize, comps: usize, data: Vec<Vec<f64>>) -> Result<Self, FieldError> {
        if data.len() != fields * comps || data.iter().any(|d| d.len() != grid.points()) {
            return Err(FieldError::Shape(format!("expected {} arrays of {}", fields * comps, grid.points())));
        }
        Ok(Self { grid: grid.clone(), fields, comps, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fields(&self) -> usize {
        self.fields
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    /// Number of scalar component arrays, `fields · comps`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.data
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.data
    }

    pub fn component(&self, field: usize, comp: usize) -> &[f64] {
        &self.data[field * self.comps + comp]
    }

    /// Algebra element of `field` at grid point `j`.
    pub fn element(&self, field: usize, j: usize) -> Vec<f64> {
        (0..self.comps).map(|i| self.data[field * self.comps + i][j]).collect()
    }

    /// All scalar components at grid point `j`.
    pub fn point(&self, j: usize) -> Vec<f64> {
        self.data.iter().map(|d| d[j]).collect()
    }

    pub fn with_components(&self, data: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { grid: self.grid.clone(), fields: self.fields, comps: self.comps, data }
    }

    pub fn derivative(&self, order: u32) -> Self {
        self.with_components(self.data.iter().map(|d| self.grid.derivative(d, order)).collect())
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            for (xv, yv) in x.iter_mut().zip(y) {
                *xv += a * yv;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.with_components(self.data.iter().map(|d| d.iter().map(|v| v * a).collect()).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .flatten()
            .zip(other.data.iter().flatten())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Pointwise algebra product of two `comps`-component fields.
pub fn algebra_product(alg: &FrobeniusAlgebra, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = alg.dim();
    let points = a[0].len();
    let mut out = vec![vec![0.0; points]; n];
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    for j in 0..points {
        for i in 0..n {
            x[i] = a[i][j];
            y[i] = b[i][j];
        }
        alg.mul_f64_into(&x, &y, &mut z);
        for i in 0..n {
            out[i][j] = z[i];
        }
    }
    out
}

/// Componentwise sum `Σ_k c_k · f_k` of equally shaped component lists.
pub fn linear_combination(terms: &[(f64, &[Vec<f64>])]) -> Vec<Vec<f64>> {
    let (_, first) = terms[0];
    let mut out = vec![vec![0.0; first[0].len()]; first.len()];
    for (c, f) in terms {
        for (o, x) in out.iter_mut().zip(f.iter()) {
            for (ov, xv) in o.iter_mut().zip(x) {
                *ov += c * xv;
            }
        }
    }
    out
}

/// Seeded smooth initial data: each component is a sum of three low
/// Fourier modes (wavenumbers 1..=3) with amplitudes summing to at most
/// `amplitude`, plus `offset` on every component.
pub fn smooth_random_field(
    grid: &Grid,
    fields: usize,
    comps: usize,
    amplitude: f64,
    offset: f64,
    rng: &mut impl rand::Rng,
) -> FieldGrid {
    let two_pi_l = 2.0 * std::f64::consts::PI / grid.length();
    let modes: Vec<[(f64, f64); 3]> = (0..fields * comps)
        .map(|_| {
            let mut m = [(0.0, 0.0); 3];
            for slot in m.iter_mut() {
                let a = rng.random_range(-1.0..1.0) * amplitude / 3.0;
                *slot = (a, rng.random_range(0.0..std::f64::consts::TAU));
            }
            m
        })
        .collect();
    FieldGrid::from_fn(grid, fields, comps, |x, f, c| {
        let m = &modes[f * comps + c];
        offset + m.iter().enumerate().map(|(k, (a, p))| a * ((k + 1) as f64 * two_pi_l * x + p).sin()).sum::<f64>()
    })
}
