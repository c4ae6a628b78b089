//! Finite-dimensional commutative associative unital algebras equipped with a
//! trace form ω, so that `<a, b> = ω(a ∘ b)` is non-degenerate.
//!
//! The basis is `e_1 .. e_n` (index 0 in code) with `e_1` the unity. Structure
//! constants are exact rationals `c_ij^k`, `e_i ∘ e_j = c_ij^k e_k`. Every
//! operation that only needs ring arithmetic is generic over [`Ring`], so the
//! same table drives the exact, numeric and polynomial layers.

use std::fmt;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{
    det_q, identity_q, inverse_q, mat_mul_f, mat_mul_q, solve_q, FMatrix, QMatrix,
};
use crate::scalar::{q, qr, to_f64, Ring, Q};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed structure table: {0}")]
    Malformed(String),
    #[error("multiplication is not commutative at (i, j, k) = ({0}, {1}, {2})")]
    NotCommutative(usize, usize, usize),
    #[error("multiplication is not associative at (i, j, k, l) = ({0}, {1}, {2}, {3})")]
    NotAssociative(usize, usize, usize, usize),
    #[error("basis element {0} is not a unity")]
    NoUnity(usize),
    #[error("trace form gives a degenerate inner product")]
    Degenerate,
    #[error("element is not invertible")]
    NotInvertible,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A Frobenius algebra `{A, ∘, e, ω}` with the unity at basis index 0.
#[derive(Clone)]
pub struct FrobeniusAlgebra {
    dim: usize,
    c: Vec<Q>,
    omega: Vec<Q>,
    eta: QMatrix,
    eta_inv: QMatrix,
    c_f: Vec<f64>,
    omega_f: Vec<f64>,
    eta_f: FMatrix,
    eta_inv_f: FMatrix,
    label: String,
}

impl fmt::Debug for FrobeniusAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrobeniusAlgebra")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

fn idx3(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

/// Structural invariants of a raw table: shape, commutativity, associativity
/// and unity at `e_1`. Returns the first violation.
pub fn check_table(c: &[Vec<Vec<Q>>], omega: &[Q]) -> Result<(), AlgebraError> {
    let n = c.len();
    if n == 0 {
        return Err(AlgebraError::Malformed("empty table".into()));
    }
    for (i, row) in c.iter().enumerate() {
        if row.len() != n || row.iter().any(|v| v.len() != n) {
            return Err(AlgebraError::Malformed(format!("row {} has wrong shape", i + 1)));
        }
    }
    if omega.len() != n {
        return Err(AlgebraError::DimensionMismatch { expected: n, found: omega.len() });
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if c[i][j][k] != c[j][i][k] {
                    return Err(AlgebraError::NotCommutative(i + 1, j + 1, k + 1));
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = (0..n).fold(Q::zero(), |acc, p| acc + &c[i][j][p] * &c[p][k][l]);
                    let rhs = (0..n).fold(Q::zero(), |acc, p| acc + &c[j][k][p] * &c[i][p][l]);
                    if lhs != rhs {
                        return Err(AlgebraError::NotAssociative(i + 1, j + 1, k + 1, l + 1));
                    }
                }
            }
        }
    }
    for j in 0..n {
        for k in 0..n {
            let expect = if j == k { Q::one() } else { Q::zero() };
            if c[0][j][k] != expect {
                return Err(AlgebraError::NoUnity(1));
            }
        }
    }
    Ok(())
}

fn metric_of(c: &[Vec<Vec<Q>>], omega: &[Q]) -> QMatrix {
    let n = c.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(Q::zero(), |acc, k| acc + &c[i][j][k] * &omega[k]))
                .collect()
        })
        .collect()
}

impl FrobeniusAlgebra {
    /// Builds an algebra from `c[i][j][k] = c_ij^k` and the trace covector.
    /// `unity` is the 0-based basis index of the identity; the basis is
    /// permuted so that it lands on index 0.
    pub fn new(
        mut c: Vec<Vec<Vec<Q>>>,
        mut omega: Vec<Q>,
        unity: usize,
        label: impl Into<String>,
    ) -> Result<Self, AlgebraError> {
        let n = c.len();
        if unity >= n.max(1) {
            return Err(AlgebraError::Malformed(format!("unity index {} out of range", unity + 1)));
        }
        if unity != 0 {
            let perm = |x: usize| {
                if x == 0 {
                    unity
                } else if x == unity {
                    0
                } else {
                    x
                }
            };
            let old = c.clone();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        c[i][j][k] = old[perm(i)][perm(j)][perm(k)].clone();
                    }
                }
            }
            omega.swap(0, unity);
        }
        check_table(&c, &omega)?;
        let eta = metric_of(&c, &omega);
        if det_q(&eta).is_zero() {
            return Err(AlgebraError::Degenerate);
        }
        let eta_inv = inverse_q(&eta).ok_or(AlgebraError::Degenerate)?;
        let flat: Vec<Q> = c.iter().flatten().flatten().cloned().collect();
        Ok(Self {
            dim: n,
            c_f: flat.iter().map(to_f64).collect(),
            omega_f: omega.iter().map(to_f64).collect(),
            eta_f: crate::linalg::to_f64_matrix(&eta),
            eta_inv_f: crate::linalg::to_f64_matrix(&eta_inv),
            c: flat,
            omega,
            eta,
            eta_inv,
            label: label.into(),
        })
    }

    /// The one-dimensional algebra `R` with `ω(e) = 1`.
    pub fn trivial() -> Self {
        Self::new(vec![vec![vec![q(1)]]], vec![q(1)], 0, "R").unwrap()
    }

    /// `Z_{2,k}^{ε,μ}`: `e_2 ∘ e_2 = ε e_1 + μ e_2` with the trace form
    /// `ω_k(a) = a_k + a_2 (1 - δ_{k,2}) δ_{ε,0}`.
    pub fn z2(eps: &Q, mu: &Q, k: usize) -> Result<Self, AlgebraError> {
        if !(k == 1 || k == 2) {
            return Err(AlgebraError::InvalidParameter(format!("Z2 trace index k = {k}")));
        }
        let z = Q::zero;
        let o = Q::one;
        let c = vec![
            vec![vec![o(), z()], vec![z(), o()]],
            vec![vec![z(), o()], vec![eps.clone(), mu.clone()]],
        ];
        let omega = if k == 1 {
            vec![o(), if eps.is_zero() { o() } else { z() }]
        } else {
            vec![z(), o()]
        };
        let label = format!("Z2_{k}^({},{})", crate::scalar::Rat(eps), crate::scalar::Rat(mu));
        Self::new(c, omega, 0, label)
    }

    fn zn_table(n: usize) -> Vec<Vec<Vec<Q>>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| if i + j == k { Q::one() } else { Q::zero() })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `Z_{n,k}`: `e_i ∘ e_j = e_{i+j-1}` (zero past `e_n`) with the basic
    /// trace form `ω_k(a) = a_{k+1} + a_n (1 - δ_{k+1,n})`, `k = 0..n-1`.
    pub fn zn(n: usize, k: usize) -> Result<Self, AlgebraError> {
        if n == 0 || k >= n {
            return Err(AlgebraError::InvalidParameter(format!("Zn with n = {n}, k = {k}")));
        }
        let mut omega = vec![Q::zero(); n];
        omega[k] += Q::one();
        if k + 1 != n {
            omega[n - 1] += Q::one();
        }
        Self::new(Self::zn_table(n), omega, 0, format!("Z{n}_{k}"))
    }

    /// `Z_n` with `tr_n = Σ_s ω_s - (n-1) ω_{n-1}`, i.e. the sum of all
    /// coefficients.
    pub fn zn_trace(n: usize) -> Result<Self, AlgebraError> {
        if n == 0 {
            return Err(AlgebraError::InvalidParameter("Zn with n = 0".into()));
        }
        let mut omega = vec![Q::zero(); n];
        for s in 0..n {
            let basic = Self::zn(n, s)?;
            for (o, b) in omega.iter_mut().zip(&basic.omega) {
                *o += b;
            }
        }
        let last = Self::zn(n, n - 1)?;
        for (o, b) in omega.iter_mut().zip(&last.omega) {
            *o -= b * q(n as i64 - 1);
        }
        Self::new(Self::zn_table(n), omega, 0, format!("Z{n}_tr"))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `c_ij^k` (0-based).
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> &Q {
        &self.c[idx3(self.dim, i, j, k)]
    }

    pub fn structure_constants_f64(&self) -> &[f64] {
        &self.c_f
    }

    /// Nested copy of the table, `c[i][j][k]`.
    pub fn table(&self) -> Vec<Vec<Vec<Q>>> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| self.structure_constant(i, j, k).clone()).collect()).collect())
            .collect()
    }

    pub fn omega(&self) -> &[Q] {
        &self.omega
    }

    pub fn omega_f64(&self) -> &[f64] {
        &self.omega_f
    }

    pub fn eta(&self) -> &QMatrix {
        &self.eta
    }

    pub fn eta_inv(&self) -> &QMatrix {
        &self.eta_inv
    }

    pub fn eta_f64(&self) -> &FMatrix {
        &self.eta_f
    }

    pub fn eta_inv_f64(&self) -> &FMatrix {
        &self.eta_inv_f
    }

    pub fn unit<T: Ring>(&self) -> Vec<T> {
        self.basis(0)
    }

    pub fn basis<T: Ring>(&self, i: usize) -> Vec<T> {
        (0..self.dim).map(|k| if k == i { T::one() } else { T::zero() }).collect()
    }

    fn check_len(&self, len: usize) -> Result<(), AlgebraError> {
        if len != self.dim {
            return Err(AlgebraError::DimensionMismatch { expected: self.dim, found: len });
        }
        Ok(())
    }

    /// `(a ∘ b)_k = Σ_ij a_i b_j c_ij^k`.
    pub fn multiply<T: Ring>(&self, a: &[T], b: &[T]) -> Result<Vec<T>, AlgebraError> {
        self.check_len(a.len())?;
        self.check_len(b.len())?;
        Ok(self.mul_unchecked(a, b))
    }

    pub(crate) fn mul_unchecked<T: Ring>(&self, a: &[T], b: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            if a[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if b[j].is_zero() {
                    continue;
                }
                let ab = a[i].clone() * b[j].clone();
                for (k, o) in out.iter_mut().enumerate() {
                    let ck = &self.c[idx3(n, i, j, k)];
                    if !ck.is_zero() {
                        *o = o.clone() + ab.scale(ck);
                    }
                }
            }
        }
        out
    }

    /// Double-precision product into `out`; the hot path of the field solvers.
    pub fn mul_f64_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let n = self.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..n {
            let ai = a[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..n {
                let ab = ai * b[j];
                if ab == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += ab * self.c_f[base + k];
                }
            }
        }
    }

    pub fn mul_f64(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_f64_into(a, b, &mut out);
        out
    }

    /// `ω(a) = Σ_i ω_i a_i`.
    pub fn trace<T: Ring>(&self, a: &[T]) -> T {
        a.iter()
            .zip(&self.omega)
            .filter(|(_, w)| !w.is_zero())
            .fold(T::zero(), |acc, (x, w)| acc + x.scale(w))
    }

    pub fn trace_f64(&self, a: &[f64]) -> f64 {
        a.iter().zip(&self.omega_f).map(|(x, w)| x * w).sum()
    }

    /// `<a, b> = ω(a ∘ b)`.
    pub fn inner<T: Ring>(&self, a: &[T], b: &[T]) -> Result<T, AlgebraError> {
        Ok(self.trace(&self.multiply(a, b)?))
    }

    pub fn power<T: Ring>(&self, a: &[T], k: u32) -> Vec<T> {
        let mut acc = self.unit::<T>();
        for _ in 0..k {
            acc = self.mul_unchecked(&acc, a);
        }
        acc
    }

    /// Matrix of multiplication by `a`: `L[k][j] = Σ_i a_i c_ij^k`, so that
    /// `L · b = a ∘ b` in coordinates.
    pub fn regular_representation(&self, a: &[Q]) -> Result<QMatrix, AlgebraError> {
        self.check_len(a.len())?;
        let n = self.dim;
        Ok((0..n)
            .map(|k| {
                (0..n)
                    .map(|j| (0..n).fold(Q::zero(), |acc, i| acc + &a[i] * &self.c[idx3(n, i, j, k)]))
                    .collect()
            })
            .collect())
    }

    pub fn regular_representation_f64(&self, a: &[f64]) -> FMatrix {
        let n = self.dim;
        (0..n)
            .map(|k| (0..n).map(|j| (0..n).map(|i| a[i] * self.c_f[idx3(n, i, j, k)]).sum()).collect())
            .collect()
    }

    /// Exact inverse, obtained by solving `L_a b = e`.
    pub fn invert(&self, a: &[Q]) -> Result<Vec<Q>, AlgebraError> {
        let l = self.regular_representation(a)?;
        solve_q(&l, &self.unit::<Q>()).ok_or(AlgebraError::NotInvertible)
    }

    pub fn invert_f64(&self, a: &[f64]) -> Option<Vec<f64>> {
        let l = self.regular_representation_f64(a);
        crate::linalg::solve_f(&l, &self.unit::<f64>())
    }

    /// Gram matrix of `B(a, b) = tr(L_a L_b)` on the basis.
    pub fn trace_form(&self) -> QMatrix {
        let n = self.dim;
        let reps: Vec<QMatrix> = (0..n)
            .map(|i| self.regular_representation(&self.basis::<Q>(i)).unwrap())
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let p = mat_mul_q(&reps[i], &reps[j]);
                        (0..n).fold(Q::zero(), |acc, d| acc + &p[d][d])
                    })
                    .collect()
            })
            .collect()
    }

    /// Semisimple iff the trace form `tr(L_a L_b)` is non-degenerate.
    pub fn is_semisimple(&self) -> bool {
        !det_q(&self.trace_form()).is_zero()
    }

    /// `Ω = η^{rs} e_r ∘ e_s` together with whether it is invertible.
    pub fn omega_element(&self) -> (Vec<Q>, bool) {
        let n = self.dim;
        let mut out = vec![Q::zero(); n];
        for r in 0..n {
            for s in 0..n {
                let w = &self.eta_inv[r][s];
                if w.is_zero() {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * &self.c[idx3(n, r, s, k)];
                }
            }
        }
        let invertible = self.invert(&out).is_ok();
        (out, invertible)
    }

    /// `ω(e_p ∘ e_i ∘ e_j ∘ ...)` for an arbitrary list of basis indices.
    pub fn trace_of_basis_product(&self, indices: &[usize]) -> Q {
        let mut acc = self.unit::<Q>();
        for &i in indices {
            acc = self.mul_unchecked(&acc, &self.basis::<Q>(i));
        }
        self.trace(&acc)
    }

    /// Numeric `exp(a)` through the regular representation.
    ///
    /// The unity component is split off exactly (`exp(a_1 e + b) = e^{a_1} exp(b)`).
    /// When `L_b` is nilpotent the series terminates and is summed exactly;
    /// otherwise scaling and squaring with a Taylor kernel is used.
    pub fn exp_f64(&self, a: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let scalar = a[0].exp();
        let mut b = a.to_vec();
        b[0] = 0.0;
        let lb = self.regular_representation_f64(&b);
        if let Some(series) = nilpotent_series(&lb) {
            return series.iter().map(|r| r[0] * scalar).collect();
        }
        let norm = lb
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scale = 0.5_f64.powi(squarings as i32);
        let small: FMatrix = lb.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let mut sum = crate::linalg::identity_f(n);
        let mut term = crate::linalg::identity_f(n);
        for k in 1..40 {
            term = mat_mul_f(&term, &small);
            let inv_k = 1.0 / k as f64;
            term.iter_mut().flatten().for_each(|v| *v *= inv_k);
            let mut biggest = 0.0_f64;
            for (s, t) in sum.iter_mut().flatten().zip(term.iter().flatten()) {
                *s += t;
                biggest = biggest.max(t.abs());
            }
            if biggest < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            sum = mat_mul_f(&sum, &sum);
        }
        sum.iter().map(|r| r[0] * scalar).collect()
    }

    /// `exp(a)` as a terminating series when `a` is nilpotent; `None` otherwise.
    pub fn exp_nilpotent<T: Ring>(&self, a: &[T]) -> Option<Vec<T>> {
        let n = self.dim;
        let mut sum = self.unit::<T>();
        let mut term = self.unit::<T>();
        for k in 1..=n {
            term = self.mul_unchecked(&term, a);
            let inv = Q::one() / q(k as i64);
            term = term.iter().map(|t| t.scale(&inv)).collect();
            if term.iter().all(Zero::is_zero) {
                return Some(sum);
            }
            sum = sum.into_iter().zip(&term).map(|(s, t)| s + t.clone()).collect();
        }
        None
    }

    /// Full verification report: structural invariants, the metric and the
    /// contraction identity `ω(x∘e_i∘e_r) η^{rs} ω(e_s∘e_j∘y) = ω(x∘e_i∘e_j∘y)`
    /// on `samples` seeded random rational `x, y`.
    pub fn validate(&self, seed: u64, samples: usize) -> ValidationReport {
        validate_table(&self.table(), &self.omega, seed, samples)
    }
}

/// `Σ_k L^k / k!` when `L` is nilpotent (checked exactly in floating point).
fn nilpotent_series(l: &FMatrix) -> Option<FMatrix> {
    let n = l.len();
    let mut sum = crate::linalg::identity_f(n);
    let mut term = crate::linalg::identity_f(n);
    for k in 1..=n {
        term = mat_mul_f(&term, l);
        let inv_k = 1.0 / k as f64;
        term.iter_mut().flatten().for_each(|v| *v *= inv_k);
        if term.iter().flatten().all(|v| *v == 0.0) {
            return Some(sum);
        }
        for (s, t) in sum.iter_mut().flatten().zip(term.iter().flatten()) {
            *s += t;
        }
    }
    None
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Seeded random rational with small numerator and denominator.
pub fn random_rational(rng: &mut impl Rng) -> Q {
    qr(rng.random_range(-9..=9), rng.random_range(1..=4))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Validates a raw table without constructing the algebra, reporting every
/// invariant separately.
pub fn validate_table(c: &[Vec<Vec<Q>>], omega: &[Q], seed: u64, samples: usize) -> ValidationReport {
    let n = c.len();
    let mut checks = Vec::new();
    let shape_ok = n > 0
        && omega.len() == n
        && c.iter().all(|r| r.len() == n && r.iter().all(|v| v.len() == n));
    checks.push(Check::new("shape", shape_ok, format!("dim {n}")));
    if !shape_ok {
        return ValidationReport { dim: n, checks };
    }
    let comm = (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| c[i][j][k] == c[j][i][k])));
    checks.push(Check::new("commutativity", comm, ""));
    let mut assoc_fail = None;
    'outer: for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = (0..n).fold(Q::zero(), |acc, p| acc + &c[i][j][p] * &c[p][k][l]);
                    let rhs = (0..n).fold(Q::zero(), |acc, p| acc + &c[j][k][p] * &c[i][p][l]);
                    if lhs != rhs {
                        assoc_fail = Some((i + 1, j + 1, k + 1, l + 1));
                        break 'outer;
                    }
                }
            }
        }
    }
    checks.push(Check::new(
        "associativity",
        assoc_fail.is_none(),
        assoc_fail.map_or(String::new(), |t| format!("fails at {t:?}")),
    ));
    let unity = (0..n).all(|j| (0..n).all(|k| c[0][j][k] == if j == k { Q::one() } else { Q::zero() }));
    checks.push(Check::new("unity", unity, "e_1 acts as identity"));
    let eta = metric_of(c, omega);
    let sym = (0..n).all(|i| (0..n).all(|j| eta[i][j] == eta[j][i]));
    checks.push(Check::new("metric_symmetric", sym, ""));
    let det = det_q(&eta);
    checks.push(Check::new("metric_nondegenerate", !det.is_zero(), format!("det = {}", crate::scalar::Rat(&det))));
    let Some(eta_inv) = inverse_q(&eta) else {
        return ValidationReport { dim: n, checks };
    };
    checks.push(Check::new("metric_inverse", mat_mul_q(&eta, &eta_inv) == identity_q(n), ""));
    if !(comm && unity && assoc_fail.is_none()) {
        return ValidationReport { dim: n, checks };
    }

    let alg = match FrobeniusAlgebra::new(c.to_vec(), omega.to_vec(), 0, "candidate") {
        Ok(a) => a,
        Err(e) => {
            checks.push(Check::new("construction", false, e.to_string()));
            return ValidationReport { dim: n, checks };
        }
    };
    let mut rng = seeded_rng(seed);
    let mut contraction_ok = true;
    let mut homomorphism_ok = true;
    for _ in 0..samples {
        let x: Vec<Q> = (0..n).map(|_| random_rational(&mut rng)).collect();
        let y: Vec<Q> = (0..n).map(|_| random_rational(&mut rng)).collect();
        for i in 0..n {
            let xi = alg.mul_unchecked(&x, &alg.basis(i));
            for j in 0..n {
                let yj = alg.mul_unchecked(&alg.basis(j), &y);
                let mut lhs = Q::zero();
                for r in 0..n {
                    let left = alg.trace(&alg.mul_unchecked(&xi, &alg.basis(r)));
                    for s in 0..n {
                        if eta_inv[r][s].is_zero() {
                            continue;
                        }
                        let right = alg.trace(&alg.mul_unchecked(&alg.basis(s), &yj));
                        lhs += &left * &eta_inv[r][s] * right;
                    }
                }
                let rhs = alg.trace(&alg.mul_unchecked(&xi, &yj));
                if lhs != rhs {
                    contraction_ok = false;
                }
            }
        }
        let lx = alg.regular_representation(&x).unwrap();
        let ly = alg.regular_representation(&y).unwrap();
        let lxy = alg.regular_representation(&alg.mul_unchecked(&x, &y)).unwrap();
        if mat_mul_q(&lx, &ly) != lxy {
            homomorphism_ok = false;
        }
    }
    checks.push(Check::new("contraction_identity", contraction_ok, format!("{samples} random pairs")));
    checks.push(Check::new("regular_representation_multiplicative", homomorphism_ok, format!("{samples} random pairs")));
    ValidationReport { dim: n, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(alg: &FrobeniusAlgebra, i: usize) -> Vec<Q> {
        alg.basis(i)
    }

    #[test]
    fn z2_product_table() {
        let alg = FrobeniusAlgebra::z2(&q(3), &q(5), 1).unwrap();
        assert_eq!(alg.multiply(&e(&alg, 1), &e(&alg, 1)).unwrap(), vec![q(3), q(5)]);
        let a = vec![qr(1, 2), q(-4)];
        assert_eq!(alg.multiply(&alg.unit(), &a).unwrap(), a);
    }

    #[test]
    fn zn_product_truncates() {
        let alg = FrobeniusAlgebra::zn(3, 0).unwrap();
        assert_eq!(alg.multiply(&e(&alg, 1), &e(&alg, 2)).unwrap(), vec![q(0); 3]);
        assert_eq!(alg.multiply(&e(&alg, 1), &e(&alg, 1)).unwrap(), e(&alg, 2));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let alg = FrobeniusAlgebra::zn(3, 0).unwrap();
        let err = alg.multiply(&[q(1), q(2)], &e(&alg, 0)).unwrap_err();
        assert_eq!(err, AlgebraError::DimensionMismatch { expected: 3, found: 2 });
    }

    #[test]
    fn z2_trace_forms() {
        let a = vec![q(7), q(11)];
        let generic = FrobeniusAlgebra::z2(&q(2), &q(1), 1).unwrap();
        assert_eq!(generic.trace(&a), q(7));
        let nil = FrobeniusAlgebra::z2(&q(0), &q(3), 1).unwrap();
        assert_eq!(nil.trace(&a), q(18));
        let second = FrobeniusAlgebra::z2(&q(2), &q(0), 2).unwrap();
        assert_eq!(second.trace(&a), q(11));
        // e_2 ∘ e_2 = ε e_1 has zero ω_2-trace
        assert_eq!(second.inner(&e(&second, 1), &e(&second, 1)).unwrap(), q(0));
        assert_eq!(second.inner(&second.unit::<Q>(), &second.unit()).unwrap(), second.trace(&second.unit::<Q>()));
    }

    #[test]
    fn zn_basic_forms() {
        let alg = FrobeniusAlgebra::zn(4, 0).unwrap();
        let a = vec![q(1), q(2), q(3), q(4)];
        assert_eq!(alg.trace(&a), q(5));
        let last = FrobeniusAlgebra::zn(4, 3).unwrap();
        assert_eq!(last.trace(&a), q(4));
        let tr = FrobeniusAlgebra::zn_trace(4).unwrap();
        assert_eq!(tr.trace(&a), q(10));
        assert!(tr.validate(1, 10).passed());
    }

    #[test]
    fn inner_on_basis_is_metric() {
        let alg = FrobeniusAlgebra::zn(3, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(&alg.inner(&e(&alg, i), &e(&alg, j)).unwrap(), &alg.eta()[i][j]);
            }
        }
    }

    #[test]
    fn regular_representation_examples() {
        let (eps, mu) = (q(3), q(-2));
        let alg = FrobeniusAlgebra::z2(&eps, &mu, 2).unwrap();
        let l = alg.regular_representation(&e(&alg, 1)).unwrap();
        assert_eq!(l, vec![vec![q(0), eps.clone()], vec![q(1), mu.clone()]]);
        assert_eq!(alg.regular_representation(&alg.unit()).unwrap(), identity_q(2));

        let n = 4;
        let zn = FrobeniusAlgebra::zn(n, 0).unwrap();
        let lambda: QMatrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j + 1 { q(1) } else { q(0) }).collect())
            .collect();
        let mut power = identity_q(n);
        for j in 0..n {
            assert_eq!(zn.regular_representation(&e(&zn, j)).unwrap(), power);
            power = mat_mul_q(&power, &lambda);
        }
    }

    #[test]
    fn inversion() {
        let z = FrobeniusAlgebra::z2(&q(0), &q(0), 2).unwrap();
        assert_eq!(z.invert(&[q(2), q(3)]).unwrap(), vec![qr(1, 2), qr(-3, 4)]);
        assert_eq!(z.invert(&z.unit()).unwrap(), z.unit::<Q>());
        let zn = FrobeniusAlgebra::zn(3, 2).unwrap();
        assert_eq!(zn.invert(&e(&zn, 1)), Err(AlgebraError::NotInvertible));
    }

    #[test]
    fn semisimplicity_classification() {
        // μ² = -4ε ⇒ nonsemisimple
        assert!(!FrobeniusAlgebra::z2(&q(-1), &q(2), 2).unwrap().is_semisimple());
        assert!(!FrobeniusAlgebra::z2(&q(0), &q(0), 2).unwrap().is_semisimple());
        assert!(FrobeniusAlgebra::z2(&q(1), &q(0), 1).unwrap().is_semisimple());
        assert!(FrobeniusAlgebra::z2(&q(-1), &q(1), 2).unwrap().is_semisimple());
        for n in 2..6 {
            assert!(!FrobeniusAlgebra::zn(n, 0).unwrap().is_semisimple());
        }
        assert!(FrobeniusAlgebra::trivial().is_semisimple());
    }

    #[test]
    fn omega_element_examples() {
        let (om, inv) = FrobeniusAlgebra::trivial().omega_element();
        assert_eq!(om, vec![q(1)]);
        assert!(inv);

        // brute-force oracle: Ω = Σ_rs (η^{-1})_rs e_r ∘ e_s from the raw table
        for alg in [
            FrobeniusAlgebra::z2(&q(1), &q(0), 1).unwrap(),
            FrobeniusAlgebra::z2(&q(0), &q(0), 1).unwrap(),
        ] {
            let eta = alg.eta().clone();
            let inv_eta = crate::linalg::inverse_q(&eta).unwrap();
            let mut expect = vec![q(0), q(0)];
            for r in 0..2 {
                for s in 0..2 {
                    let prod = alg.multiply(&e(&alg, r), &e(&alg, s)).unwrap();
                    for k in 0..2 {
                        expect[k] += &inv_eta[r][s] * &prod[k];
                    }
                }
            }
            let (om, invertible) = alg.omega_element();
            assert_eq!(om, expect);
            assert_eq!(invertible, !crate::linalg::det_q(&alg.regular_representation(&om).unwrap()).is_zero());
        }
        let (om, inv) = FrobeniusAlgebra::z2(&q(1), &q(0), 1).unwrap().omega_element();
        assert_eq!(om, vec![q(2), q(0)]);
        assert!(inv);
        let (om, inv) = FrobeniusAlgebra::z2(&q(0), &q(0), 1).unwrap().omega_element();
        assert_eq!(om, vec![q(0), q(2)]);
        assert!(!inv);
    }

    #[test]
    fn degenerate_form_rejected() {
        // ω_1 on Z_2^{0,1} gives η = [[1,1],[1,1]]
        assert_eq!(FrobeniusAlgebra::z2(&q(0), &q(1), 1).unwrap_err(), AlgebraError::Degenerate);
    }

    #[test]
    fn corrupted_table_fails_validation() {
        let alg = FrobeniusAlgebra::zn(3, 0).unwrap();
        let mut c = alg.table();
        c[1][2][2] = q(1);
        c[2][1][2] = q(1);
        let report = validate_table(&c, alg.omega(), 0, 5);
        assert!(!report.passed());
        assert!(!report.check("associativity").unwrap().passed);
        assert!(report.check("commutativity").unwrap().passed);
    }

    #[test]
    fn unity_reordering() {
        // Z_2 with the unity stored second
        let c = vec![
            vec![vec![q(0), q(0)], vec![q(1), q(0)]],
            vec![vec![q(1), q(0)], vec![q(0), q(1)]],
        ];
        let alg = FrobeniusAlgebra::new(c, vec![q(1), q(0)], 1, "swapped").unwrap();
        assert_eq!(alg.multiply(&e(&alg, 1), &e(&alg, 1)).unwrap(), vec![q(0), q(0)]);
        assert_eq!(alg.omega(), &[q(0), q(1)]);
    }

    #[test]
    fn exp_of_nilpotent_is_exact() {
        let zn = FrobeniusAlgebra::zn(3, 2).unwrap();
        let a = vec![q(0), q(2), q(1)];
        // exp(2e_2 + e_3) = e + (2e_2 + e_3) + (2e_2)^2/2 = e + 2e_2 + 3e_3
        assert_eq!(zn.exp_nilpotent(&a).unwrap(), vec![q(1), q(2), q(3)]);
        let f = zn.exp_f64(&[0.0, 2.0, 1.0]);
        assert_eq!(f, vec![1.0, 2.0, 3.0]);
        assert!(FrobeniusAlgebra::trivial().exp_nilpotent(&[q(1)]).is_none());
    }

    #[test]
    fn exp_hyperbolic_components() {
        let eps: f64 = 0.25;
        let alg = FrobeniusAlgebra::z2(&qr(1, 4), &q(0), 2).unwrap();
        let v = 1.3;
        let got = alg.exp_f64(&[0.0, v]);
        let s = eps.sqrt();
        assert!((got[0] - (s * v).cosh()).abs() < 1e-14);
        assert!((got[1] - (s * v).sinh() / s).abs() < 1e-14);
        let zero = alg.exp_f64(&[0.0, 0.0]);
        assert_eq!(zero, vec![1.0, 0.0]);
    }

    #[test]
    fn z3_noninvertible_iff_leading_zero() {
        let zn = FrobeniusAlgebra::zn(3, 0).unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..50 {
            let mut a: Vec<Q> = (0..3).map(|_| random_rational(&mut rng)).collect();
            if rng.random_bool(0.3) {
                a[0] = q(0);
            }
            let inv = zn.invert(&a);
            assert_eq!(inv.is_err(), a[0].is_zero());
            if let Ok(b) = inv {
                assert_eq!(zn.multiply(&a, &b).unwrap(), zn.unit::<Q>());
            }
        }
    }
}
