//! Dense square-matrix helpers: exact Gaussian elimination over `Q` and a
//! few double-precision kernels. Matrices are row-major `Vec<Vec<_>>`; every
//! caller in this crate works with dimensions below ten.

use num_traits::{One, Zero};

use crate::scalar::{to_f64, Q};

pub type QMatrix = Vec<Vec<Q>>;
pub type FMatrix = Vec<Vec<f64>>;

pub fn identity_q(n: usize) -> QMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect()
}

pub fn identity_f(n: usize) -> FMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_mul_q(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let n = a.len();
    let p = b.first().map_or(0, |r| r.len());
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..p)
                .map(|j| (0..k).fold(Q::zero(), |acc, l| acc + &a[i][l] * &b[l][j]))
                .collect()
        })
        .collect()
}

pub fn mat_mul_f(a: &FMatrix, b: &FMatrix) -> FMatrix {
    let n = a.len();
    let p = b.first().map_or(0, |r| r.len());
    let k = b.len();
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i][l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..p {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

pub fn mat_vec_f(a: &FMatrix, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

pub fn to_f64_matrix(a: &QMatrix) -> FMatrix {
    a.iter().map(|r| r.iter().map(to_f64).collect()).collect()
}

/// Exact determinant by fraction-preserving elimination.
pub fn det_q(a: &QMatrix) -> Q {
    let n = a.len();
    let mut m = a.clone();
    let mut det = Q::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return Q::zero();
        };
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        let p = m[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &p;
            for c in col..n {
                let sub = &f * &m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    det
}

/// Solves `a x = b` exactly; `None` when `a` is singular.
pub fn solve_q(a: &QMatrix, b: &[Q]) -> Option<Vec<Q>> {
    let n = a.len();
    let mut m: Vec<Vec<Q>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(piv, col);
        let p = m[col][col].clone();
        for c in col..=n {
            m[col][c] = &m[col][c] / &p;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for c in col..=n {
                let sub = &f * &m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    Some(m.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

pub fn inverse_q(a: &QMatrix) -> Option<QMatrix> {
    let n = a.len();
    let id = identity_q(n);
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<Q> = id.iter().map(|r| r[j].clone()).collect();
        cols.push(solve_q(a, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

/// Partial-pivoting solve in double precision; `None` on an exactly zero pivot.
pub fn solve_f(a: &FMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(*bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(piv, col);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

pub fn det_f(a: &FMatrix) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    det
}

pub fn max_abs_f(a: &FMatrix) -> f64 {
    a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
}
