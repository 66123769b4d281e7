// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear-algebra helpers shared by the simulation modules.
//!
//! All matrices are `faer::Mat<c64>`. The joint Hilbert space is small
//! (at most ~100 levels), so dense storage is used throughout; only the
//! drive and jump operators, which have O(d) non-zeros, also get a sparse
//! triplet form for the hot loops.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat, MatRef, Side};

pub use faer::c64;

/// Dense complex square matrix on the joint space.
pub type CMat = Mat<c64>;
/// Dense complex column vector on the joint space.
pub type CVec = Col<c64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };
pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

#[inline]
pub fn cr(re: f64) -> c64 {
    c64::new(re, 0.0)
}

/// Largest elementwise modulus.
pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

/// `max |H - H†|`.
pub fn hermiticity_error(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

/// `max |U†U - I|`.
pub fn unitarity_error(u: MatRef<'_, c64>) -> f64 {
    let prod = u.adjoint() * u;
    max_abs_diff(prod.as_ref(), CMat::identity(u.nrows(), u.ncols()).as_ref())
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(m: MatRef<'_, c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn scaled(m: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// `<a|b>` with the conjugate on the left argument.
pub fn inner(a: &CVec, b: &CVec) -> c64 {
    (0..a.nrows()).map(|i| a[i].conj() * b[i]).sum()
}

pub fn norm(v: &CVec) -> f64 {
    (0..v.nrows()).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral decomposition `H = V diag(values) V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(h: MatRef<'_, c64>) -> Self {
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .expect("self-adjoint eigendecomposition of a finite matrix converges");
        let s = evd.S().column_vector();
        let values = (0..s.nrows()).map(|i| s[i].re).collect();
        Self {
            values,
            vectors: evd.U().to_owned(),
        }
    }

    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> c64) -> CMat {
        let v = &self.vectors;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * f(self.values[j]));
        &scaled * v.adjoint()
    }
}

/// Numerator coefficients of the diagonal Padé approximants used by
/// scaling and squaring, with the 1-norm thresholds below which each order
/// meets double precision.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn axpy_into(acc: &mut CMat, alpha: f64, x: MatRef<'_, c64>) {
    for j in 0..acc.ncols() {
        for i in 0..acc.nrows() {
            acc[(i, j)] += x[(i, j)] * alpha;
        }
    }
}

/// Solve `(V - U) X = V + U` for the Padé quotient.
fn pade_quotient(u: &CMat, v: &CMat) -> CMat {
    let p = v + u;
    let q = v - u;
    q.partial_piv_lu().solve(&p)
}

/// Matrix exponential of a general (not necessarily normal) complex
/// matrix by scaling and squaring with a diagonal Padé approximant of
/// order up to 13.
pub fn expm(a: MatRef<'_, c64>) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let ident = CMat::identity(n, n);
    let norm = one_norm(a);
    let a = a.to_owned();

    for (order, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match order {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let a2 = &a * &a;
            // Even powers I, A², A⁴, ...
            let mut powers = vec![ident.clone(), a2.clone()];
            while powers.len() < coeffs.len().div_ceil(2) {
                let next = powers.last().unwrap() * &a2;
                powers.push(next);
            }
            let mut odd = CMat::zeros(n, n);
            let mut even = CMat::zeros(n, n);
            for (k, pw) in powers.iter().enumerate() {
                if 2 * k + 1 < coeffs.len() {
                    axpy_into(&mut odd, coeffs[2 * k + 1], pw.as_ref());
                }
                axpy_into(&mut even, coeffs[2 * k], pw.as_ref());
            }
            let u = &a * &odd;
            return pade_quotient(&u, &even);
        }
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = scaled(a.as_ref(), cr(0.5f64.powi(squarings)));
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let mut inner_u = CMat::zeros(n, n);
    axpy_into(&mut inner_u, b[13], a6.as_ref());
    axpy_into(&mut inner_u, b[11], a4.as_ref());
    axpy_into(&mut inner_u, b[9], a2.as_ref());
    let mut u_poly = &a6 * &inner_u;
    axpy_into(&mut u_poly, b[7], a6.as_ref());
    axpy_into(&mut u_poly, b[5], a4.as_ref());
    axpy_into(&mut u_poly, b[3], a2.as_ref());
    axpy_into(&mut u_poly, b[1], ident.as_ref());
    let u = &a * &u_poly;

    let mut inner_v = CMat::zeros(n, n);
    axpy_into(&mut inner_v, b[12], a6.as_ref());
    axpy_into(&mut inner_v, b[10], a4.as_ref());
    axpy_into(&mut inner_v, b[8], a2.as_ref());
    let mut v = &a6 * &inner_v;
    axpy_into(&mut v, b[6], a6.as_ref());
    axpy_into(&mut v, b[4], a4.as_ref());
    axpy_into(&mut v, b[2], a2.as_ref());
    axpy_into(&mut v, b[0], ident.as_ref());

    let mut r = pade_quotient(&u, &v);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Operator stored as `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, c64)>,
}

impl SparseOp {
    pub fn from_dense(m: MatRef<'_, c64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != ZERO {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Self {
            dim: m.nrows(),
            entries,
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect(),
        }
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim);
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
        }
        out
    }

    /// `Σ_ab A_ab Z_ab`, i.e. `Tr(Aᵀ Z)`.
    pub fn contract(&self, z: MatRef<'_, c64>) -> c64 {
        self.entries.iter().map(|&(i, j, v)| v * z[(i, j)]).sum()
    }

    /// Adds `s · A ρ A†` into `out`.
    pub fn sandwich_into(&self, rho: MatRef<'_, c64>, s: f64, out: &mut CMat) {
        for &(i, k, a) in &self.entries {
            for &(j, l, b) in &self.entries {
                out[(i, j)] += a * rho[(k, l)] * b.conj() * s;
            }
        }
    }

    /// Adds `s · (A ρ + ρ A)` into `out`; the anticommutator when `A` is
    /// Hermitian.
    pub fn anticommutator_into(&self, rho: MatRef<'_, c64>, s: f64, out: &mut CMat) {
        let n = self.dim;
        for &(i, k, a) in &self.entries {
            for col in 0..n {
                out[(i, col)] += a * rho[(k, col)] * s;
            }
            for row in 0..n {
                out[(row, k)] += rho[(row, i)] * a * s;
            }
        }
    }
}
