// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! In-silico characterization: oscillator Wigner functions, density-matrix
//! reconstruction from Wigner samples, and logical-qubit process tomography
//! in the Pauli transfer representation.

use std::f64::consts::FRAC_2_PI;
use std::fmt::Write as _;
use std::ops::Mul;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::catcode::{mat2_adjoint, mat2_mul, Cardinal, Mat2};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat, CVec, HermitianEigen, I, ONE, ZERO};
use crate::operators::{annihilation, HilbertDims};

/// `D(β) = exp(β â† − β* â)` on `n_osc` Fock levels.
pub fn displacement(beta: c64, n_osc: usize) -> Result<CMat> {
    let a = annihilation(n_osc)?;
    // D = exp(−i H) with H = i(β â† − β* â) Hermitian.
    let h = CMat::from_fn(n_osc, n_osc, |i, j| {
        I * (beta * a[(j, i)].conj() - beta.conj() * a[(i, j)])
    });
    Ok(HermitianEigen::new(h.as_ref()).map(|l| (-I * l).exp()))
}

/// `⟨m|D(α)|n⟩` of the untruncated displacement, from the associated
/// Laguerre closed form.
pub fn displacement_element(alpha: c64, m: usize, n: usize) -> c64 {
    let x = alpha.norm_sqr();
    let (lo, hi) = (m.min(n), m.max(n));
    let k = hi - lo;
    // sqrt(lo!/hi!) |α|^k e^{−x/2}, in logs.
    let log_mag =
        0.5 * (ln_factorial(lo) - ln_factorial(hi)) + if k > 0 { k as f64 * alpha.norm().ln() } else { 0.0 } - 0.5 * x;
    let lag = laguerre(lo, k as f64, x);
    let phase = if alpha.norm() == 0.0 {
        ONE
    } else if m >= n {
        c64::from_polar(1.0, k as f64 * alpha.arg())
    } else {
        // (−α*)^k
        c64::from_polar(1.0, k as f64 * (-alpha.conj()).arg())
    };
    if k > 0 && alpha.norm() == 0.0 {
        return ZERO;
    }
    phase * (log_mag.exp() * lag)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Generalized Laguerre polynomial `L_n^{(a)}(x)` by the three-term
/// recurrence.
fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Partial trace over the transmon of a joint-space density matrix.
pub fn reduce_to_oscillator(rho: &CMat, dims: HilbertDims) -> Result<CMat> {
    if rho.nrows() != dims.dim() || rho.ncols() != dims.dim() {
        return Err(Error::DimensionMismatch {
            expected: dims.dim(),
            found: rho.nrows(),
        });
    }
    Ok(CMat::from_fn(dims.n_osc(), dims.n_osc(), |n, k| {
        (0..dims.n_trans())
            .map(|m| rho[(dims.index(n, m), dims.index(k, m))])
            .sum()
    }))
}

/// `|ψ⟩⟨ψ|`.
pub fn projector(psi: &CVec) -> CMat {
    CMat::from_fn(psi.nrows(), psi.nrows(), |i, j| psi[i] * psi[j].conj())
}

/// Wigner samples on a set of phase-space points.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub points: Vec<c64>,
    pub values: Vec<f64>,
    /// Points whose displaced state reached the edge of the working
    /// truncation; their values are not trustworthy.
    pub flagged: Vec<bool>,
}

/// Square lattice of `n × n` points covering `[−extent, extent]²`.
pub fn square_grid(extent: f64, n: usize) -> Vec<c64> {
    let coord = |k: usize| {
        if n == 1 {
            0.0
        } else {
            -extent + 2.0 * extent * k as f64 / (n - 1) as f64
        }
    };
    (0..n)
        .flat_map(|iy| (0..n).map(move |ix| c64::new(coord(ix), coord(iy))))
        .collect()
}

impl WignerGrid {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }

    /// Whitespace-separated table `Re β  Im β  W`, one point per line.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# re_beta im_beta wigner\n");
        let flagged = self.flagged.iter().filter(|&&f| f).count();
        if flagged > 0 {
            let _ = writeln!(out, "# {flagged} points beyond the trusted truncation");
        }
        for (b, w) in self.points.iter().zip(&self.values) {
            let _ = writeln!(out, "{:.6} {:.6} {:.12e}", b.re, b.im, w);
        }
        out
    }
}

/// Largest working truncation used for a single phase-space point.
pub const WIGNER_MAX_LEVELS: usize = 400;

/// Population allowed to fall outside the working truncation before a point
/// is flagged.
const EDGE_POPULATION: f64 = 1e-8;

/// `W(β) = (2/π) Tr[D(β)† ρ D(β) Π]` for an oscillator density matrix. The
/// displaced state is formed from exact displacement matrix elements on a
/// working truncation sized to the point.
pub fn wigner(rho: &CMat, points: &[c64]) -> Result<WignerGrid> {
    let n = rho.nrows();
    if rho.ncols() != n || n == 0 {
        return Err(Error::InvalidState(
            "Wigner input must be a square oscillator matrix".into(),
        ));
    }
    let trace = linalg::trace(rho.as_ref()).re;
    let mut values = Vec::with_capacity(points.len());
    let mut flagged = Vec::with_capacity(points.len());
    for &beta in points {
        let r = beta.norm() + (n as f64).sqrt();
        let work = ((r * r + 8.0 * r).ceil() as usize + 12).min(WIGNER_MAX_LEVELS);
        let mut w = 0.0;
        let mut kept = 0.0;
        let mut row = vec![ZERO; n];
        for k in 0..work {
            // Row k of D(−β) = D(β)†.
            for (j, v) in row.iter_mut().enumerate() {
                *v = displacement_element(-beta, k, j);
            }
            let mut pop = ZERO;
            for i in 0..n {
                let mut acc = ZERO;
                for j in 0..n {
                    acc += rho[(i, j)] * row[j].conj();
                }
                pop += row[i] * acc;
            }
            kept += pop.re;
            w += if k % 2 == 0 { pop.re } else { -pop.re };
        }
        values.push(FRAC_2_PI * w);
        flagged.push((trace - kept).abs() > EDGE_POPULATION);
    }
    if flagged.iter().any(|&f| f) {
        log::warn!("some Wigner points exceed the trusted truncation");
    }
    Ok(WignerGrid {
        points: points.to_vec(),
        values,
        flagged,
    })
}

/// Pure-state convenience wrapper around [`wigner`].
pub fn wigner_pure(psi: &CVec, points: &[c64]) -> Result<WignerGrid> {
    wigner(&projector(psi), points)
}

/// The same Wigner function from the Fock-basis series
/// `W(β) = (2/π) Σ_{mn} ρ_nm (−1)^n ⟨m|D(2β)|n⟩`.
pub fn wigner_series(rho: &CMat, beta: c64) -> f64 {
    let n = rho.nrows();
    let mut acc = ZERO;
    for col in 0..n {
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        for row in 0..n {
            acc += rho[(col, row)] * displacement_element(2.0 * beta, row, col) * sign;
        }
    }
    FRAC_2_PI * acc.re
}

/// Least-squares fit of an `n_max`-level density matrix to Wigner samples,
/// projected onto the positive semidefinite, unit-trace set.
pub fn reconstruct_from_wigner(grid: &WignerGrid, n_max: usize) -> Result<CMat> {
    let unknowns = n_max * n_max;
    if n_max == 0 {
        return Err(Error::InvalidDimension("reconstruction needs n_max ≥ 1".into()));
    }
    if grid.points.len() < unknowns {
        return Err(Error::Underdetermined {
            points: grid.points.len(),
            unknowns,
        });
    }
    // Hermitian basis: E_nn, (E_nm + E_mn)/√2, i(E_nm − E_mn)/√2 for n < m.
    // In that basis W(β) = Σ_k x_k Re Σ_{nm} B_k,nm M_mn(β) with
    // M_mn = (2/π)(−1)^n ⟨m|D(2β)|n⟩.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = Mat::<f64>::zeros(grid.points.len(), unknowns);
    for (row, &beta) in grid.points.iter().enumerate() {
        let m = CMat::from_fn(n_max, n_max, |r, c| {
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            displacement_element(2.0 * beta, r, c) * (FRAC_2_PI * sign)
        });
        // Tr(B M) with B = E_nm contributes M_mn.
        let mut k = 0;
        for n in 0..n_max {
            a[(row, k)] = m[(n, n)].re;
            k += 1;
            for mm in n + 1..n_max {
                a[(row, k)] = s * (m[(mm, n)] + m[(n, mm)]).re;
                a[(row, k + 1)] = s * (I * (m[(mm, n)] - m[(n, mm)])).re;
                k += 2;
            }
        }
    }
    let b = Mat::<f64>::from_fn(grid.points.len(), 1, |i, _| grid.values[i]);
    let x = a.qr().solve_lstsq(&b);
    let mut rho = CMat::zeros(n_max, n_max);
    let mut k = 0;
    for n in 0..n_max {
        rho[(n, n)] = cr(x[(k, 0)]);
        k += 1;
        for mm in n + 1..n_max {
            let (re, im) = (x[(k, 0)], x[(k + 1, 0)]);
            // B_re has (n,m) = (m,n) = s; B_im has (n,m) = i s, (m,n) = −i s.
            rho[(n, mm)] = c64::new(s * re, s * im);
            rho[(mm, n)] = c64::new(s * re, -s * im);
            k += 2;
        }
    }
    Ok(project_to_density(&rho))
}

/// Closest (Frobenius) unit-trace positive semidefinite matrix to a
/// Hermitian input: eigenvalues are projected onto the probability simplex.
pub fn project_to_density(h: &CMat) -> CMat {
    let sym = CMat::from_fn(h.nrows(), h.ncols(), |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
    let eig = HermitianEigen::new(sym.as_ref());
    let p = simplex_projection(&eig.values);
    let v = &eig.vectors;
    let scaled = CMat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * p[j]);
    &scaled * v.adjoint()
}

fn simplex_projection(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn state_fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let sqrt_rho = HermitianEigen::new(rho.as_ref()).map(|l| cr(l.max(0.0).sqrt()));
    let inner = &(&sqrt_rho * sigma) * &sqrt_rho;
    let herm = CMat::from_fn(inner.nrows(), inner.ncols(), |i, j| {
        0.5 * (inner[(i, j)] + inner[(j, i)].conj())
    });
    let eig = HermitianEigen::new(herm.as_ref());
    let t: f64 = eig.values.iter().map(|l| l.max(0.0).sqrt()).sum();
    t * t
}

/// Pauli matrices in the order `I, X, Y, Z`.
pub fn paulis() -> [Mat2; 4] {
    [
        [[ONE, ZERO], [ZERO, ONE]],
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, -I], [I, ZERO]],
        [[ONE, ZERO], [ZERO, -ONE]],
    ]
}

fn trace2(m: &Mat2) -> c64 {
    m[0][0] + m[1][1]
}

fn mat2_add(a: &Mat2, b: &Mat2, sb: f64) -> Mat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j] * sb))
}

fn mat2_scale(a: &Mat2, s: f64) -> Mat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
}

/// Density matrix of a cardinal state on the logical qubit.
pub fn cardinal_density(c: Cardinal) -> Mat2 {
    let a = c.amplitudes();
    std::array::from_fn(|i| std::array::from_fn(|j| a[i] * a[j].conj()))
}

/// Real 4×4 Pauli transfer matrix `R_AB = Tr(A G(B))/2`, basis `I, X, Y, Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTransferMatrix(pub [[f64; 4]; 4]);

impl PauliTransferMatrix {
    pub fn identity() -> Self {
        Self(std::array::from_fn(|i| {
            std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 })
        }))
    }

    /// `ρ ↦ (1−p) ρ + p I/2`.
    pub fn depolarizing(p: f64) -> Self {
        let mut r = Self::identity();
        for k in 1..4 {
            r.0[k][k] = 1.0 - p;
        }
        r
    }

    /// Build from the channel's action on each Pauli matrix.
    pub fn from_pauli_images(images: &[Mat2; 4]) -> Self {
        let p = paulis();
        Self(std::array::from_fn(|a| {
            std::array::from_fn(|b| 0.5 * trace2(&mat2_mul(&p[a], &images[b])).re)
        }))
    }

    pub fn from_unitary(u: &Mat2) -> Self {
        let ud = mat2_adjoint(u);
        let images = paulis().map(|p| mat2_mul(&mat2_mul(u, &p), &ud));
        Self::from_pauli_images(&images)
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.0
    }

    /// Largest deviation of the first row from `(1, 0, 0, 0)`.
    pub fn trace_deviation(&self) -> f64 {
        let r = &self.0[0];
        (r[0] - 1.0).abs().max(r[1].abs()).max(r[2].abs()).max(r[3].abs())
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_deviation() <= tol
    }

    pub fn transpose(&self) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| self.0[j][i])))
    }

    /// Apply the channel to a 2×2 operator.
    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        let p = paulis();
        let coeffs: [f64; 4] = std::array::from_fn(|b| trace2(&mat2_mul(&p[b], rho)).re);
        let mut out = [[ZERO; 2]; 2];
        for a in 0..4 {
            let c: f64 = (0..4).map(|b| self.0[a][b] * coeffs[b]).sum();
            out = mat2_add(&out, &p[a], 0.5 * c);
        }
        out
    }

    /// Average fidelity of the `(Z, −Z)` population map: probability that
    /// `|±Z⟩` is returned to itself.
    pub fn z_survival(&self) -> f64 {
        0.5 * (self.0[0][0] + self.0[3][3])
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("# basis I X Y Z\n");
        for row in &self.0 {
            let _ = writeln!(out, "{:+.9} {:+.9} {:+.9} {:+.9}", row[0], row[1], row[2], row[3]);
        }
        out
    }
}

impl Mul for &PauliTransferMatrix {
    type Output = PauliTransferMatrix;

    /// Composition: `(a * b)` applies `b` first.
    fn mul(self, rhs: &PauliTransferMatrix) -> PauliTransferMatrix {
        PauliTransferMatrix(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..4).map(|k| self.0[i][k] * rhs.0[k][j]).sum())
        }))
    }
}

impl Mul for PauliTransferMatrix {
    type Output = PauliTransferMatrix;

    #[allow(clippy::op_ref)]
    fn mul(self, rhs: PauliTransferMatrix) -> PauliTransferMatrix {
        &self * &rhs
    }
}

const PHYSICAL_TOL: f64 = 1e-9;

fn check_physical(m: &Mat2, label: &str) -> Result<()> {
    let herm = (m[0][1] - m[1][0].conj())
        .norm()
        .max(m[0][0].im.abs())
        .max(m[1][1].im.abs());
    let tr = trace2(m).re;
    // Eigenvalues of a 2×2 Hermitian matrix.
    let mean = 0.5 * tr;
    let disc = (0.25 * (m[0][0].re - m[1][1].re).powi(2) + m[0][1].norm_sqr()).sqrt();
    let min_eig = mean - disc;
    if !(herm <= PHYSICAL_TOL && tr <= 1.0 + PHYSICAL_TOL && min_eig >= -PHYSICAL_TOL) || !tr.is_finite() {
        return Err(Error::NonPhysical(format!(
            "output for {label}: trace {tr:.3e}, smallest eigenvalue {min_eig:.3e}, hermiticity error {herm:.3e}"
        )));
    }
    Ok(())
}

/// PTM from the outputs on the six cardinal inputs. The identity image is
/// averaged over the three complementary pairs.
fn ptm_from_cardinal_outputs(out: &[Mat2; 6]) -> PauliTransferMatrix {
    // Order matches Cardinal::ALL: +Z −Z +X −X +Y −Y.
    let id = mat2_scale(
        &mat2_add(
            &mat2_add(&mat2_add(&out[0], &out[1], 1.0), &mat2_add(&out[2], &out[3], 1.0), 1.0),
            &mat2_add(&out[4], &out[5], 1.0),
            1.0,
        ),
        1.0 / 3.0,
    );
    let images = [
        id,
        mat2_add(&out[2], &out[3], -1.0),
        mat2_add(&out[4], &out[5], -1.0),
        mat2_add(&out[0], &out[1], -1.0),
    ];
    PauliTransferMatrix::from_pauli_images(&images)
}

/// Process tomography of a logical channel with exact expectation values.
pub fn process_tomography(mut channel: impl FnMut(&Mat2) -> Result<Mat2>) -> Result<PauliTransferMatrix> {
    let mut out = [[[ZERO; 2]; 2]; 6];
    for (k, c) in Cardinal::ALL.into_iter().enumerate() {
        let o = channel(&cardinal_density(c))?;
        check_physical(&o, &format!("{c:?}"))?;
        out[k] = o;
    }
    Ok(ptm_from_cardinal_outputs(&out))
}

/// Process tomography where every Pauli expectation value is estimated from
/// `shots` binary measurements.
pub fn process_tomography_sampled<R: Rng>(
    mut channel: impl FnMut(&Mat2) -> Result<Mat2>,
    shots: u64,
    rng: &mut R,
) -> Result<PauliTransferMatrix> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shot count must be ≥ 1".into()));
    }
    let p = paulis();
    let mut out = [[[ZERO; 2]; 2]; 6];
    for (k, c) in Cardinal::ALL.into_iter().enumerate() {
        let o = channel(&cardinal_density(c))?;
        check_physical(&o, &format!("{c:?}"))?;
        let tr = trace2(&o).re.max(0.0);
        let mut est = mat2_scale(&p[0], 0.5 * tr);
        for pauli in &p[1..] {
            let e = if tr > 0.0 {
                trace2(&mat2_mul(pauli, &o)).re / tr
            } else {
                0.0
            };
            let prob = (0.5 * (1.0 + e)).clamp(0.0, 1.0);
            let hits = Binomial::new(shots, prob).expect("valid binomial").sample(rng);
            let sampled = 2.0 * hits as f64 / shots as f64 - 1.0;
            est = mat2_add(&est, pauli, 0.5 * tr * sampled);
        }
        out[k] = est;
    }
    Ok(ptm_from_cardinal_outputs(&out))
}

/// `F_avg = (Tr(R_idealᵀ R)/2 + 1)/3` for trace-preserving qubit channels.
pub fn average_fidelity(measured: &PauliTransferMatrix, ideal: &PauliTransferMatrix) -> Result<f64> {
    for r in [measured, ideal] {
        if !r.is_trace_preserving(PHYSICAL_TOL) {
            return Err(Error::NotTracePreserving(r.trace_deviation()));
        }
    }
    Ok((trace_product(ideal, measured) / 2.0 + 1.0) / 3.0)
}

/// Haar-average fidelity of a possibly trace-decreasing channel,
/// `(Tr(R_idealᵀ R)/2 + R_00)/3`. Reduces to [`average_fidelity`] when the
/// channel preserves trace.
pub fn leaky_average_fidelity(measured: &PauliTransferMatrix, ideal: &PauliTransferMatrix) -> f64 {
    (trace_product(ideal, measured) / 2.0 + measured.0[0][0]) / 3.0
}

fn trace_product(a: &PauliTransferMatrix, b: &PauliTransferMatrix) -> f64 {
    (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| a.0[i][j] * b.0[i][j])
        .sum()
}

/// Difference of process fidelities used to isolate one gate from the
/// encode/decode overhead: `F(R_full, ideal) − F(R_encdec, I)`. Negative
/// when the gate adds error; its magnitude estimates the gate infidelity.
pub fn delta_fidelity(
    full: &PauliTransferMatrix,
    encdec: &PauliTransferMatrix,
    ideal: &PauliTransferMatrix,
) -> Result<f64> {
    Ok(average_fidelity(full, ideal)? - average_fidelity(encdec, &PauliTransferMatrix::identity())?)
}

/// Haar-random pure qubit state.
pub fn haar_state<R: Rng>(rng: &mut R) -> [c64; 2] {
    let mut z: [c64; 2] = std::array::from_fn(|_| c64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)));
    let n = (z[0].norm_sqr() + z[1].norm_sqr()).sqrt();
    z.iter_mut().for_each(|v| *v /= n);
    z
}

/// Monte-Carlo estimate of `∫dψ ⟨ψ|V† G(|ψ⟩⟨ψ|) V|ψ⟩` over Haar-random
/// inputs.
pub fn haar_average_fidelity<R: Rng>(
    mut channel: impl FnMut(&Mat2) -> Mat2,
    ideal: &Mat2,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let mut acc = 0.0;
    for _ in 0..samples {
        let psi = haar_state(rng);
        let rho: Mat2 = std::array::from_fn(|i| std::array::from_fn(|j| psi[i] * psi[j].conj()));
        let out = channel(&rho);
        let phi = [
            ideal[0][0] * psi[0] + ideal[0][1] * psi[1],
            ideal[1][0] * psi[0] + ideal[1][1] * psi[1],
        ];
        let mut f = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                f += phi[i].conj() * out[i][j] * phi[j];
            }
        }
        acc += f.re;
    }
    acc / samples as f64
}

/// Literature reference values for encode/decode process fidelities,
/// reported for comparison only.
pub const REFERENCE_ENCDEC_PROCESS_FIDELITY: f64 = 0.964;
pub const REFERENCE_NOOP_PROCESS_FIDELITY: f64 = 0.982;

/// Convenience for tests and reports: coherent state `|β⟩` on `n` levels.
pub fn coherent_state(beta: c64, n: usize) -> CVec {
    let mut v = CVec::zeros(n);
    let mut c = cr((-0.5 * beta.norm_sqr()).exp());
    for k in 0..n {
        if k > 0 {
            c = c * beta / (k as f64).sqrt();
        }
        v[k] = c;
    }
    v
}

/// `Tr(ρ Π)` for an oscillator density matrix.
pub fn parity(rho: &CMat) -> f64 {
    (0..rho.nrows())
        .map(|k| if k % 2 == 0 { rho[(k, k)].re } else { -rho[(k, k)].re })
        .sum()
}

/// `∫ W d²β` by the rectangle rule on a uniform square grid.
pub fn wigner_integral(grid: &WignerGrid, spacing: f64) -> f64 {
    grid.values.iter().sum::<f64>() * spacing * spacing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catcode::{equal_up_to_phase, Gate, LogicalBasis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn displacement_basics() {
        let d0 = displacement(ZERO, 10).unwrap();
        assert!(linalg::max_abs_diff(d0.as_ref(), CMat::identity(10, 10).as_ref()) < 1e-14);

        let beta = c64::new(0.6, 0.8);
        let d = displacement(beta, 30).unwrap();
        let mut vac = CVec::zeros(30);
        vac[0] = ONE;
        let coh = &d * &vac;
        let mean: f64 = (0..30).map(|n| n as f64 * coh[n].norm_sqr()).sum();
        assert_close(mean, 1.0, 1e-6);
        let expect = coherent_state(beta, 30);
        for n in 0..15 {
            assert!((coh[n] - expect[n]).norm() < 1e-8);
        }
        let back = &displacement(-beta, 30).unwrap() * &d;
        assert!(linalg::max_abs_diff(back.as_ref(), CMat::identity(30, 30).as_ref()) < 1e-9);
    }

    #[test]
    fn laguerre_elements_match_truncated_displacement() {
        let beta = c64::new(-0.4, 0.7);
        let d = displacement(beta, 60).unwrap();
        for m in 0..8 {
            for n in 0..8 {
                assert!((d[(m, n)] - displacement_element(beta, m, n)).norm() < 1e-12, "{m} {n}");
            }
        }
    }

    #[test]
    fn vacuum_and_coherent_wigner() {
        let mut vac = CVec::zeros(12);
        vac[0] = ONE;
        let pts = [ZERO, c64::new(0.5, 0.0), c64::new(-0.3, 0.9)];
        let g = wigner_pure(&vac, &pts).unwrap();
        for (b, w) in pts.iter().zip(&g.values) {
            assert_close(*w, FRAC_2_PI * (-2.0 * b.norm_sqr()).exp(), 1e-10);
        }
        let beta0 = c64::new(0.7, -0.4);
        let coh = coherent_state(beta0, 30);
        let pts = square_grid(1.5, 5);
        let g = wigner_pure(&coh, &pts).unwrap();
        for (b, w) in pts.iter().zip(&g.values) {
            assert_close(*w, FRAC_2_PI * (-2.0 * (b - beta0).norm_sqr()).exp(), 1e-6);
        }
        assert!(!g.any_flagged());
    }

    #[test]
    fn codeword_wigner_agrees_between_routes() {
        let b = LogicalBasis::standard(HilbertDims::new(24, 2).unwrap()).unwrap();
        let rho = reduce_to_oscillator(&projector(b.plus_z()), b.dims()).unwrap();
        let pts = [
            ZERO,
            c64::new(0.3, 0.2),
            c64::new(1.2, -0.5),
            c64::new(-0.8, 1.1),
            c64::new(0.0, 1.7),
        ];
        let g = wigner(&rho, &pts).unwrap();
        for (beta, w) in pts.iter().zip(&g.values) {
            assert_close(*w, wigner_series(&rho, *beta), 1e-8);
        }
        // Four-fold symmetry: W(iβ) = W(β) for the +Z codeword.
        let rot = wigner(&rho, &pts.map(|p| I * p)).unwrap();
        for (a, b) in g.values.iter().zip(&rot.values) {
            assert_close(*a, *b, 1e-9);
        }
        assert_close(g.values[0], FRAC_2_PI * parity(&rho), 1e-9);
    }

    #[test]
    fn wigner_is_normalized() {
        let b = LogicalBasis::standard(HilbertDims::new(24, 2).unwrap()).unwrap();
        let rho = reduce_to_oscillator(&projector(b.minus_z()), b.dims()).unwrap();
        let n = 61;
        let extent = 4.5;
        let g = wigner(&rho, &square_grid(extent, n)).unwrap();
        let spacing = 2.0 * extent / (n - 1) as f64;
        assert_close(wigner_integral(&g, spacing), 1.0, 0.02);
        assert!(g.values.iter().all(|w| w.abs() <= FRAC_2_PI + 1e-9));
    }

    #[test]
    fn far_points_are_flagged() {
        let mut vac = CVec::zeros(4);
        vac[0] = ONE;
        let g = wigner_pure(&vac, &[c64::new(3.0, 0.0)]).unwrap();
        assert!(!g.any_flagged());
        let g = wigner_pure(&vac, &[c64::new(30.0, 0.0)]).unwrap();
        assert!(g.any_flagged());
    }

    #[test]
    fn reconstruction_round_trips() {
        let mut vac = CVec::zeros(6);
        vac[0] = ONE;
        let pts = square_grid(2.5, 15);
        let g = wigner_pure(&vac, &pts).unwrap();
        let rho = reconstruct_from_wigner(&g, 6).unwrap();
        assert!(state_fidelity(&rho, &projector(&vac)) > 0.999);

        let b = LogicalBasis::standard(HilbertDims::new(24, 2).unwrap()).unwrap();
        let osc = reduce_to_oscillator(&projector(b.plus_z()), b.dims()).unwrap();
        let pts = square_grid(4.0, 41);
        let g = wigner(&osc, &pts).unwrap();
        let rho = reconstruct_from_wigner(&g, 20).unwrap();
        let psi = CVec::from_fn(20, |n| b.plus_z()[b.dims().index(n, 0)]);
        let f = linalg::inner(&psi, &(&rho * &psi)).re;
        assert!(f > 0.99, "{f}");
    }

    #[test]
    fn noisy_reconstruction_stays_physical() {
        let coh = coherent_state(c64::new(0.5, 0.5), 20);
        let pts = square_grid(3.0, 25);
        let mut g = wigner_pure(&coh, &pts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for w in &mut g.values {
            let n: f64 = StandardNormal.sample(&mut rng);
            *w += 0.01 * n;
        }
        let rho = reconstruct_from_wigner(&g, 8).unwrap();
        assert!(linalg::hermiticity_error(rho.as_ref()) < 1e-12);
        assert_close(linalg::trace(rho.as_ref()).re, 1.0, 1e-12);
        let eig = HermitianEigen::new(rho.as_ref());
        assert!(eig.values.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn underdetermined_reconstruction_names_point_count() {
        let g = WignerGrid {
            points: vec![ZERO; 10],
            values: vec![0.0; 10],
            flagged: vec![false; 10],
        };
        match reconstruct_from_wigner(&g, 4) {
            Err(Error::Underdetermined { points, unknowns }) => {
                assert_eq!((points, unknowns), (10, 16));
            }
            other => panic!("{other:?}"),
        }
    }

    fn unitary_channel(u: Mat2) -> impl FnMut(&Mat2) -> Result<Mat2> {
        move |rho| Ok(mat2_mul(&mat2_mul(&u, rho), &mat2_adjoint(&u)))
    }

    #[test]
    fn tomography_of_standard_gates() {
        let id = process_tomography(unitary_channel(Gate::I.unitary())).unwrap();
        assert!(average_fidelity(&id, &PauliTransferMatrix::identity()).unwrap() > 1.0 - 1e-15);
        let x = process_tomography(unitary_channel(Gate::X180.unitary())).unwrap();
        let expect = [1.0, 1.0, -1.0, -1.0];
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { expect[i] } else { 0.0 };
                assert_close(x.0[i][j], e, 1e-15);
            }
        }
        let t = process_tomography(unitary_channel(Gate::T.unitary())).unwrap();
        // Conjugating X by diag(1, e^{iπ/4}) rotates it toward Y by π/4.
        let c = (PI / 4.0).cos();
        assert_close(t.0[1][1], c, 1e-12);
        assert_close(t.0[2][1], c, 1e-12);
        assert_close(t.0[1][2], -c, 1e-12);
        assert_close(t.0[2][2], c, 1e-12);
        assert_close(t.0[3][3], 1.0, 1e-12);
    }

    #[test]
    fn tomography_matches_direct_unitary_ptm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let u = random_unitary(&mut rng);
            let a = process_tomography(unitary_channel(u)).unwrap();
            let b = PauliTransferMatrix::from_unitary(&u);
            for i in 0..4 {
                for j in 0..4 {
                    assert_close(a.0[i][j], b.0[i][j], 1e-12);
                }
            }
        }
    }

    fn random_unitary(rng: &mut ChaCha8Rng) -> Mat2 {
        let a = haar_state(rng);
        let phase = c64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
        [[a[0], -a[1].conj() * phase], [a[1], a[0].conj() * phase]]
    }

    #[test]
    fn composition_is_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u = random_unitary(&mut rng);
            let v = random_unitary(&mut rng);
            let composed = PauliTransferMatrix::from_unitary(&mat2_mul(&v, &u));
            let product = PauliTransferMatrix::from_unitary(&v) * PauliTransferMatrix::from_unitary(&u);
            for i in 0..4 {
                for j in 0..4 {
                    assert_close(composed.0[i][j], product.0[i][j], 1e-9);
                }
            }
        }
    }

    #[test]
    fn average_fidelity_values() {
        let x = PauliTransferMatrix::from_unitary(&Gate::X180.unitary());
        assert_close(average_fidelity(&x, &x).unwrap(), 1.0, 1e-15);
        let full = PauliTransferMatrix(std::array::from_fn(|i| {
            std::array::from_fn(|j| if i == 0 && j == 0 { 1.0 } else { 0.0 })
        }));
        assert_close(
            average_fidelity(&full, &PauliTransferMatrix::identity()).unwrap(),
            0.5,
            1e-15,
        );

        // Haar oracle for the depolarizing channel at p = 0.2.
        let p = 0.2;
        let dep = PauliTransferMatrix::depolarizing(p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mc = haar_average_fidelity(|rho| dep.apply(rho), &Gate::I.unitary(), 2000, &mut rng);
        let f = average_fidelity(&dep, &PauliTransferMatrix::identity()).unwrap();
        assert_close(f, 1.0 - p / 2.0, 1e-12);
        assert_close(mc, f, 1e-12);

        let mut leaky = PauliTransferMatrix::identity();
        leaky.0[0][0] = 0.9;
        assert!(matches!(
            average_fidelity(&leaky, &PauliTransferMatrix::identity()),
            Err(Error::NotTracePreserving(_))
        ));
    }

    #[test]
    fn leaky_fidelity_matches_haar_average() {
        // Amplitude damping toward a third (leaked) level: |1⟩ loses
        // population γ, coherences shrink by √(1−γ).
        let gamma: f64 = 0.3;
        let s = (1.0 - gamma).sqrt();
        let channel = |rho: &Mat2| -> Mat2 { [[rho[0][0], rho[0][1] * s], [rho[1][0] * s, rho[1][1] * (1.0 - gamma)]] };
        let r = process_tomography(|rho| Ok(channel(rho))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mc = haar_average_fidelity(channel, &Gate::I.unitary(), 20_000, &mut rng);
        let f = leaky_average_fidelity(&r, &PauliTransferMatrix::identity());
        assert_close(f, mc, 5e-3);
    }

    #[test]
    fn average_fidelity_is_basis_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = PauliTransferMatrix::from_unitary(&random_unitary(&mut rng));
        let w_inv = w.transpose();
        let meas = PauliTransferMatrix::depolarizing(0.1) * PauliTransferMatrix::from_unitary(&Gate::H.unitary());
        let ideal = PauliTransferMatrix::from_unitary(&Gate::Y90.unitary());
        let f0 = average_fidelity(&meas, &ideal).unwrap();
        let f1 = average_fidelity(&((w * meas) * w_inv), &((w * ideal) * w_inv)).unwrap();
        assert_close(f0, f1, 1e-9);
    }

    #[test]
    fn delta_fidelity_subtracts_baseline() {
        let encdec = PauliTransferMatrix::depolarizing(0.04);
        let gate = PauliTransferMatrix::from_unitary(&Gate::X180.unitary());
        let full = (encdec * PauliTransferMatrix::depolarizing(0.02)) * gate;
        let d = delta_fidelity(&full, &encdec, &gate).unwrap();
        assert!(d < 0.0);
        assert_close(-d, 0.01, 2e-3);
    }

    #[test]
    fn sampled_tomography_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = Gate::X90.unitary();
        let exact = PauliTransferMatrix::from_unitary(&u);
        let mut errs = Vec::new();
        for shots in [100u64, 10_000, 1_000_000] {
            let r = process_tomography_sampled(unitary_channel(u), shots, &mut rng).unwrap();
            let e = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| (r.0[i][j] - exact.0[i][j]).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[2] < errs[0]);
        assert!(errs[2] < 5e-3);
    }

    #[test]
    fn non_physical_outputs_are_rejected() {
        let r = process_tomography(|_| Ok([[cr(1.5), ZERO], [ZERO, ZERO]]));
        assert!(matches!(r, Err(Error::NonPhysical(_))));
        let r = process_tomography(|_| Ok([[cr(1.2), ZERO], [ZERO, cr(-0.2)]]));
        assert!(matches!(r, Err(Error::NonPhysical(_))));
    }

    #[test]
    fn unitary_ptm_is_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_unitary(&mut rng);
        let r = PauliTransferMatrix::from_unitary(&u);
        let rt = r.transpose();
        let prod = rt * r;
        for i in 0..4 {
            for j in 0..4 {
                assert_close(prod.0[i][j], if i == j { 1.0 } else { 0.0 }, 1e-12);
            }
        }
        assert!(equal_up_to_phase(&u, &u, 0.0));
    }
}
