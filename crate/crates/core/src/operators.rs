// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Truncated ladder operators and the static/drive Hamiltonians of the
//! oscillator ⊗ transmon system.
//!
//! Units: ħ = 1, time in ns, angular frequency in rad/ns. Dynamics are
//! written in the frame rotating at both drive carriers, so the bare mode
//! frequencies only survive as metadata. Joint basis states are indexed
//! oscillator-major: `index = n_osc_level * n_trans + trans_level`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c64, cr, CMat, SparseOp, I, ZERO};

/// Convert a linear frequency in MHz to angular frequency in rad/ns.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    mhz * 2.0 * PI * 1e-3
}

/// Inverse of [`mhz_to_angular`].
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e-3)
}

/// Truncation of the joint space.
///
/// A mode with a single level is allowed; its ladder operator is zero,
/// which gives an oscillator-only or transmon-only system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertDims {
    n_osc: usize,
    n_trans: usize,
}

impl HilbertDims {
    pub fn new(n_osc: usize, n_trans: usize) -> Result<Self> {
        if n_osc == 0 || n_trans == 0 {
            return Err(Error::InvalidDimension(format!(
                "mode truncations must be positive, got ({n_osc}, {n_trans})"
            )));
        }
        if n_osc * n_trans < 2 {
            return Err(Error::InvalidDimension("joint dimension must be at least 2".into()));
        }
        Ok(Self { n_osc, n_trans })
    }

    pub fn n_osc(&self) -> usize {
        self.n_osc
    }

    pub fn n_trans(&self) -> usize {
        self.n_trans
    }

    pub fn dim(&self) -> usize {
        self.n_osc * self.n_trans
    }

    #[inline]
    pub fn index(&self, osc: usize, trans: usize) -> usize {
        debug_assert!(osc < self.n_osc && trans < self.n_trans);
        osc * self.n_trans + trans
    }

    /// Same transmon truncation, oscillator truncation grown by `pad`.
    pub fn padded(&self, pad: usize) -> Self {
        Self {
            n_osc: self.n_osc + pad,
            n_trans: self.n_trans,
        }
    }
}

/// Static system parameters in internal units (rad/ns, ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianModel {
    /// Dispersive shift χ.
    pub chi: f64,
    /// Oscillator self-Kerr K.
    pub kerr: f64,
    /// Transmon anharmonicity α.
    pub anharmonicity: f64,
    /// Photon-number dependence of the dispersive shift, χ′.
    pub chi_prime: f64,
    pub t1_transmon: f64,
    pub tphi_transmon: f64,
    pub t1_oscillator: f64,
    /// Transmon carrier (metadata only).
    pub omega_t: f64,
    /// Oscillator carrier (metadata only).
    pub omega_c: f64,
}

impl HamiltonianModel {
    /// The characterized device: χ/2π = −2.194 MHz, K/2π = −3.7 kHz,
    /// α/2π = −236 MHz, χ′/2π = −19 kHz, T1 = 170 µs, Tφ = 43 µs,
    /// T_cav = 2.7 ms, carriers 5664.0 / 4452.6 MHz.
    pub fn reference() -> Self {
        Self {
            chi: mhz_to_angular(-2.194),
            kerr: mhz_to_angular(-0.0037),
            anharmonicity: mhz_to_angular(-236.0),
            chi_prime: mhz_to_angular(-0.019),
            t1_transmon: 170_000.0,
            tphi_transmon: 43_000.0,
            t1_oscillator: 2_700_000.0,
            omega_t: mhz_to_angular(5664.0),
            omega_c: mhz_to_angular(4452.6),
        }
    }

    /// A model with every coupling and rate switched off.
    pub fn free() -> Self {
        Self {
            chi: 0.0,
            kerr: 0.0,
            anharmonicity: 0.0,
            chi_prime: 0.0,
            t1_transmon: f64::INFINITY,
            tphi_transmon: f64::INFINITY,
            t1_oscillator: f64::INFINITY,
            omega_t: 0.0,
            omega_c: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let couplings = [self.chi, self.kerr, self.anharmonicity, self.chi_prime];
        if couplings.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("Hamiltonian couplings must be finite".into()));
        }
        for (name, t) in [
            ("t1_transmon", self.t1_transmon),
            ("tphi_transmon", self.tphi_transmon),
            ("t1_oscillator", self.t1_oscillator),
        ] {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0 (use infinity to disable), got {t}"
                )));
            }
        }
        Ok(())
    }

    /// Eigenvalue of the static Hamiltonian on `|n⟩ ⊗ |m⟩`.
    pub fn level_energy(&self, n: usize, m: usize) -> f64 {
        let n = n as f64;
        let m = m as f64;
        let nn1 = n * (n - 1.0);
        self.chi * n * m
            + 0.5 * self.kerr * nn1
            + 0.5 * self.anharmonicity * m * (m - 1.0)
            + 0.5 * self.chi_prime * m * nn1
    }
}

/// Single-mode annihilation operator on `n` levels.
pub fn annihilation(n: usize) -> Result<CMat> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "annihilation operator needs at least 2 levels, got {n}"
        )));
    }
    Ok(ladder(n))
}

fn ladder(n: usize) -> CMat {
    let mut a = CMat::zeros(n, n);
    for k in 0..n.saturating_sub(1) {
        a[(k, k + 1)] = cr(((k + 1) as f64).sqrt());
    }
    a
}

/// `â ⊗ 1` on the joint space.
pub fn oscillator_annihilation(dims: HilbertDims) -> CMat {
    let d = dims.dim();
    let mut a = CMat::zeros(d, d);
    for n in 1..dims.n_osc {
        for m in 0..dims.n_trans {
            a[(dims.index(n - 1, m), dims.index(n, m))] = cr((n as f64).sqrt());
        }
    }
    a
}

/// `1 ⊗ b̂` on the joint space.
pub fn transmon_annihilation(dims: HilbertDims) -> CMat {
    let d = dims.dim();
    let mut b = CMat::zeros(d, d);
    for n in 0..dims.n_osc {
        for m in 1..dims.n_trans {
            b[(dims.index(n, m - 1), dims.index(n, m))] = cr((m as f64).sqrt());
        }
    }
    b
}

/// Diagonal of the static Hamiltonian in the joint Fock basis.
pub fn static_diagonal(model: &HamiltonianModel, dims: HilbertDims) -> Vec<f64> {
    let mut diag = vec![0.0; dims.dim()];
    for n in 0..dims.n_osc {
        for m in 0..dims.n_trans {
            diag[dims.index(n, m)] = model.level_energy(n, m);
        }
    }
    diag
}

/// `H0 = χ â†â b̂†b̂ + (K/2) â†²â² + (α/2) b̂†²b̂² + (χ′/2) b̂†b̂ â†²â²`.
pub fn build_static_hamiltonian(model: &HamiltonianModel, dims: HilbertDims) -> CMat {
    let diag = static_diagonal(model, dims);
    let mut h = CMat::zeros(dims.dim(), dims.dim());
    for (i, e) in diag.into_iter().enumerate() {
        h[(i, i)] = cr(e);
    }
    h
}

/// Which quadrature of which drive a control sample multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriveQuadrature {
    OscillatorRe = 0,
    OscillatorIm = 1,
    TransmonRe = 2,
    TransmonIm = 3,
}

impl DriveQuadrature {
    pub const ALL: [DriveQuadrature; 4] = [
        DriveQuadrature::OscillatorRe,
        DriveQuadrature::OscillatorIm,
        DriveQuadrature::TransmonRe,
        DriveQuadrature::TransmonIm,
    ];
}

/// The four Hermitian drive generators, so that
/// `H_drive = Re εC·X_C + Im εC·Y_C + Re εT·X_T + Im εT·Y_T`
/// reproduces `εC â + εT b̂ + h.c.`.
#[derive(Debug, Clone)]
pub struct DriveOperators {
    pub x_c: CMat,
    pub y_c: CMat,
    pub x_t: CMat,
    pub y_t: CMat,
    sparse: [SparseOp; 4],
}

impl DriveOperators {
    pub fn get(&self, q: DriveQuadrature) -> &CMat {
        match q {
            DriveQuadrature::OscillatorRe => &self.x_c,
            DriveQuadrature::OscillatorIm => &self.y_c,
            DriveQuadrature::TransmonRe => &self.x_t,
            DriveQuadrature::TransmonIm => &self.y_t,
        }
    }

    pub fn sparse(&self, q: DriveQuadrature) -> &SparseOp {
        &self.sparse[q as usize]
    }

    /// Drive Hamiltonian for one control sample
    /// `[Re εC, Im εC, Re εT, Im εT]`.
    pub fn hamiltonian(&self, sample: &[f64; 4]) -> CMat {
        let d = self.x_c.nrows();
        let mut h = CMat::zeros(d, d);
        self.add_to(sample, &mut h);
        h
    }

    pub(crate) fn add_to(&self, sample: &[f64; 4], h: &mut CMat) {
        for q in DriveQuadrature::ALL {
            let amp = sample[q as usize];
            if amp == 0.0 {
                continue;
            }
            for &(i, j, v) in &self.sparse[q as usize].entries {
                h[(i, j)] += v * amp;
            }
        }
    }
}

/// `X = A + A†`, `Y = i(A − A†)`.
fn quadratures(a: &CMat) -> (CMat, CMat) {
    let ad = a.adjoint().to_owned();
    let x = a + &ad;
    let diff = a - &ad;
    let y = CMat::from_fn(diff.nrows(), diff.ncols(), |i, j| diff[(i, j)] * I);
    (x, y)
}

pub fn build_drive_operators(dims: HilbertDims) -> DriveOperators {
    let (x_c, y_c) = quadratures(&oscillator_annihilation(dims));
    let (x_t, y_t) = quadratures(&transmon_annihilation(dims));
    let sparse = [
        SparseOp::from_dense(x_c.as_ref()),
        SparseOp::from_dense(y_c.as_ref()),
        SparseOp::from_dense(x_t.as_ref()),
        SparseOp::from_dense(y_t.as_ref()),
    ];
    DriveOperators {
        x_c,
        y_c,
        x_t,
        y_t,
        sparse,
    }
}

/// Joint-space basis vector `|n⟩ ⊗ |m⟩` as a dense column.
pub fn basis_state(dims: HilbertDims, osc: usize, trans: usize) -> Result<crate::linalg::CVec> {
    if osc >= dims.n_osc || trans >= dims.n_trans {
        return Err(Error::InvalidState(format!(
            "level ({osc}, {trans}) outside truncation ({}, {})",
            dims.n_osc, dims.n_trans
        )));
    }
    let mut v = crate::linalg::CVec::zeros(dims.dim());
    v[dims.index(osc, trans)] = c64::new(1.0, 0.0);
    Ok(v)
}

/// Embed a joint-space operator at truncation `from` into the upper-left
/// block of truncation `to` (same transmon levels).
pub fn embed_operator(op: &CMat, from: HilbertDims, to: HilbertDims) -> Result<CMat> {
    if from.n_trans != to.n_trans || from.n_osc > to.n_osc {
        return Err(Error::InvalidDimension(format!(
            "cannot embed ({}, {}) into ({}, {})",
            from.n_osc, from.n_trans, to.n_osc, to.n_trans
        )));
    }
    let mut out = CMat::zeros(to.dim(), to.dim());
    for n1 in 0..from.n_osc {
        for m1 in 0..from.n_trans {
            for n2 in 0..from.n_osc {
                for m2 in 0..from.n_trans {
                    let v = op[(from.index(n1, m1), from.index(n2, m2))];
                    if v != ZERO {
                        out[(to.index(n1, m1), to.index(n2, m2))] = v;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_error, max_abs_diff};

    fn dims(n: usize, m: usize) -> HilbertDims {
        HilbertDims::new(n, m).unwrap()
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(2).unwrap();
        assert_eq!(a[(0, 1)], cr(1.0));
        assert_eq!(a[(0, 0)], ZERO);
        assert_eq!(a[(1, 0)], ZERO);
        assert_eq!(a[(1, 1)], ZERO);

        let a3 = annihilation(3).unwrap();
        assert_eq!(a3[(1, 2)], cr(2f64.sqrt()));

        let a4 = annihilation(4).unwrap();
        let mut ket3 = crate::linalg::CVec::zeros(4);
        ket3[3] = cr(1.0);
        let out = &a4 * &ket3;
        for k in 0..4 {
            let expect = if k == 2 { 3f64.sqrt() } else { 0.0 };
            assert!((out[k] - cr(expect)).norm() < 1e-15);
        }
    }

    #[test]
    fn annihilation_rejects_small_dimension() {
        assert!(matches!(annihilation(1), Err(Error::InvalidDimension(_))));
        assert!(matches!(annihilation(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn dims_reject_empty_modes() {
        assert!(HilbertDims::new(0, 2).is_err());
        assert!(HilbertDims::new(1, 1).is_err());
        assert_eq!(dims(6, 2).dim(), 12);
        assert_eq!(dims(6, 2).index(3, 1), 7);
    }

    #[test]
    fn static_hamiltonian_chi_only() {
        let model = HamiltonianModel {
            chi: -2.0 * PI * 2.194e-3,
            ..HamiltonianModel::free()
        };
        let h = build_static_hamiltonian(&model, dims(2, 2));
        let expect = [0.0, 0.0, 0.0, -2.0 * PI * 2.194e-3];
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { expect[i] } else { 0.0 };
                assert!((h[(i, j)] - cr(e)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn static_hamiltonian_zero_couplings() {
        let h = build_static_hamiltonian(&HamiltonianModel::free(), dims(5, 2));
        assert_eq!(crate::linalg::max_abs(h.as_ref()), 0.0);
    }

    #[test]
    fn static_hamiltonian_kerr_entry() {
        let kerr = -2.0 * PI * 3.7e-6;
        let model = HamiltonianModel {
            kerr,
            ..HamiltonianModel::free()
        };
        let d = dims(8, 2);
        let h = build_static_hamiltonian(&model, d);
        let i = d.index(6, 0);
        assert!((h[(i, i)].re - kerr / 2.0 * 6.0 * 5.0).abs() < 1e-18);
    }

    #[test]
    fn static_hamiltonian_excited_branch() {
        let model = HamiltonianModel::reference();
        let d = dims(10, 2);
        let h = build_static_hamiltonian(&model, d);
        for n in 0..10 {
            let nf = n as f64;
            let expect = model.chi * nf + 0.5 * model.kerr * nf * (nf - 1.0) + 0.5 * model.chi_prime * nf * (nf - 1.0);
            let i = d.index(n, 1);
            assert!((h[(i, i)].re - expect).abs() < 1e-15);
        }
        assert!(hermiticity_error(h.as_ref()) < 1e-12);
    }

    #[test]
    fn static_hamiltonian_embeds_as_upper_block() {
        let model = HamiltonianModel::reference();
        let small = dims(7, 3);
        let big = small.padded(4);
        let hs = build_static_hamiltonian(&model, small);
        let hb = build_static_hamiltonian(&model, big);
        let embedded = embed_operator(&hs, small, big).unwrap();
        for n1 in 0..7 {
            for m1 in 0..3 {
                for n2 in 0..7 {
                    for m2 in 0..3 {
                        let (i, j) = (big.index(n1, m1), big.index(n2, m2));
                        assert_eq!(embedded[(i, j)], hb[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn drive_operators_are_hermitian() {
        let ops = build_drive_operators(dims(6, 3));
        for q in DriveQuadrature::ALL {
            assert!(hermiticity_error(ops.get(q).as_ref()) < 1e-15);
        }
    }

    #[test]
    fn real_oscillator_drive_displaces_vacuum() {
        let d = dims(3, 1);
        let ops = build_drive_operators(d);
        let eps = 0.7;
        let h = ops.hamiltonian(&[eps, 0.0, 0.0, 0.0]);
        let vac = basis_state(d, 0, 0).unwrap();
        let out = &h * &vac;
        assert!((out[d.index(1, 0)] - cr(eps)).norm() < 1e-15);
        assert!(out[d.index(0, 0)].norm() < 1e-15);
        assert!(out[d.index(2, 0)].norm() < 1e-15);
    }

    #[test]
    fn quadrature_decomposition_matches_complex_drive() {
        let d = dims(4, 1);
        let ops = build_drive_operators(d);
        let eps = c64::new(1.0, 2.0);
        let h = ops.hamiltonian(&[eps.re, eps.im, 0.0, 0.0]);
        let a = oscillator_annihilation(d);
        let direct = CMat::from_fn(4, 4, |i, j| eps * a[(i, j)] + eps.conj() * a[(j, i)].conj());
        assert!(max_abs_diff(h.as_ref(), direct.as_ref()) < 1e-15);
    }

    #[test]
    fn unit_conversion_round_trips() {
        assert!((mhz_to_angular(1.0) - 2.0 * PI * 1e-3).abs() < 1e-18);
        assert!((angular_to_mhz(mhz_to_angular(-2.194)) + 2.194).abs() < 1e-12);
    }
}
