// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Four-component cat-code logical states and the state-transfer sets that
//! define encode/decode, logical gates and auxiliary operations.
//!
//! The logical Z eigenstates are
//! `|±Z_L⟩ ∝ |α⟩ + |−α⟩ ± |iα⟩ ± |−iα⟩`, i.e. the even-parity cat states
//! supported on photon numbers `n ≡ 0 (mod 4)` and `n ≡ 2 (mod 4)`. The
//! transmon sits in `|g⟩` for every encoded state. Index 0 of a logical
//! 2-vector is `|+Z_L⟩`, index 1 is `|−Z_L⟩`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use crate::dynamics::{StateTransfer, StateTransferSet};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat, CVec, I, ONE, ZERO};
use crate::operators::{basis_state, HamiltonianModel, HilbertDims};

/// Largest tolerated norm outside the truncation for a codeword.
pub const CODEWORD_TAIL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodewordSign {
    Plus,
    Minus,
}

impl CodewordSign {
    fn residue(self) -> usize {
        match self {
            CodewordSign::Plus => 0,
            CodewordSign::Minus => 2,
        }
    }
}

/// Oscillator-only codeword on `n_osc` Fock levels, normalized on the
/// truncation. Fails when the discarded tail carries more than
/// [`CODEWORD_TAIL_TOLERANCE`] of the norm.
pub fn codeword(alpha: c64, sign: CodewordSign, n_osc: usize) -> Result<CVec> {
    let x = alpha.norm_sqr();
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cat amplitude must be non-zero, got {alpha}"
        )));
    }
    let residue = sign.residue();
    if n_osc <= residue {
        return Err(Error::Truncation(format!(
            "{n_osc} oscillator levels cannot hold a codeword supported on n ≡ {residue} mod 4"
        )));
    }

    // α^n / √n!, restricted to the codeword's residue class.
    let mut coeff = ONE;
    let mut v = CVec::zeros(n_osc);
    for n in 0..n_osc {
        if n > 0 {
            coeff = coeff * alpha / (n as f64).sqrt();
        }
        if n % 4 == residue {
            v[n] = coeff;
        }
    }
    let kept: f64 = (0..n_osc).map(|n| v[n].norm_sqr()).sum();

    // Discarded weight Σ_{n ≥ n_osc, n ≡ r} x^n/n!, summed in log space.
    let mut tail = 0.0;
    let mut n = n_osc + (4 + residue - n_osc % 4) % 4;
    let mut log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    loop {
        let term = (n as f64 * x.ln() - log_fact).exp();
        tail += term;
        if (n as f64) > x && term < 1e-30 * kept.max(tail) {
            break;
        }
        for k in n + 1..=n + 4 {
            log_fact += (k as f64).ln();
        }
        n += 4;
    }
    let lost = tail / (kept + tail);
    if lost > CODEWORD_TAIL_TOLERANCE {
        return Err(Error::Truncation(format!(
            "codeword with |α|² = {x} loses {lost:.3e} of its norm beyond {n_osc} levels"
        )));
    }
    let norm = kept.sqrt();
    for n in 0..n_osc {
        v[n] /= norm;
    }
    Ok(v)
}

/// Cardinal points of the logical Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cardinal {
    PlusZ,
    MinusZ,
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Cardinal {
    pub const ALL: [Cardinal; 6] = [
        Cardinal::PlusZ,
        Cardinal::MinusZ,
        Cardinal::PlusX,
        Cardinal::MinusX,
        Cardinal::PlusY,
        Cardinal::MinusY,
    ];

    /// Amplitudes on `(|+Z_L⟩, |−Z_L⟩)`.
    pub fn amplitudes(self) -> [c64; 2] {
        let s = cr(FRAC_1_SQRT_2);
        match self {
            Cardinal::PlusZ => [ONE, ZERO],
            Cardinal::MinusZ => [ZERO, ONE],
            Cardinal::PlusX => [s, s],
            Cardinal::MinusX => [s, -s],
            Cardinal::PlusY => [s, I * s],
            Cardinal::MinusY => [s, -I * s],
        }
    }
}

/// Logical code space embedded in the joint oscillator ⊗ transmon space.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalBasis {
    alpha: c64,
    dims: HilbertDims,
    plus_z: CVec,
    minus_z: CVec,
}

impl LogicalBasis {
    pub fn new(alpha: c64, dims: HilbertDims) -> Result<Self> {
        let embed = |osc: CVec| {
            let mut v = CVec::zeros(dims.dim());
            for n in 0..dims.n_osc() {
                v[dims.index(n, 0)] = osc[n];
            }
            v
        };
        Ok(Self {
            alpha,
            dims,
            plus_z: embed(codeword(alpha, CodewordSign::Plus, dims.n_osc())?),
            minus_z: embed(codeword(alpha, CodewordSign::Minus, dims.n_osc())?),
        })
    }

    /// `α = √3`.
    pub fn standard(dims: HilbertDims) -> Result<Self> {
        Self::new(cr(3f64.sqrt()), dims)
    }

    pub fn alpha(&self) -> c64 {
        self.alpha
    }

    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    pub fn plus_z(&self) -> &CVec {
        &self.plus_z
    }

    pub fn minus_z(&self) -> &CVec {
        &self.minus_z
    }

    /// `c0 |g,+Z_L⟩ + c1 |g,−Z_L⟩`.
    pub fn state(&self, amps: [c64; 2]) -> CVec {
        CVec::from_fn(self.dims.dim(), |i| {
            amps[0] * self.plus_z[i] + amps[1] * self.minus_z[i]
        })
    }

    pub fn cardinal(&self, c: Cardinal) -> CVec {
        self.state(c.amplitudes())
    }

    /// Compress a joint-space operator to the 2×2 block on the code space,
    /// `P ρ P` in the `(|+Z_L⟩, |−Z_L⟩)` basis.
    pub fn project(&self, rho: &CMat) -> Mat2 {
        let basis = [&self.plus_z, &self.minus_z];
        let mut out = [[ZERO; 2]; 2];
        for (a, ba) in basis.iter().enumerate() {
            let left = rho.adjoint() * *ba;
            for (b, bb) in basis.iter().enumerate() {
                // ⟨a|ρ|b⟩ = conj(⟨b|ρ†|a⟩)
                out[a][b] = linalg::inner(bb, &left).conj();
            }
        }
        out
    }
}

pub type Mat2 = [[c64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn mat2_identity() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

/// `a = e^{iφ} b` for some φ, to tolerance `tol` elementwise.
pub fn equal_up_to_phase(a: &Mat2, b: &Mat2, tol: f64) -> bool {
    let overlap: c64 = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| b[i][j].conj() * a[i][j])
        .sum();
    if overlap.norm() < 1e-300 {
        return false;
    }
    let phase = overlap / overlap.norm();
    (0..2).all(|i| (0..2).all(|j| (a[i][j] - phase * b[i][j]).norm() <= tol))
}

/// Logical single-qubit operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    I,
    X90,
    MX90,
    X180,
    Y90,
    MY90,
    Y180,
    H,
    T,
}

impl Gate {
    /// The gates used for randomized benchmarking.
    pub const RB_SET: [Gate; 8] = [
        Gate::I,
        Gate::X90,
        Gate::MX90,
        Gate::X180,
        Gate::Y90,
        Gate::MY90,
        Gate::Y180,
        Gate::H,
    ];

    pub const ALL: [Gate; 9] = [
        Gate::I,
        Gate::X90,
        Gate::MX90,
        Gate::X180,
        Gate::Y90,
        Gate::MY90,
        Gate::Y180,
        Gate::H,
        Gate::T,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Gate::I => "I",
            Gate::X90 => "X90",
            Gate::MX90 => "mX90",
            Gate::X180 => "X180",
            Gate::Y90 => "Y90",
            Gate::MY90 => "mY90",
            Gate::Y180 => "Y180",
            Gate::H => "H",
            Gate::T => "T",
        }
    }

    /// Ideal 2×2 action on `(|+Z_L⟩, |−Z_L⟩)`. π/2 rotations are
    /// `exp(∓iπσ/4)`; π rotations are the Pauli matrices themselves.
    pub fn unitary(self) -> Mat2 {
        let c = cr(FRAC_1_SQRT_2);
        match self {
            Gate::I => mat2_identity(),
            Gate::X90 => [[c, -I * c], [-I * c, c]],
            Gate::MX90 => [[c, I * c], [I * c, c]],
            Gate::X180 => [[ZERO, ONE], [ONE, ZERO]],
            Gate::Y90 => [[c, -c], [c, c]],
            Gate::MY90 => [[c, c], [-c, c]],
            Gate::Y180 => [[ZERO, -I], [I, ZERO]],
            Gate::H => [[c, c], [c, -c]],
            Gate::T => [[ONE, ZERO], [ZERO, c64::from_polar(1.0, FRAC_PI_4)]],
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Gate::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown gate {s:?}; expected one of I, X90, mX90, X180, Y90, mY90, Y180, H, T"
            ))
        })
    }
}

/// `{|g,0⟩ → |g,+Z_L⟩, |e,0⟩ → |g,−Z_L⟩}`.
pub fn encode_transfer_set(basis: &LogicalBasis) -> Result<StateTransferSet> {
    let dims = basis.dims();
    if dims.n_trans() < 2 {
        return Err(Error::InvalidDimension(
            "encoding needs a transmon with ≥ 2 levels".into(),
        ));
    }
    StateTransferSet::new(
        dims,
        vec![
            StateTransfer {
                initial: basis_state(dims, 0, 0)?,
                target: basis.plus_z().clone(),
            },
            StateTransfer {
                initial: basis_state(dims, 0, 1)?,
                target: basis.minus_z().clone(),
            },
        ],
    )
}

pub fn decode_transfer_set(basis: &LogicalBasis) -> Result<StateTransferSet> {
    Ok(encode_transfer_set(basis)?.reversed())
}

/// `{|g,±Z_L⟩ → U |g,±Z_L⟩}` for an arbitrary logical unitary.
pub fn unitary_transfer_set(basis: &LogicalBasis, u: &Mat2) -> Result<StateTransferSet> {
    let transfers = (0..2)
        .map(|col| {
            let mut amps = [ZERO; 2];
            amps[col] = ONE;
            StateTransfer {
                initial: basis.state(amps),
                target: basis.state([u[0][col], u[1][col]]),
            }
        })
        .collect();
    StateTransferSet::new(basis.dims(), transfers)
}

pub fn gate_transfer_set(basis: &LogicalBasis, gate: Gate) -> Result<StateTransferSet> {
    unitary_transfer_set(basis, &gate.unitary())
}

/// `|g,0⟩ → |g,n⟩`.
pub fn fock_preparation_set(dims: HilbertDims, n_target: usize) -> Result<StateTransferSet> {
    if n_target >= dims.n_osc() {
        return Err(Error::InvalidState(format!(
            "Fock target {n_target} outside truncation of {} levels",
            dims.n_osc()
        )));
    }
    StateTransferSet::new(
        dims,
        vec![StateTransfer {
            initial: basis_state(dims, 0, 0)?,
            target: basis_state(dims, n_target, 0)?,
        }],
    )
}

/// Parity mapping: each oscillator probe `|ψ⟩|g⟩` goes to
/// `Π₊|ψ⟩|g⟩ + Π₋|ψ⟩|e⟩`, flipping the transmon on odd photon number.
pub fn parity_map_set(dims: HilbertDims, probes: &[CVec]) -> Result<StateTransferSet> {
    if dims.n_trans() < 2 {
        return Err(Error::InvalidDimension(
            "parity mapping needs a transmon with ≥ 2 levels".into(),
        ));
    }
    if probes.is_empty() {
        return Err(Error::InvalidState("parity map needs at least one probe".into()));
    }
    let transfers = probes
        .iter()
        .map(|p| {
            if p.nrows() != dims.n_osc() {
                return Err(Error::DimensionMismatch {
                    expected: dims.n_osc(),
                    found: p.nrows(),
                });
            }
            let mut initial = CVec::zeros(dims.dim());
            let mut target = CVec::zeros(dims.dim());
            for n in 0..dims.n_osc() {
                initial[dims.index(n, 0)] = p[n];
                target[dims.index(n, n % 2)] = p[n];
            }
            Ok(StateTransfer { initial, target })
        })
        .collect::<Result<Vec<_>>>()?;
    StateTransferSet::new(dims, transfers)
}

/// Fock states `|0⟩ … |n_max−1⟩` as oscillator-only probe vectors.
pub fn fock_probes(n_osc: usize, n_max: usize) -> Vec<CVec> {
    (0..n_max.min(n_osc))
        .map(|n| {
            let mut v = CVec::zeros(n_osc);
            v[n] = ONE;
            v
        })
        .collect()
}

/// Diagonal of `exp(+iΔt (K/2) â†²â²)` on `n_osc` levels.
pub fn kerr_correction_phases(n_osc: usize, kerr: f64, delta_t: f64) -> Vec<c64> {
    (0..n_osc)
        .map(|n| {
            let n = n as f64;
            (I * (delta_t * 0.5 * kerr * n * (n - 1.0))).exp()
        })
        .collect()
}

/// Targets undo `delta_t` of free Kerr evolution on the code space:
/// `|g,±Z_L⟩ → exp(+iΔt (K/2) â†²â²) |g,±Z_L⟩`.
pub fn kerr_correction_set(basis: &LogicalBasis, kerr: f64, delta_t: f64) -> Result<StateTransferSet> {
    if !(delta_t >= 0.0 && delta_t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Kerr correction time must be ≥ 0, got {delta_t}"
        )));
    }
    let dims = basis.dims();
    let phases = kerr_correction_phases(dims.n_osc(), kerr, delta_t);
    let apply = |v: &CVec| CVec::from_fn(dims.dim(), |i| v[i] * phases[i / dims.n_trans()]);
    StateTransferSet::new(
        dims,
        vec![
            StateTransfer {
                initial: basis.plus_z().clone(),
                target: apply(basis.plus_z()),
            },
            StateTransfer {
                initial: basis.minus_z().clone(),
                target: apply(basis.minus_z()),
            },
        ],
    )
}

/// A synthesis target, resolvable at any truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operation {
    Gate(Gate),
    Fock(usize),
    Encode,
    Decode,
    /// Parity map over the Fock probes `|0⟩ … |n_max−1⟩`.
    Parity {
        n_max: usize,
    },
    /// Undo `delta_t` ns of free Kerr evolution.
    KerrCorrection {
        delta_t: f64,
    },
}

impl Operation {
    pub fn transfer_set(&self, model: &HamiltonianModel, dims: HilbertDims, alpha: c64) -> Result<StateTransferSet> {
        match *self {
            Operation::Gate(g) => gate_transfer_set(&LogicalBasis::new(alpha, dims)?, g),
            Operation::Fock(n) => fock_preparation_set(dims, n),
            Operation::Encode => encode_transfer_set(&LogicalBasis::new(alpha, dims)?),
            Operation::Decode => decode_transfer_set(&LogicalBasis::new(alpha, dims)?),
            Operation::Parity { n_max } => {
                if n_max > dims.n_osc() {
                    return Err(Error::InvalidState(format!(
                        "parity probes up to {n_max} exceed {} oscillator levels",
                        dims.n_osc()
                    )));
                }
                parity_map_set(dims, &fock_probes(dims.n_osc(), n_max))
            }
            Operation::KerrCorrection { delta_t } => {
                kerr_correction_set(&LogicalBasis::new(alpha, dims)?, model.kerr, delta_t)
            }
        }
    }

    /// Whether the operation acts inside the code space (and so has a
    /// logical channel to verify).
    pub fn logical_gate(&self) -> Option<Gate> {
        match self {
            Operation::Gate(g) => Some(*g),
            _ => None,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::Gate(g) => write!(f, "gate {g}"),
            Operation::Fock(n) => write!(f, "fock {n}"),
            Operation::Encode => f.write_str("encode"),
            Operation::Decode => f.write_str("decode"),
            Operation::Parity { n_max } => write!(f, "parity {n_max}"),
            Operation::KerrCorrection { delta_t } => write!(f, "kerr_correct {delta_t}"),
        }
    }
}
