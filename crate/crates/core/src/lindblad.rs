// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Open-system simulation of control pulses under the Markovian master
//! equation
//!
//! ```text
//! dρ/dt = −i[H(t), ρ] + (1/T1_C) D[â]ρ + (1/T1_T) D[b̂]ρ + (1/Tφ) D[b̂†b̂]ρ
//! ```
//!
//! and the logical-channel fidelities derived from it.

use crate::catcode::{Cardinal, LogicalBasis, Mat2};
use crate::dynamics::{ControlSystem, ControlWaveform};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat, CVec, HermitianEigen, I, ZERO};
use crate::operators::{basis_state, HamiltonianModel, HilbertDims};
use crate::tomography::{leaky_average_fidelity, PauliTransferMatrix};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const EIGENVALUE_TOL: f64 = 1e-9;

/// Per-step trace drift tolerated before a step is retried.
const STEP_TRACE_TOL: f64 = 1e-11;
/// Times a failing step is retried with doubled substeps.
pub const MAX_RETRIES: usize = 3;
/// Largest joint dimension accepted by the superoperator integrator.
pub const EXACT_MAX_DIM: usize = 16;

/// Density matrix on the joint oscillator–transmon space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: HilbertDims,
    rho: CMat,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(rho: CMat, dims: HilbertDims) -> Result<Self> {
        if rho.nrows() != dims.dim() || rho.ncols() != dims.dim() {
            return Err(Error::DimensionMismatch {
                expected: dims.dim(),
                found: rho.nrows(),
            });
        }
        if !rho.as_ref().is_all_finite() {
            return Err(Error::InvalidState("density matrix has non-finite entries".into()));
        }
        let herm = linalg::hermiticity_error(rho.as_ref());
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (error {herm:.3e})")));
        }
        let tr = linalg::trace(rho.as_ref()).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = HermitianEigen::new(rho.as_ref())
            .values
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -EIGENVALUE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { dims, rho })
    }

    pub fn from_pure(psi: &CVec, dims: HilbertDims) -> Result<Self> {
        if psi.nrows() != dims.dim() {
            return Err(Error::DimensionMismatch {
                expected: dims.dim(),
                found: psi.nrows(),
            });
        }
        let n = linalg::norm(psi);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state norm {n} differs from 1")));
        }
        Ok(Self {
            dims,
            rho: outer(psi, psi),
        })
    }

    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn into_matrix(self) -> CMat {
        self.rho
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(self.rho.as_ref()).re
    }

    /// Population of `|osc, trans⟩`.
    pub fn population(&self, osc: usize, trans: usize) -> f64 {
        let i = self.dims.index(osc, trans);
        self.rho[(i, i)].re
    }

    /// Total population with the transmon outside its ground state.
    pub fn transmon_excited_population(&self) -> f64 {
        let d = self.dims;
        (0..d.n_osc())
            .flat_map(|n| (1..d.n_trans()).map(move |m| (n, m)))
            .map(|(n, m)| self.population(n, m))
            .sum()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &CVec) -> f64 {
        linalg::inner(psi, &(&self.rho * psi)).re
    }
}

fn outer(a: &CVec, b: &CVec) -> CMat {
    CMat::from_fn(a.nrows(), b.nrows(), |i, j| a[i] * b[j].conj())
}

/// Decoherence rates in 1/ns. Zero switches a channel off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceSpec {
    pub transmon_relaxation: f64,
    pub transmon_dephasing: f64,
    pub oscillator_relaxation: f64,
}

fn rate(t: f64) -> f64 {
    if t.is_finite() {
        1.0 / t
    } else {
        0.0
    }
}

impl DecoherenceSpec {
    pub fn none() -> Self {
        Self {
            transmon_relaxation: 0.0,
            transmon_dephasing: 0.0,
            oscillator_relaxation: 0.0,
        }
    }

    /// Rates from the model's T1/Tφ times; infinite times give zero rates.
    pub fn from_model(model: &HamiltonianModel) -> Self {
        Self {
            transmon_relaxation: rate(model.t1_transmon),
            transmon_dephasing: rate(model.tphi_transmon),
            oscillator_relaxation: rate(model.t1_oscillator),
        }
    }

    pub fn without_transmon_dephasing(self) -> Self {
        Self {
            transmon_dephasing: 0.0,
            ..self
        }
    }

    pub fn without_transmon_relaxation(self) -> Self {
        Self {
            transmon_relaxation: 0.0,
            ..self
        }
    }

    pub fn without_oscillator_relaxation(self) -> Self {
        Self {
            oscillator_relaxation: 0.0,
            ..self
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        Self {
            transmon_relaxation: self.transmon_relaxation * s,
            transmon_dephasing: self.transmon_dephasing * s,
            oscillator_relaxation: self.oscillator_relaxation * s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.transmon_relaxation == 0.0 && self.transmon_dephasing == 0.0 && self.oscillator_relaxation == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("transmon relaxation", self.transmon_relaxation),
            ("transmon dephasing", self.transmon_dephasing),
            ("oscillator relaxation", self.oscillator_relaxation),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} rate must be finite and ≥ 0, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// `D[L]ρ = LρL† − ½{L†L, ρ}`.
pub fn dissipator(op: &CMat, rho: &CMat) -> Result<CMat> {
    if op.nrows() != op.ncols() || rho.nrows() != rho.ncols() || op.nrows() != rho.nrows() {
        return Err(Error::DimensionMismatch {
            expected: op.nrows(),
            found: rho.nrows(),
        });
    }
    let lrl = &(op * rho) * op.adjoint();
    let ll = op.adjoint() * op;
    let anti = &(&ll * rho) + &(rho * &ll);
    Ok(CMat::from_fn(rho.nrows(), rho.ncols(), |i, j| {
        lrl[(i, j)] - 0.5 * anti[(i, j)]
    }))
}

/// The dissipative part of the generator, specialised to the three jump
/// operators. All `L†L` terms are diagonal in the Fock basis, so one
/// application costs O(d²).
#[derive(Debug, Clone)]
pub struct Dissipator {
    dims: HilbertDims,
    spec: DecoherenceSpec,
    /// `Σ_k γ_k (L_k†L_k)_ii`.
    loss: Vec<f64>,
}

impl Dissipator {
    pub fn new(dims: HilbertDims, spec: DecoherenceSpec) -> Result<Self> {
        spec.validate()?;
        let mut loss = vec![0.0; dims.dim()];
        for n in 0..dims.n_osc() {
            for m in 0..dims.n_trans() {
                let (nf, mf) = (n as f64, m as f64);
                loss[dims.index(n, m)] =
                    spec.oscillator_relaxation * nf + spec.transmon_relaxation * mf + spec.transmon_dephasing * mf * mf;
            }
        }
        Ok(Self { dims, spec, loss })
    }

    pub fn spec(&self) -> &DecoherenceSpec {
        &self.spec
    }

    /// `out = L_D(ρ)`.
    pub fn apply(&self, rho: &CMat, out: &mut CMat) {
        let d = self.dims;
        let (nc, nt) = (d.n_osc(), d.n_trans());
        let s = &self.spec;
        for n2 in 0..nc {
            for m2 in 0..nt {
                let j = d.index(n2, m2);
                for n1 in 0..nc {
                    for m1 in 0..nt {
                        let i = d.index(n1, m1);
                        let mut v = rho[(i, j)]
                            * (s.transmon_dephasing * (m1 * m2) as f64 - 0.5 * (self.loss[i] + self.loss[j]));
                        if s.oscillator_relaxation != 0.0 && n1 + 1 < nc && n2 + 1 < nc {
                            let w = (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                            v += rho[(d.index(n1 + 1, m1), d.index(n2 + 1, m2))] * (s.oscillator_relaxation * w);
                        }
                        if s.transmon_relaxation != 0.0 && m1 + 1 < nt && m2 + 1 < nt {
                            let w = (((m1 + 1) * (m2 + 1)) as f64).sqrt();
                            v += rho[(d.index(n1, m1 + 1), d.index(n2, m2 + 1))] * (s.transmon_relaxation * w);
                        }
                        out[(i, j)] = v;
                    }
                }
            }
        }
    }

    /// One classical RK4 step of `dρ/dt = L_D(ρ)`.
    fn rk4(&self, rho: &mut CMat, h: f64) {
        if self.spec.is_zero() {
            return;
        }
        let d = rho.nrows();
        let mut k = CMat::zeros(d, d);
        self.apply(rho, &mut k);
        let mut acc = axpy(rho, &k, h / 6.0);
        let probe = axpy(rho, &k, h / 2.0);
        self.apply(&probe, &mut k);
        acc = axpy(&acc, &k, h / 3.0);
        let probe = axpy(rho, &k, h / 2.0);
        self.apply(&probe, &mut k);
        acc = axpy(&acc, &k, h / 3.0);
        let probe = axpy(rho, &k, h);
        self.apply(&probe, &mut k);
        acc = axpy(&acc, &k, h / 6.0);
        *rho = acc;
    }
}

/// Full right-hand side `−i[H, ρ] + L_D(ρ)`.
pub fn lindblad_rhs(h: &CMat, diss: &Dissipator, rho: &CMat) -> CMat {
    let mut out = CMat::zeros(rho.nrows(), rho.ncols());
    diss.apply(rho, &mut out);
    let comm = &(h * rho) - &(rho * h);
    axpy_c(&out, &comm, -I)
}

/// `y + s x`.
fn axpy(y: &CMat, x: &CMat, s: f64) -> CMat {
    axpy_c(y, x, cr(s))
}

fn axpy_c(y: &CMat, x: &CMat, s: c64) -> CMat {
    CMat::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] + x[(i, j)] * s)
}

/// Time-stepping scheme for one piecewise-constant control step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Symmetric splitting: exact unitary substeps from the step
    /// Hamiltonian's eigendecomposition, with RK4 half-steps of the
    /// dissipator on either side.
    SplitStep { substeps: usize },
    /// Classical RK4 on the full generator.
    Rk4 { substeps: usize },
    /// Exponential of the d²×d² superoperator; small systems only.
    Exact,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::SplitStep { substeps: 4 }
    }
}

fn split_step(rho: &CMat, u: &CMat, substeps: usize, h: f64, diss: &Dissipator) -> CMat {
    let mut r = rho.clone();
    let ud = u.adjoint();
    diss.rk4(&mut r, 0.5 * h);
    for s in 0..substeps {
        r = &(u * &r) * ud;
        diss.rk4(&mut r, if s + 1 == substeps { 0.5 * h } else { h });
    }
    r
}

fn rk4_steps(rho: &CMat, ham: &CMat, substeps: usize, h: f64, diss: &Dissipator) -> CMat {
    let mut r = rho.clone();
    for _ in 0..substeps {
        let k1 = lindblad_rhs(ham, diss, &r);
        let k2 = lindblad_rhs(ham, diss, &axpy(&r, &k1, h / 2.0));
        let k3 = lindblad_rhs(ham, diss, &axpy(&r, &k2, h / 2.0));
        let k4 = lindblad_rhs(ham, diss, &axpy(&r, &k3, h));
        let mid = axpy(&k2, &k3, 1.0);
        r = axpy(&r, &axpy(&(&k1 + &k4), &mid, 2.0), h / 6.0);
    }
    r
}

/// Column-stacked superoperator of the generator at Hamiltonian `h`.
fn superoperator(h: &CMat, diss: &Dissipator) -> CMat {
    let d = h.nrows();
    let mut s = CMat::zeros(d * d, d * d);
    let mut e = CMat::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            e[(i, j)] = c64::new(1.0, 0.0);
            let col = lindblad_rhs(h, diss, &e);
            e[(i, j)] = ZERO;
            for b in 0..d {
                for a in 0..d {
                    s[(a + b * d, i + j * d)] = col[(a, b)];
                }
            }
        }
    }
    s
}

fn apply_superoperator(s: &CMat, rho: &CMat) -> CMat {
    let d = rho.nrows();
    let v = CVec::from_fn(d * d, |k| rho[(k % d, k / d)]);
    let out = s * &v;
    CMat::from_fn(d, d, |i, j| out[i + j * d])
}

/// Why a step result is rejected, if it is.
fn step_defect(before: &CMat, after: &CMat) -> Option<String> {
    if !after.as_ref().is_all_finite() {
        return Some("non-finite density matrix".into());
    }
    let t0 = linalg::trace(before.as_ref()).re;
    let t1 = linalg::trace(after.as_ref()).re;
    if (t1 - t0).abs() > STEP_TRACE_TOL {
        return Some(format!("trace drift {:.3e}", t1 - t0));
    }
    let herm = linalg::hermiticity_error(after.as_ref());
    if herm > HERMITICITY_TOL {
        return Some(format!("Hermiticity error {herm:.3e}"));
    }
    let purity: f64 = after.as_ref().norm_l2().powi(2);
    if purity > t1 * t1 * (1.0 + 1e-8) {
        return Some(format!("purity {purity:.6} exceeds the physical bound"));
    }
    None
}

fn symmetrize(r: &CMat) -> CMat {
    CMat::from_fn(r.nrows(), r.ncols(), |i, j| 0.5 * (r[(i, j)] + r[(j, i)].conj()))
}

/// Run one control step with retries. `attempt(substeps)` performs the step.
fn checked_step(
    rho: &CMat,
    step: usize,
    substeps: usize,
    mut attempt: impl FnMut(usize) -> Result<CMat>,
) -> Result<CMat> {
    let mut s = substeps;
    let mut last = String::new();
    for retry in 0..=MAX_RETRIES {
        let next = attempt(s)?;
        match step_defect(rho, &next) {
            None => return Ok(symmetrize(&next)),
            Some(reason) => {
                log::debug!("step {step} rejected with {s} substeps: {reason}");
                last = reason;
                if retry < MAX_RETRIES {
                    s *= 2;
                }
            }
        }
    }
    Err(Error::Integration {
        step,
        reason: format!("{last} after {MAX_RETRIES} retries (final substeps {s})"),
    })
}

fn check_integrator(integrator: Integrator, dims: HilbertDims) -> Result<()> {
    match integrator {
        Integrator::SplitStep { substeps } | Integrator::Rk4 { substeps } if substeps == 0 => {
            Err(Error::InvalidParameter("integrator needs at least one substep".into()))
        }
        Integrator::Exact if dims.dim() > EXACT_MAX_DIM => Err(Error::InvalidDimension(format!(
            "superoperator integration is limited to dimension {EXACT_MAX_DIM}, got {}",
            dims.dim()
        ))),
        _ => Ok(()),
    }
}

/// Evolve `rho0` through the whole waveform.
pub fn evolve_density(
    rho0: &DensityMatrix,
    waveform: &ControlWaveform,
    system: &ControlSystem,
    dec: &DecoherenceSpec,
    integrator: Integrator,
) -> Result<DensityMatrix> {
    let dims = system.dims();
    if rho0.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims.dim(),
            found: rho0.dims().dim(),
        });
    }
    check_integrator(integrator, dims)?;
    let diss = Dissipator::new(dims, *dec)?;
    let dt = waveform.dt();
    let mut rho = rho0.matrix().clone();
    for (k, sample) in waveform.samples().iter().enumerate() {
        rho = match integrator {
            Integrator::SplitStep { substeps } => {
                let prop = system.step(sample, dt)?;
                checked_step(&rho, k, substeps, |s| {
                    Ok(split_step(&rho, &prop.power(1.0 / s as f64), s, dt / s as f64, &diss))
                })?
            }
            Integrator::Rk4 { substeps } => {
                let h = system.hamiltonian(sample);
                checked_step(&rho, k, substeps, |s| Ok(rk4_steps(&rho, &h, s, dt / s as f64, &diss)))?
            }
            Integrator::Exact => {
                let h = system.hamiltonian(sample);
                let prop = linalg::expm(linalg::scaled(superoperator(&h, &diss).as_ref(), cr(dt)).as_ref());
                checked_step(&rho, k, 1, |_| Ok(apply_superoperator(&prop, &rho)))?
            }
        };
    }
    finish(rho, dims, waveform.steps())
}

fn finish(rho: CMat, dims: HilbertDims, steps: usize) -> Result<DensityMatrix> {
    DensityMatrix::new(rho, dims).map_err(|e| Error::Integration {
        step: steps,
        reason: format!("final state failed validation: {e}"),
    })
}

/// A pulse with its per-step substep unitaries precomputed, for applying
/// the same open-system evolution to many inputs.
#[derive(Debug, Clone)]
pub struct PulseChannel {
    system: ControlSystem,
    waveform: ControlWaveform,
    diss: Dissipator,
    substeps: usize,
    unitaries: Vec<CMat>,
}

impl PulseChannel {
    pub fn new(
        system: ControlSystem,
        waveform: ControlWaveform,
        dec: &DecoherenceSpec,
        substeps: usize,
    ) -> Result<Self> {
        check_integrator(Integrator::SplitStep { substeps }, system.dims())?;
        let diss = Dissipator::new(system.dims(), *dec)?;
        let unitaries = waveform
            .samples()
            .iter()
            .map(|s| Ok(system.step(s, waveform.dt())?.power(1.0 / substeps as f64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            system,
            waveform,
            diss,
            substeps,
            unitaries,
        })
    }

    pub fn dims(&self) -> HilbertDims {
        self.system.dims()
    }

    pub fn duration(&self) -> f64 {
        self.waveform.duration()
    }

    /// Evolve a (possibly unnormalized) Hermitian operator.
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        let d = self.dims().dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows(),
            });
        }
        let dt = self.waveform.dt();
        let mut r = rho.clone();
        for (k, u) in self.unitaries.iter().enumerate() {
            r = checked_step(&r, k, self.substeps, |s| {
                if s == self.substeps {
                    Ok(split_step(&r, u, s, dt / s as f64, &self.diss))
                } else {
                    let prop = self.system.step(&self.waveform.samples()[k], dt)?;
                    Ok(split_step(
                        &r,
                        &prop.power(1.0 / s as f64),
                        s,
                        dt / s as f64,
                        &self.diss,
                    ))
                }
            })?;
        }
        Ok(r)
    }

    pub fn evolve(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply(rho.matrix())?;
        finish(out, self.dims(), self.waveform.steps())
    }
}

/// Two orthonormal states spanning a logical qubit inside the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalPair {
    pub zero: CVec,
    pub one: CVec,
}

impl LogicalPair {
    /// Codewords with the transmon in its ground state.
    pub fn codewords(basis: &LogicalBasis) -> Self {
        Self {
            zero: basis.plus_z().clone(),
            one: basis.minus_z().clone(),
        }
    }

    /// `|g, 0⟩, |e, 0⟩`: the transmon qubit with the oscillator in vacuum.
    pub fn transmon(dims: HilbertDims) -> Result<Self> {
        if dims.n_trans() < 2 {
            return Err(Error::InvalidDimension("transmon qubit needs ≥ 2 levels".into()));
        }
        Ok(Self {
            zero: basis_state(dims, 0, 0)?,
            one: basis_state(dims, 0, 1)?,
        })
    }

    pub fn state(&self, amps: [c64; 2]) -> CVec {
        CVec::from_fn(self.zero.nrows(), |i| amps[0] * self.zero[i] + amps[1] * self.one[i])
    }

    /// `Σ_ab m_ab |a⟩⟨b|`.
    pub fn embed(&self, m: &Mat2) -> CMat {
        let v = [&self.zero, &self.one];
        let d = self.zero.nrows();
        CMat::from_fn(d, d, |i, j| {
            let mut acc = ZERO;
            for a in 0..2 {
                for b in 0..2 {
                    acc += m[a][b] * v[a][i] * v[b][j].conj();
                }
            }
            acc
        })
    }

    /// `⟨a|ρ|b⟩`.
    pub fn project(&self, rho: &CMat) -> Mat2 {
        let v = [&self.zero, &self.one];
        let rv = [rho * &self.zero, rho * &self.one];
        std::array::from_fn(|a| std::array::from_fn(|b| linalg::inner(v[a], &rv[b])))
    }
}

/// Open-system figures of merit for one logical operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateFidelity {
    pub ptm: PauliTransferMatrix,
    /// Haar-average fidelity of the projected (possibly trace-decreasing)
    /// channel against the ideal unitary.
    pub average_fidelity: f64,
    /// Average population that leaves the output pair.
    pub leakage: f64,
}

impl GateFidelity {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.average_fidelity
    }
}

/// PTM of `ρ_L ↦ P_out(E(embed_in(ρ_L)))` from the four inputs
/// `|+Z⟩, |−Z⟩, |+X⟩, |+Y⟩`.
pub fn logical_channel_ptm(
    mut evolve: impl FnMut(&CMat) -> Result<CMat>,
    input: &LogicalPair,
    output: &LogicalPair,
) -> Result<PauliTransferMatrix> {
    let mut out = Vec::with_capacity(4);
    for c in [Cardinal::PlusZ, Cardinal::MinusZ, Cardinal::PlusX, Cardinal::PlusY] {
        let psi = input.state(c.amplitudes());
        out.push(output.project(&evolve(&outer(&psi, &psi))?));
    }
    let add = |a: &Mat2, b: &Mat2, s: f64| -> Mat2 {
        std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j] * s))
    };
    let g_i = add(&out[0], &out[1], 1.0);
    let g_z = add(&out[0], &out[1], -1.0);
    let twice = |m: &Mat2| -> Mat2 { std::array::from_fn(|i| std::array::from_fn(|j| m[i][j] * 2.0)) };
    let g_x = add(&twice(&out[2]), &g_i, -1.0);
    let g_y = add(&twice(&out[3]), &g_i, -1.0);
    Ok(PauliTransferMatrix::from_pauli_images(&[g_i, g_x, g_y, g_z]))
}

/// Simulated average fidelity and leakage of a pulse against `ideal`.
pub fn simulated_gate_fidelity(
    channel: &PulseChannel,
    input: &LogicalPair,
    output: &LogicalPair,
    ideal: &Mat2,
) -> Result<GateFidelity> {
    let ptm = logical_channel_ptm(|r| channel.apply(r), input, output)?;
    let ideal = PauliTransferMatrix::from_unitary(ideal);
    Ok(GateFidelity {
        ptm,
        average_fidelity: leaky_average_fidelity(&ptm, &ideal),
        leakage: 1.0 - ptm.0[0][0],
    })
}
