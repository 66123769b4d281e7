// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Piecewise-constant propagation, the coherent state-transfer fidelity
//! and its exact gradient with respect to every control sample.
//!
//! Each step propagator is `U_k = exp(−i Δt H_k)`, computed from the
//! spectral decomposition of the Hermitian step Hamiltonian. The same
//! decomposition gives the exact derivative of `U_k` in closed form
//! (divided differences of the exponential on the spectrum), which is
//! what the optimizer uses. [`propagator_derivative`] computes the same
//! quantity independently, from the Padé exponential of the augmented
//! block matrix `[[A, E], [0, A]]`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, expm, CMat, CVec, HermitianEigen, I, ZERO};
use crate::operators::{
    build_drive_operators, build_static_hamiltonian, static_diagonal, DriveOperators, DriveQuadrature,
    HamiltonianModel, HilbertDims,
};

/// Piecewise-constant complex drive envelopes on a uniform grid.
///
/// Each sample is `[Re εC, Im εC, Re εT, Im εT]` in rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlWaveform {
    dt: f64,
    samples: Vec<[f64; 4]>,
}

impl ControlWaveform {
    pub fn new(dt: f64, samples: Vec<[f64; 4]>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidControl(format!("step length must be > 0, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidControl("waveform needs at least one step".into()));
        }
        if let Some(k) = samples.iter().position(|s| s.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidControl(format!("non-finite sample at step {k}")));
        }
        Ok(Self { dt, samples })
    }

    pub fn zeros(steps: usize, dt: f64) -> Result<Self> {
        Self::new(dt, vec![[0.0; 4]; steps])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.samples.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn samples(&self) -> &[[f64; 4]] {
        &self.samples
    }

    /// Complex envelope of the oscillator drive at step `k`.
    pub fn oscillator(&self, k: usize) -> c64 {
        c64::new(self.samples[k][0], self.samples[k][1])
    }

    /// Complex envelope of the transmon drive at step `k`.
    pub fn transmon(&self, k: usize) -> c64 {
        c64::new(self.samples[k][2], self.samples[k][3])
    }

    /// Largest `|ε|` over both drives.
    pub fn peak_amplitude(&self) -> f64 {
        (0..self.steps())
            .map(|k| self.oscillator(k).norm().max(self.transmon(k).norm()))
            .fold(0.0, f64::max)
    }
}

/// One required mapping `initial → target`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTransfer {
    pub initial: CVec,
    pub target: CVec,
}

/// The set of simultaneous state transfers that defines an operation.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTransferSet {
    dims: HilbertDims,
    transfers: Vec<StateTransfer>,
}

const NORM_TOL: f64 = 1e-10;

impl StateTransferSet {
    pub fn new(dims: HilbertDims, transfers: Vec<StateTransfer>) -> Result<Self> {
        if transfers.is_empty() {
            return Err(Error::InvalidState("transfer set is empty".into()));
        }
        for (i, t) in transfers.iter().enumerate() {
            for (label, v) in [("initial", &t.initial), ("target", &t.target)] {
                if v.nrows() != dims.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: dims.dim(),
                        found: v.nrows(),
                    });
                }
                let n = linalg::norm(v);
                if (n - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidState(format!(
                        "{label} state of transfer {i} has norm {n}"
                    )));
                }
            }
        }
        Ok(Self { dims, transfers })
    }

    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }

    pub fn transfers(&self) -> &[StateTransfer] {
        &self.transfers
    }

    /// Swap the roles of initial and target states.
    pub fn reversed(&self) -> Self {
        Self {
            dims: self.dims,
            transfers: self
                .transfers
                .iter()
                .map(|t| StateTransfer {
                    initial: t.target.clone(),
                    target: t.initial.clone(),
                })
                .collect(),
        }
    }

    /// Zero-pad every state into a larger oscillator truncation.
    pub fn embed(&self, to: HilbertDims) -> Result<Self> {
        let transfers = self
            .transfers
            .iter()
            .map(|t| {
                Ok(StateTransfer {
                    initial: embed_state(&t.initial, self.dims, to)?,
                    target: embed_state(&t.target, self.dims, to)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims: to, transfers })
    }
}

/// Zero-pad a joint-space vector into a larger oscillator truncation.
pub fn embed_state(v: &CVec, from: HilbertDims, to: HilbertDims) -> Result<CVec> {
    if from.n_trans() != to.n_trans() || from.n_osc() > to.n_osc() {
        return Err(Error::InvalidDimension(format!(
            "cannot embed ({}, {}) into ({}, {})",
            from.n_osc(),
            from.n_trans(),
            to.n_osc(),
            to.n_trans()
        )));
    }
    let mut out = CVec::zeros(to.dim());
    for n in 0..from.n_osc() {
        for m in 0..from.n_trans() {
            out[to.index(n, m)] = v[from.index(n, m)];
        }
    }
    Ok(out)
}

/// Static Hamiltonian and drive generators for one truncation.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    dims: HilbertDims,
    model: HamiltonianModel,
    h0_diag: Vec<f64>,
    drives: DriveOperators,
}

impl ControlSystem {
    pub fn new(model: HamiltonianModel, dims: HilbertDims) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            dims,
            model,
            h0_diag: static_diagonal(&model, dims),
            drives: build_drive_operators(dims),
        })
    }

    pub fn dims(&self) -> HilbertDims {
        self.dims
    }

    pub fn model(&self) -> &HamiltonianModel {
        &self.model
    }

    pub fn drives(&self) -> &DriveOperators {
        &self.drives
    }

    pub fn static_hamiltonian(&self) -> CMat {
        build_static_hamiltonian(&self.model, self.dims)
    }

    /// `H0 + H_drive(sample)`.
    pub fn hamiltonian(&self, sample: &[f64; 4]) -> CMat {
        let d = self.dims.dim();
        let mut h = CMat::zeros(d, d);
        for (i, &e) in self.h0_diag.iter().enumerate() {
            h[(i, i)] = cr(e);
        }
        self.drives.add_to(sample, &mut h);
        h
    }

    /// Spectral form of one step propagator.
    pub fn step(&self, sample: &[f64; 4], dt: f64) -> Result<StepPropagator> {
        if sample.iter().any(|x| !x.is_finite()) || !dt.is_finite() {
            return Err(Error::InvalidControl(format!(
                "non-finite control sample {sample:?} (dt = {dt})"
            )));
        }
        let eig = HermitianEigen::new(self.hamiltonian(sample).as_ref());
        Ok(StepPropagator::from_eigen(eig, dt))
    }
}

/// `U = exp(−i Δt H)` held as `V diag(e^{−iλΔt}) V†`.
#[derive(Debug, Clone)]
pub struct StepPropagator {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
    phases: Vec<c64>,
    dt: f64,
}

impl StepPropagator {
    fn from_eigen(eig: HermitianEigen, dt: f64) -> Self {
        let phases = eig.values.iter().map(|&l| (-I * (l * dt)).exp()).collect();
        Self {
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
            phases,
            dt,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn unitary(&self) -> CMat {
        self.power(1.0)
    }

    /// `exp(−i s Δt H)`; fractional `s` gives sub-step propagators.
    pub fn power(&self, s: f64) -> CMat {
        let v = &self.eigenvectors;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| {
            v[(i, j)] * (-I * (self.eigenvalues[j] * self.dt * s)).exp()
        });
        &scaled * v.adjoint()
    }

    pub fn apply(&self, psi: &CVec) -> CVec {
        let v = &self.eigenvectors;
        let mut coeff = v.adjoint() * psi;
        for (i, p) in self.phases.iter().enumerate() {
            coeff[i] *= p;
        }
        v * &coeff
    }

    pub fn apply_adjoint(&self, psi: &CVec) -> CVec {
        let v = &self.eigenvectors;
        let mut coeff = v.adjoint() * psi;
        for (i, p) in self.phases.iter().enumerate() {
            coeff[i] *= p.conj();
        }
        v * &coeff
    }

    /// Divided differences of `λ ↦ e^{−iλΔt}` on the spectrum:
    /// `Γ_pq = −iΔt e^{−iΔt(λp+λq)/2} sinc(Δt(λp−λq)/2)`.
    pub fn divided_differences(&self) -> CMat {
        let dt = self.dt;
        let l = &self.eigenvalues;
        let ph = &self.phases;
        Mat::from_fn(l.len(), l.len(), |p, q| {
            let half = 0.5 * dt * (l[p] - l[q]);
            if half.abs() < 1e-3 {
                let h2 = half * half;
                let sinc = 1.0 - h2 / 6.0 + h2 * h2 / 120.0;
                // e^{−iΔt(λp+λq)/2} = e^{−iΔtλp} e^{i·half}
                let rot = c64::new(
                    1.0 - h2 / 2.0 + h2 * h2 / 24.0,
                    half * (1.0 - h2 / 6.0 + h2 * h2 / 120.0),
                );
                -I * dt * ph[p] * rot * sinc
            } else {
                (ph[p] - ph[q]) / (l[p] - l[q])
            }
        })
    }

    /// Exact `∂U/∂ε` along the Hermitian generator `gen`, from the
    /// spectral (Daleckii–Krein) formula `V (Γ ∘ V†GV) V†`.
    pub fn derivative(&self, gen: &CMat) -> CMat {
        let v = &self.eigenvectors;
        let g = &(v.adjoint() * gen) * v;
        let gamma = self.divided_differences();
        let had = Mat::from_fn(g.nrows(), g.ncols(), |p, q| gamma[(p, q)] * g[(p, q)]);
        &(v * &had) * v.adjoint()
    }
}

/// `exp(−i Δt (H0 + H_drive(sample)))`.
pub fn step_propagator(system: &ControlSystem, sample: &[f64; 4], dt: f64) -> Result<CMat> {
    Ok(system.step(sample, dt)?.unitary())
}

/// Exact `∂U_k/∂ε_q` from the Padé exponential of the augmented block
/// matrix `[[−iΔtH, −iΔtH_q], [0, −iΔtH]]`, whose upper-right block is
/// the Fréchet derivative of the exponential.
pub fn propagator_derivative(
    system: &ControlSystem,
    sample: &[f64; 4],
    dt: f64,
    direction: DriveQuadrature,
) -> Result<CMat> {
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidControl(format!("non-finite control sample {sample:?}")));
    }
    let h = system.hamiltonian(sample);
    let gen = system.drives().get(direction);
    let d = h.nrows();
    let s = -I * dt;
    let mut big = CMat::zeros(2 * d, 2 * d);
    for j in 0..d {
        for i in 0..d {
            big[(i, j)] = h[(i, j)] * s;
            big[(i + d, j + d)] = h[(i, j)] * s;
            big[(i, j + d)] = gen[(i, j)] * s;
        }
    }
    let e = expm(big.as_ref());
    Ok(e.as_ref().submatrix(0, d, d, d).to_owned())
}

/// Forward and backward states for every step of one waveform.
#[derive(Debug, Clone)]
pub struct PropagationCache {
    steps: Vec<StepPropagator>,
    /// `forward[i][k] = U_k ⋯ U_1 |ψ_init⁽ⁱ⁾⟩`, `k = 0..=N`.
    forward: Vec<Vec<CVec>>,
    /// `backward[i][k] = U_{k+1}† ⋯ U_N† |ψ_final⁽ⁱ⁾⟩`, `k = 0..=N`.
    backward: Vec<Vec<CVec>>,
    /// Coherent overlap `v = Σ_i ⟨ψ_final⁽ⁱ⁾|U|ψ_init⁽ⁱ⁾⟩`.
    overlap: c64,
}

impl PropagationCache {
    pub fn steps(&self) -> &[StepPropagator] {
        &self.steps
    }

    pub fn transfers(&self) -> usize {
        self.forward.len()
    }

    pub fn forward(&self, transfer: usize, k: usize) -> &CVec {
        &self.forward[transfer][k]
    }

    pub fn backward(&self, transfer: usize, k: usize) -> &CVec {
        &self.backward[transfer][k]
    }

    /// Fully propagated initial state of `transfer`.
    pub fn final_state(&self, transfer: usize) -> &CVec {
        self.forward[transfer]
            .last()
            .expect("cache holds at least the initial state")
    }

    pub fn overlap(&self) -> c64 {
        self.overlap
    }

    /// Product of all step propagators.
    pub fn total_unitary(&self) -> CMat {
        let d = self.steps[0].eigenvectors.nrows();
        self.steps
            .iter()
            .fold(CMat::identity(d, d), |acc, s| &s.unitary() * &acc)
    }
}

pub fn propagate(
    waveform: &ControlWaveform,
    set: &StateTransferSet,
    system: &ControlSystem,
) -> Result<PropagationCache> {
    if set.dims() != system.dims() {
        return Err(Error::DimensionMismatch {
            expected: system.dims().dim(),
            found: set.dims().dim(),
        });
    }
    let steps = waveform
        .samples()
        .iter()
        .map(|s| system.step(s, waveform.dt()))
        .collect::<Result<Vec<_>>>()?;

    let mut forward = Vec::with_capacity(set.len());
    let mut backward = Vec::with_capacity(set.len());
    let mut overlap = ZERO;
    for t in set.transfers() {
        let mut fw = Vec::with_capacity(steps.len() + 1);
        fw.push(t.initial.clone());
        for s in &steps {
            let next = s.apply(fw.last().unwrap());
            fw.push(next);
        }
        let mut bw = vec![CVec::zeros(0); steps.len() + 1];
        bw[steps.len()] = t.target.clone();
        for k in (0..steps.len()).rev() {
            bw[k] = steps[k].apply_adjoint(&bw[k + 1]);
        }
        overlap += linalg::inner(&t.target, fw.last().unwrap());
        forward.push(fw);
        backward.push(bw);
    }
    Ok(PropagationCache {
        steps,
        forward,
        backward,
        overlap,
    })
}

/// `F = |Σ_i ⟨ψ_final⁽ⁱ⁾|U|ψ_init⁽ⁱ⁾⟩|² / M²`.
pub fn transfer_fidelity(cache: &PropagationCache) -> f64 {
    let m = cache.transfers() as f64;
    (cache.overlap.norm_sqr() / (m * m)).min(1.0)
}

/// How `∂U_k/∂ε` is evaluated inside the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Exact propagator derivative.
    #[default]
    Exact,
    /// `∂U_k ≈ −iΔt H_q U_k`; only accurate when `‖H‖Δt ≪ 1`.
    FirstOrder,
}

/// `∂F/∂ε_q(kΔt)` for every step and quadrature.
pub fn fidelity_gradient(
    cache: &PropagationCache,
    system: &ControlSystem,
    waveform: &ControlWaveform,
    mode: GradientMode,
) -> Vec<[f64; 4]> {
    let overlap_grad = overlap_gradient(cache, system, waveform, mode);
    let m = cache.transfers() as f64;
    let v = cache.overlap;
    overlap_grad
        .iter()
        .map(|dv| {
            let mut g = [0.0; 4];
            for q in 0..4 {
                // ∂|v|² = 2 (Re v Re ∂v + Im v Im ∂v)
                g[q] = 2.0 * (v.re * dv[q].re + v.im * dv[q].im) / (m * m);
            }
            g
        })
        .collect()
}

/// `∂v/∂ε_q(kΔt)` for every step and quadrature.
pub fn overlap_gradient(
    cache: &PropagationCache,
    system: &ControlSystem,
    waveform: &ControlWaveform,
    mode: GradientMode,
) -> Vec<[c64; 4]> {
    assert_eq!(cache.steps.len(), waveform.steps(), "cache does not match waveform");
    let d = system.dims().dim();
    let drives = system.drives();
    let mut out = Vec::with_capacity(cache.steps.len());
    for (k, step) in cache.steps.iter().enumerate() {
        let mut dv = [ZERO; 4];
        match mode {
            GradientMode::Exact => {
                let v = &step.eigenvectors;
                let gamma = step.divided_differences();
                // W_pq = Γ_pq Σ_i conj(y_p) x_q, with x = V†f, y = V†b.
                let mut w = CMat::zeros(d, d);
                for i in 0..cache.transfers() {
                    let x = v.adjoint() * &cache.forward[i][k];
                    let y = v.adjoint() * &cache.backward[i][k + 1];
                    for q in 0..d {
                        for p in 0..d {
                            w[(p, q)] += y[p].conj() * x[q];
                        }
                    }
                }
                for q in 0..d {
                    for p in 0..d {
                        w[(p, q)] *= gamma[(p, q)];
                    }
                }
                // Σ_pq W_pq (V†HV)_pq = Σ_ab H_ab (conj(V) W Vᵀ)_ab
                let z = &(v.conjugate() * &w) * v.transpose();
                for q in DriveQuadrature::ALL {
                    dv[q as usize] = drives.sparse(q).contract(z.as_ref());
                }
            }
            GradientMode::FirstOrder => {
                let s = -I * waveform.dt();
                for i in 0..cache.transfers() {
                    let f = &cache.forward[i][k + 1];
                    let b = &cache.backward[i][k + 1];
                    for q in DriveQuadrature::ALL {
                        let hf = drives.sparse(q).apply(f);
                        dv[q as usize] += s * linalg::inner(b, &hf);
                    }
                }
            }
        }
        out.push(dv);
    }
    out
}

/// Propagate every transfer and return the fidelity.
pub fn evaluate_fidelity(system: &ControlSystem, waveform: &ControlWaveform, set: &StateTransferSet) -> Result<f64> {
    Ok(transfer_fidelity(&propagate(waveform, set, system)?))
}

/// `U_N ⋯ U_1` for a waveform.
pub fn total_propagator(system: &ControlSystem, waveform: &ControlWaveform) -> Result<CMat> {
    let d = system.dims().dim();
    let mut u = CMat::identity(d, d);
    for s in waveform.samples() {
        u = &step_propagator(system, s, waveform.dt())? * &u;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_error};
    use crate::operators::basis_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(n: usize, m: usize) -> HilbertDims {
        HilbertDims::new(n, m).unwrap()
    }

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> CVec {
        let mut v = CVec::from_fn(d, |_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = linalg::norm(&v);
        for i in 0..d {
            v[i] /= n;
        }
        v
    }

    fn random_waveform(steps: usize, amp: f64, rng: &mut ChaCha8Rng) -> ControlWaveform {
        let samples = (0..steps)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-amp..amp)))
            .collect();
        ControlWaveform::new(2.0, samples).unwrap()
    }

    fn chi_system(d: HilbertDims) -> ControlSystem {
        ControlSystem::new(HamiltonianModel::reference(), d).unwrap()
    }

    #[test]
    fn waveform_validation() {
        assert!(ControlWaveform::new(0.0, vec![[0.0; 4]]).is_err());
        assert!(ControlWaveform::new(2.0, vec![]).is_err());
        assert!(ControlWaveform::new(2.0, vec![[f64::NAN, 0.0, 0.0, 0.0]]).is_err());
        let w = ControlWaveform::zeros(550, 2.0).unwrap();
        assert_eq!(w.duration(), 1100.0);
    }

    #[test]
    fn zero_drive_zero_hamiltonian_gives_identity() {
        let sys = ControlSystem::new(HamiltonianModel::free(), dims(4, 2)).unwrap();
        let u = step_propagator(&sys, &[0.0; 4], 2.0).unwrap();
        assert!(max_abs_diff(u.as_ref(), CMat::identity(8, 8).as_ref()) < 1e-14);
    }

    #[test]
    fn transmon_pi_pulse_is_minus_i_sigma_x() {
        // ε(b + b†) = ε σx; exp(−i dt ε σx) with ε dt = π/2 gives −iσx.
        let sys = ControlSystem::new(HamiltonianModel::free(), dims(1, 2)).unwrap();
        let dt = 2.0;
        let eps = std::f64::consts::FRAC_PI_2 / dt;
        let u = step_propagator(&sys, &[0.0, 0.0, eps, 0.0], dt).unwrap();
        let mut expect = CMat::zeros(2, 2);
        expect[(0, 1)] = -I;
        expect[(1, 0)] = -I;
        assert!(max_abs_diff(u.as_ref(), expect.as_ref()) < 1e-10);
    }

    #[test]
    fn dispersive_phase_on_excited_photon() {
        let model = HamiltonianModel {
            chi: -2.0 * std::f64::consts::PI * 2.194e-3,
            ..HamiltonianModel::free()
        };
        let d = dims(3, 2);
        let sys = ControlSystem::new(model, d).unwrap();
        let dt = 1.0 / (2.0 * model.chi.abs() / (2.0 * std::f64::consts::PI));
        let u = step_propagator(&sys, &[0.0; 4], dt).unwrap();
        let i = d.index(1, 1);
        let expect = (-I * (model.chi * dt)).exp();
        assert!((u[(i, i)] - expect).norm() < 1e-12);
        assert!((u[(0, 0)] - cr(1.0)).norm() < 1e-14);
    }

    #[test]
    fn step_propagator_rejects_non_finite() {
        let sys = chi_system(dims(3, 2));
        assert!(matches!(
            step_propagator(&sys, &[f64::INFINITY, 0.0, 0.0, 0.0], 2.0),
            Err(Error::InvalidControl(_))
        ));
    }

    #[test]
    fn propagation_zero_waveform_zero_hamiltonian_is_identity() {
        let d = dims(5, 2);
        let sys = ControlSystem::new(HamiltonianModel::free(), d).unwrap();
        let psi = basis_state(d, 2, 1).unwrap();
        let set = StateTransferSet::new(
            d,
            vec![StateTransfer {
                initial: psi.clone(),
                target: psi.clone(),
            }],
        )
        .unwrap();
        let cache = propagate(&ControlWaveform::zeros(10, 2.0).unwrap(), &set, &sys).unwrap();
        assert!((linalg::inner(&psi, cache.final_state(0)) - cr(1.0)).norm() < 1e-14);
        assert!((transfer_fidelity(&cache) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_step_matches_step_propagator() {
        let d = dims(4, 2);
        let sys = chi_system(d);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_waveform(1, 0.05, &mut rng);
        let psi = random_state(d.dim(), &mut rng);
        let set = StateTransferSet::new(
            d,
            vec![StateTransfer {
                initial: psi.clone(),
                target: psi.clone(),
            }],
        )
        .unwrap();
        let cache = propagate(&w, &set, &sys).unwrap();
        let u = step_propagator(&sys, &w.samples()[0], 2.0).unwrap();
        let direct = &u * &psi;
        for i in 0..d.dim() {
            assert!((direct[i] - cache.final_state(0)[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn chain_overlap_matches_explicit_matrix_product() {
        let d = dims(5, 2);
        let sys = chi_system(d);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_waveform(10, 0.08, &mut rng);
        let psi = random_state(d.dim(), &mut rng);
        let phi = random_state(d.dim(), &mut rng);
        let set = StateTransferSet::new(
            d,
            vec![StateTransfer {
                initial: psi.clone(),
                target: phi.clone(),
            }],
        )
        .unwrap();
        let cache = propagate(&w, &set, &sys).unwrap();
        // Oracle: explicit product of independently built exponentials.
        let mut u = CMat::identity(d.dim(), d.dim());
        for s in w.samples() {
            let a = linalg::scaled(sys.hamiltonian(s).as_ref(), -I * 2.0);
            u = &expm(a.as_ref()) * &u;
        }
        let expect = linalg::inner(&phi, &(&u * &psi));
        assert!((cache.overlap() - expect).norm() < 1e-12);
        for k in 0..=10 {
            assert!((linalg::norm(cache.forward(0, k)) - 1.0).abs() < 1e-9);
            assert!((linalg::norm(cache.backward(0, k)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_edge_cases() {
        let d = dims(3, 2);
        let sys = ControlSystem::new(HamiltonianModel::free(), d).unwrap();
        let w = ControlWaveform::zeros(3, 2.0).unwrap();
        let g0 = basis_state(d, 0, 0).unwrap();
        let g1 = basis_state(d, 1, 0).unwrap();
        let orth = StateTransferSet::new(
            d,
            vec![StateTransfer {
                initial: g0.clone(),
                target: g1.clone(),
            }],
        )
        .unwrap();
        assert_eq!(evaluate_fidelity(&sys, &w, &orth).unwrap(), 0.0);

        // Phases +1 and −1 on two transfers cancel coherently.
        let mut minus_g1 = g1.clone();
        minus_g1[d.index(1, 0)] = cr(-1.0);
        let cancel = StateTransferSet::new(
            d,
            vec![
                StateTransfer {
                    initial: g0.clone(),
                    target: g0.clone(),
                },
                StateTransfer {
                    initial: g1.clone(),
                    target: minus_g1,
                },
            ],
        )
        .unwrap();
        assert!(evaluate_fidelity(&sys, &w, &cancel).unwrap() < 1e-30);
    }

    #[test]
    fn unnormalized_states_are_rejected() {
        let d = dims(3, 2);
        let mut v = basis_state(d, 0, 0).unwrap();
        v[0] = cr(1.1);
        let r = StateTransferSet::new(
            d,
            vec![StateTransfer {
                initial: v.clone(),
                target: v,
            }],
        );
        assert!(matches!(r, Err(Error::InvalidState(_))));
        assert!(StateTransferSet::new(d, vec![]).is_err());
    }

    #[test]
    fn commuting_derivative_closed_form() {
        // H0 = 0: ∂/∂ε exp(−i dt ε X) = −i dt X exp(−i dt ε X).
        let d = dims(4, 2);
        let sys = ControlSystem::new(HamiltonianModel::free(), d).unwrap();
        let sample = [0.03, 0.0, 0.0, 0.0];
        let dt = 2.0;
        let du = propagator_derivative(&sys, &sample, dt, DriveQuadrature::OscillatorRe).unwrap();
        let u = step_propagator(&sys, &sample, dt).unwrap();
        let expect = linalg::scaled((sys.drives().x_c.as_ref() * &u).as_ref(), -I * dt);
        assert!(max_abs_diff(du.as_ref(), expect.as_ref()) < 1e-13);
    }

    #[test]
    fn augmented_derivative_matches_finite_differences() {
        let d = dims(4, 2);
        let sys = chi_system(d);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sample: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.1..0.1));
        let dt = 2.0;
        let h = 1e-6;
        for q in DriveQuadrature::ALL {
            let du = propagator_derivative(&sys, &sample, dt, q).unwrap();
            let mut plus = sample;
            plus[q as usize] += h;
            let mut minus = sample;
            minus[q as usize] -= h;
            let up = step_propagator(&sys, &plus, dt).unwrap();
            let um = step_propagator(&sys, &minus, dt).unwrap();
            let fd = linalg::scaled((&up - &um).as_ref(), cr(0.5 / h));
            assert!(max_abs_diff(du.as_ref(), fd.as_ref()) < 1e-7, "{q:?}");
        }
    }

    #[test]
    fn spectral_and_augmented_derivatives_agree() {
        let d = dims(6, 2);
        let sys = chi_system(d);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sample: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.2..0.2));
        let step = sys.step(&sample, 2.0).unwrap();
        for q in DriveQuadrature::ALL {
            let a = propagator_derivative(&sys, &sample, 2.0, q).unwrap();
            let b = step.derivative(sys.drives().get(q));
            assert!(max_abs_diff(a.as_ref(), b.as_ref()) < 1e-12, "{q:?}");
        }
    }

    #[test]
    fn derivative_preserves_unitarity_to_first_order() {
        // d(U†U)/dε = dU†·U + U†·dU = 0.
        let d = dims(4, 2);
        let sys = chi_system(d);
        let sample = [0.02, -0.05, 0.07, 0.01];
        let u = step_propagator(&sys, &sample, 2.0).unwrap();
        let du = propagator_derivative(&sys, &sample, 2.0, DriveQuadrature::TransmonIm).unwrap();
        let sum = &(du.adjoint() * &u) + &(u.adjoint() * &du);
        assert!(linalg::max_abs(sum.as_ref()) < 1e-12);
        assert!(linalg::hermiticity_error(du.as_ref()) > 1e-3);
    }

    #[test]
    fn long_chain_stays_unitary() {
        let d = dims(6, 2);
        let sys = chi_system(d);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = random_waveform(1000, 0.05, &mut rng);
        let u = total_propagator(&sys, &w).unwrap();
        assert!(unitarity_error(u.as_ref()) < 1e-9);
    }
}
