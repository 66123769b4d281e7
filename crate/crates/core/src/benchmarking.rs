// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Randomized benchmarking of the logical qubit: Clifford bookkeeping,
//! sequence sampling, channel composition (at the Pauli-transfer level or
//! by full open-system evolution), decay fits and error extraction.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::catcode::Gate;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::lindblad::PulseChannel;
use crate::operators::{basis_state, HilbertDims};
use crate::tomography::PauliTransferMatrix;

/// Signed-permutation action of a Clifford on the Bloch vector.
type Rotation = [[i8; 3]; 3];

fn rotation_of(gate: Gate) -> Rotation {
    let r = PauliTransferMatrix::from_unitary(&gate.unitary());
    std::array::from_fn(|i| std::array::from_fn(|j| r.0[i + 1][j + 1].round() as i8))
}

fn rot_mul(a: &Rotation, b: &Rotation) -> Rotation {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

const ROT_IDENTITY: Rotation = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

/// The 24-element single-qubit Clifford group, generated by the 8 RB
/// gates, with a shortest decomposition of every element.
#[derive(Debug)]
pub struct CliffordGroup {
    elements: Vec<Rotation>,
    index: HashMap<Rotation, usize>,
    /// Shortest gate sequence (in application order) realizing each element;
    /// ties go to the lexicographically smallest list of gate names.
    words: Vec<Vec<Gate>>,
}

impl CliffordGroup {
    fn generate() -> Self {
        let mut gens: Vec<Gate> = Gate::RB_SET.to_vec();
        gens.sort_by_key(|g| g.name());
        let mut elements = vec![ROT_IDENTITY];
        let mut words: Vec<Vec<Gate>> = vec![Vec::new()];
        let mut index = HashMap::from([(ROT_IDENTITY, 0)]);
        let mut frontier = vec![0usize];
        while !frontier.is_empty() {
            // Frontier words are in lexicographic order, so the first word
            // found for an element is the smallest of its length.
            let mut next = Vec::new();
            for &e in &frontier {
                for &g in &gens {
                    let r = rot_mul(&rotation_of(g), &elements[e]);
                    if let std::collections::hash_map::Entry::Vacant(v) = index.entry(r) {
                        v.insert(elements.len());
                        let mut w = words[e].clone();
                        w.push(g);
                        next.push(elements.len());
                        elements.push(r);
                        words.push(w);
                    }
                }
            }
            frontier = next;
        }
        Self { elements, index, words }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Group element reached by applying `gates` in order.
    pub fn element(&self, gates: &[Gate]) -> usize {
        let r = gates
            .iter()
            .fold(ROT_IDENTITY, |acc, &g| rot_mul(&rotation_of(g), &acc));
        self.index[&r]
    }

    pub fn inverse(&self, e: usize) -> usize {
        let r = &self.elements[e];
        let t: Rotation = std::array::from_fn(|i| std::array::from_fn(|j| r[j][i]));
        self.index[&t]
    }

    pub fn word(&self, e: usize) -> &[Gate] {
        &self.words[e]
    }

    /// Gates undoing the ideal action of `gates`.
    pub fn correction(&self, gates: &[Gate]) -> Vec<Gate> {
        self.words[self.inverse(self.element(gates))].clone()
    }

    pub fn max_word_len(&self) -> usize {
        self.words.iter().map(Vec::len).max().unwrap_or(0)
    }
}

pub fn clifford_group() -> &'static CliffordGroup {
    static GROUP: OnceLock<CliffordGroup> = OnceLock::new();
    GROUP.get_or_init(CliffordGroup::generate)
}

/// A random sequence and its inverting correction, padded with `I` to a
/// fixed depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbSequence {
    pub gates: Vec<Gate>,
    pub correction: Vec<Gate>,
}

impl RbSequence {
    /// Every gate in application order, correction last.
    pub fn all_gates(&self) -> impl Iterator<Item = Gate> + '_ {
        self.gates.iter().chain(&self.correction).copied()
    }
}

pub fn sample_sequence<R: Rng>(length: usize, rng: &mut R) -> Result<RbSequence> {
    sample_with(length, None, rng)
}

/// Interleaved variant: `g1, G, g2, G, …, gn, G`, then the correction.
pub fn sample_interleaved<R: Rng>(length: usize, gate: Gate, rng: &mut R) -> Result<RbSequence> {
    sample_with(length, Some(gate), rng)
}

fn sample_with<R: Rng>(length: usize, interleave: Option<Gate>, rng: &mut R) -> Result<RbSequence> {
    if length == 0 {
        return Err(Error::InvalidParameter("sequence length must be ≥ 1".into()));
    }
    let mut gates = Vec::with_capacity(length * 2);
    for _ in 0..length {
        gates.push(*Gate::RB_SET.choose(rng).expect("non-empty gate set"));
        if let Some(g) = interleave {
            gates.push(g);
        }
    }
    // Pad with identities so every recovery has the same depth; a depth that
    // varied with `length` would bend the decay at short lengths.
    let group = clifford_group();
    let mut correction = group.correction(&gates);
    correction.resize(group.max_word_len(), Gate::I);
    Ok(RbSequence { gates, correction })
}

/// Logical channels of the 8 RB gates.
#[derive(Debug, Clone, PartialEq)]
pub struct GateChannelSet {
    channels: BTreeMap<Gate, PauliTransferMatrix>,
}

const TP_TOL: f64 = 1e-9;

impl GateChannelSet {
    /// Every RB gate must be present and trace preserving.
    pub fn new(channels: BTreeMap<Gate, PauliTransferMatrix>) -> Result<Self> {
        for g in Gate::RB_SET {
            let r = channels
                .get(&g)
                .ok_or_else(|| Error::InvalidParameter(format!("channel for {g} missing")))?;
            if !r.is_trace_preserving(TP_TOL) {
                return Err(Error::NotTracePreserving(r.trace_deviation()));
            }
        }
        Ok(Self { channels })
    }

    pub fn ideal() -> Self {
        Self::with_noise(&PauliTransferMatrix::identity())
    }

    /// Each ideal gate followed by a depolarizing channel of strength `p`.
    pub fn depolarizing(p: f64) -> Self {
        Self::with_noise(&PauliTransferMatrix::depolarizing(p))
    }

    fn with_noise(noise: &PauliTransferMatrix) -> Self {
        Self {
            channels: Gate::ALL
                .into_iter()
                .map(|g| (g, noise * &PauliTransferMatrix::from_unitary(&g.unitary())))
                .collect(),
        }
    }

    pub fn set(&mut self, gate: Gate, channel: PauliTransferMatrix) {
        self.channels.insert(gate, channel);
    }

    pub fn get(&self, gate: Gate) -> Result<&PauliTransferMatrix> {
        self.channels
            .get(&gate)
            .ok_or_else(|| Error::InvalidParameter(format!("channel for {gate} missing")))
    }

    fn survival(&self, seq: &RbSequence) -> Result<f64> {
        // Start in +Z: Bloch vector (1, 0, 0, 1).
        let mut r = [1.0, 0.0, 0.0, 1.0];
        for g in seq.all_gates() {
            let m = &self.get(g)?.0;
            r = std::array::from_fn(|i| (0..4).map(|j| m[i][j] * r[j]).sum());
        }
        Ok((0.5 * (r[0] + r[3])).clamp(0.0, 1.0))
    }
}

/// Success probabilities per sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct RbResult {
    pub lengths: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Measurements behind each point (shots, or sequences when exact).
    pub samples: Vec<u64>,
}

impl RbResult {
    pub fn to_table(&self) -> String {
        let mut out = String::from("# n p stderr samples\n");
        for i in 0..self.lengths.len() {
            let _ = writeln!(
                out,
                "{} {:.9} {:.9} {}",
                self.lengths[i], self.probabilities[i], self.stderr[i], self.samples[i]
            );
        }
        out
    }
}

fn check_lengths(lengths: &[usize]) -> Result<()> {
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(Error::InvalidParameter("RB lengths must be non-empty and ≥ 1".into()));
    }
    Ok(())
}

/// PTM-level RB: every shot draws a fresh sequence, composes the channels
/// and records one Bernoulli outcome.
pub fn run_rb<R: Rng>(
    channels: &GateChannelSet,
    lengths: &[usize],
    shots: u64,
    interleave: Option<Gate>,
    rng: &mut R,
) -> Result<RbResult> {
    check_lengths(lengths)?;
    if shots == 0 {
        return Err(Error::InvalidParameter("shot count must be ≥ 1".into()));
    }
    let mut probabilities = Vec::with_capacity(lengths.len());
    let mut stderr = Vec::with_capacity(lengths.len());
    for &n in lengths {
        let mut hits = 0u64;
        for _ in 0..shots {
            let seq = sample_with(n, interleave, rng)?;
            let p = channels.survival(&seq)?;
            if rng.gen_bool(p) {
                hits += 1;
            }
        }
        let p = hits as f64 / shots as f64;
        probabilities.push(p);
        stderr.push((p * (1.0 - p) / shots as f64).sqrt());
    }
    Ok(RbResult {
        lengths: lengths.to_vec(),
        probabilities,
        stderr,
        samples: vec![shots; lengths.len()],
    })
}

/// Pulse-level channels for end-to-end RB on the joint space.
#[derive(Debug, Clone)]
pub struct LindbladGateSet {
    pub gates: BTreeMap<Gate, PulseChannel>,
    pub encode: PulseChannel,
    pub decode: PulseChannel,
}

impl LindbladGateSet {
    pub fn dims(&self) -> HilbertDims {
        self.encode.dims()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dims();
        for g in Gate::RB_SET {
            let ch = self
                .gates
                .get(&g)
                .ok_or_else(|| Error::InvalidParameter(format!("pulse for {g} missing")))?;
            if ch.dims() != d {
                return Err(Error::DimensionMismatch {
                    expected: d.dim(),
                    found: ch.dims().dim(),
                });
            }
        }
        if self.decode.dims() != d {
            return Err(Error::DimensionMismatch {
                expected: d.dim(),
                found: self.decode.dims().dim(),
            });
        }
        Ok(())
    }

    /// Probability of finding the transmon in its ground state after
    /// encode, the sequence, and decode, starting from `|g, 0⟩`.
    pub fn survival(&self, seq: &RbSequence) -> Result<f64> {
        let d = self.dims();
        let g0 = basis_state(d, 0, 0)?;
        let mut rho = CMat::from_fn(d.dim(), d.dim(), |i, j| g0[i] * g0[j].conj());
        rho = self.encode.apply(&rho)?;
        for g in seq.all_gates() {
            rho = self.gates[&g].apply(&rho)?;
        }
        rho = self.decode.apply(&rho)?;
        let p: f64 = (0..d.n_osc()).map(|n| rho[(d.index(n, 0), d.index(n, 0))].re).sum();
        Ok(p.clamp(0.0, 1.0))
    }
}

/// Full open-system RB. Each length averages `sequences` random sequences;
/// with `shots = None` the exact survival probabilities are used, otherwise
/// each sequence contributes binomially sampled outcomes.
pub fn run_rb_lindblad<R: Rng>(
    set: &LindbladGateSet,
    lengths: &[usize],
    sequences: usize,
    shots: Option<u64>,
    interleave: Option<Gate>,
    rng: &mut R,
) -> Result<RbResult> {
    check_lengths(lengths)?;
    set.validate()?;
    if sequences == 0 || shots == Some(0) {
        return Err(Error::InvalidParameter("sequence and shot counts must be ≥ 1".into()));
    }
    let mut probabilities = Vec::with_capacity(lengths.len());
    let mut stderr = Vec::with_capacity(lengths.len());
    for &n in lengths {
        let mut values = Vec::with_capacity(sequences);
        for _ in 0..sequences {
            let seq = sample_with(n, interleave, rng)?;
            let p = set.survival(&seq)?;
            values.push(match shots {
                None => p,
                Some(s) => Binomial::new(s, p).expect("valid probability").sample(rng) as f64 / s as f64,
            });
            log::debug!("RB length {n}: sequence survival {p:.6}");
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
        } else {
            0.0
        };
        probabilities.push(mean);
        stderr.push((var / values.len() as f64).sqrt());
    }
    Ok(RbResult {
        lengths: lengths.to_vec(),
        probabilities,
        stderr,
        samples: vec![(sequences as u64) * shots.unwrap_or(1); lengths.len()],
    })
}

/// `p(n) = 0.5 + A e^{−n/τ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub amplitude: f64,
    /// `+∞` when the data show no decay.
    pub tau: f64,
    /// Covariance of `(A, τ)`; zero when τ is the sentinel.
    pub covariance: [[f64; 2]; 2],
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
    pub decaying: bool,
}

impl DecayFit {
    pub fn model(&self, n: f64) -> f64 {
        if self.tau.is_infinite() {
            0.5 + self.amplitude
        } else {
            0.5 + self.amplitude * (-n / self.tau).exp()
        }
    }

    pub fn tau_stderr(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }

    pub fn summary(&self) -> String {
        format!(
            "# A {:.9}\n# tau {}\n# tau_stderr {:.6e}\n# r {:.9e}\n# residual_rms {:.3e}\n",
            self.amplitude,
            if self.tau.is_finite() {
                format!("{:.9}", self.tau)
            } else {
                "inf".into()
            },
            self.tau_stderr(),
            rb_error(self.tau).unwrap_or(f64::NAN),
            self.residual_rms,
        )
    }
}

const LM_MAX_ITER: usize = 200;

/// Levenberg–Marquardt fit of `0.5 + A e^{−n/τ}`, started from a
/// log-linear fit.
pub fn fit_decay(result: &RbResult) -> Result<DecayFit> {
    let mut distinct = result.lengths.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "decay fit needs at least 3 distinct lengths, got {}",
            distinct.len()
        )));
    }
    let x: Vec<f64> = result.lengths.iter().map(|&n| n as f64).collect();
    let y = &result.probabilities;
    let sentinel = |amp: f64| {
        let residuals: Vec<f64> = y.iter().map(|v| v - 0.5 - amp).collect();
        DecayFit {
            amplitude: amp,
            tau: f64::INFINITY,
            covariance: [[0.0; 2]; 2],
            residual_rms: rms(&residuals),
            residuals,
            decaying: false,
        }
    };
    let mean_amp = y.iter().sum::<f64>() / y.len() as f64 - 0.5;

    // Log-linear start on points above the asymptote.
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.5)
        .map(|(&n, &v)| (n, (v - 0.5).ln()))
        .collect();
    let (mut a, mut k) = match linear_fit(&pts) {
        Some((icpt, slope)) if slope < 0.0 => (icpt.exp(), -slope),
        _ => {
            log::warn!("RB data show no decay; reporting τ = ∞");
            return Ok(sentinel(mean_amp));
        }
    };

    let ssr = |a: f64, k: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&n, &v)| (v - 0.5 - a * (-k * n).exp()).powi(2))
            .sum()
    };
    let mut cost = ssr(a, k);
    let mut lambda = 1e-3;
    for _ in 0..LM_MAX_ITER {
        // Normal equations for (A, k).
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&n, &v) in x.iter().zip(y) {
            let e = (-k * n).exp();
            let j = [e, -a * n * e];
            let r = v - 0.5 - a * e;
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let m = [
                [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
            ];
            let Some(step) = solve2(&m, &jtr) else {
                lambda *= 10.0;
                continue;
            };
            let (na, nk) = (a + step[0], k + step[1]);
            let c = ssr(na, nk);
            if c.is_finite() && c <= cost {
                let done = (cost - c) <= 1e-15 * cost.max(1e-300) || step[0].abs() + step[1].abs() < 1e-14;
                a = na;
                k = nk;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !(k > 0.0) || !k.is_finite() {
        log::warn!("RB fit converged to a non-decaying curve; reporting τ = ∞");
        return Ok(sentinel(mean_amp));
    }
    let tau = 1.0 / k;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(&n, &v)| v - 0.5 - a * (-k * n).exp()).collect();
    // Covariance in (A, k), mapped to (A, τ) with dτ/dk = −τ².
    let mut jtj = [[0.0; 2]; 2];
    for &n in &x {
        let e = (-k * n).exp();
        let j = [e, -a * n * e];
        for p in 0..2 {
            for q in 0..2 {
                jtj[p][q] += j[p] * j[q];
            }
        }
    }
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let s2 = cost / dof;
    let covariance = match inv2(&jtj) {
        Some(c) => {
            let g = -tau * tau;
            [
                [s2 * c[0][0], s2 * c[0][1] * g],
                [s2 * c[1][0] * g, s2 * c[1][1] * g * g],
            ]
        }
        None => [[f64::INFINITY; 2]; 2],
    };
    Ok(DecayFit {
        amplitude: a,
        tau,
        covariance,
        residual_rms: rms(&residuals),
        residuals,
        decaying: true,
    })
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|r| r * r).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

fn inv2(m: &[[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn solve2(m: &[[f64; 2]; 2], b: &[f64; 2]) -> Option<[f64; 2]> {
    let inv = inv2(m)?;
    Some([inv[0][0] * b[0] + inv[0][1] * b[1], inv[1][0] * b[0] + inv[1][1] * b[1]])
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "decay constant must be > 0, got {tau}"
        )));
    }
    Ok(())
}

/// Average error per gate, `r = (1 − e^{−1/τ})/2`.
pub fn rb_error(tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(0.5 * -(-1.0 / tau).exp_m1())
}

/// Error of an interleaved gate, `r = (1 − e^{−(1/τ_gate − 1/τ_rb)})/2`.
/// Positive when the interleaved decay is faster; a slower interleaved
/// decay gives a negative value, which is returned with a warning.
pub fn irb_error(tau_gate: f64, tau_rb: f64) -> Result<f64> {
    check_tau(tau_gate)?;
    check_tau(tau_rb)?;
    let r = 0.5 * -(-(1.0 / tau_gate - 1.0 / tau_rb)).exp_m1();
    if r < 0.0 {
        log::warn!("interleaved decay is slower than reference RB; gate error {r:.3e} is negative");
    }
    Ok(r)
}
