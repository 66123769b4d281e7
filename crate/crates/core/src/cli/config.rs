// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration.
//!
//! The format is TOML. Physical inputs use laboratory units (MHz for
//! frequencies, µs for lifetimes, ns for times); they are kept as written
//! in [`ConfigDocument`] and converted to rad/ns and ns in
//! [`ExperimentConfig`]. Every section except `[target]` and `[pulse]` is
//! optional; unknown keys are rejected.
//!
//! ```toml
//! seed = 0
//! output_dir = "out"
//!
//! [model]                     # defaults: the reference device
//! chi_mhz = -2.194
//! kerr_mhz = -0.0037
//! anharmonicity_mhz = -236.0
//! chi_prime_mhz = -0.019
//! t1_transmon_us = 170.0
//! tphi_transmon_us = 43.0
//! t1_oscillator_us = 2700.0
//! omega_t_mhz = 5664.0
//! omega_c_mhz = 4452.6
//!
//! [target]
//! kind = "gate"               # gate | fock | encode | decode | parity | kerr_correct
//! gate = "X180"               # kind = "gate"
//! # n = 6                     # kind = "fock"
//! # n_max = 8                 # kind = "parity"
//! # delta_t_ns = 1000.0       # kind = "kerr_correct"
//! # alpha = 1.7320508075688772
//!
//! [pulse]
//! steps = 550
//! dt_ns = 2.0
//! seed_amplitude = 0.03       # rad/ns, RMS of the random start
//!
//! [band]                      # per-drive [min, max] in MHz
//! oscillator_mhz = [-80.0, 80.0]
//! transmon_mhz = [-80.0, 80.0]
//!
//! [penalties]
//! lambda_amplitude = 1e4
//! lambda_derivative = 1e-3
//! lambda_discrepancy = 100.0
//! epsilon_max_mhz = 20.0
//!
//! [truncation]
//! n_osc = 20
//! n_trans = 2
//! pads = [0, 2]
//!
//! [optimizer]
//! max_iter = 1000
//! grad_tol = 1e-9
//! fidelity_goal = 0.999
//! memory = 10
//!
//! [simulation]
//! substeps = 4
//! decoherence = true
//!
//! [wigner]                    # optional
//! extent = 3.5
//! points = 41
//! reconstruct_n_max = 12      # optional
//!
//! [rb]                        # optional
//! mode = "lindblad"           # lindblad | ptm | depolarizing
//! lengths = [1, 2, 4, 8, 12, 16, 24, 32]
//! sequences = 10
//! # shots = 2000
//! # waveform_dir = "pulses"
//! # depolarizing_p = 0.02
//! # interleave = "X180"
//!
//! [correction]
//! b_ns = 0.0
//! tau_ns = 0.0
//! ```

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::catcode::{Gate, Operation};
use crate::grape::{BandLimit, OptimizerConfig, PenaltyWeights, ProblemSpec};
use crate::linalg::{c64, cr};
use crate::lindblad::DecoherenceSpec;
use crate::operators::{mhz_to_angular, HamiltonianModel, HilbertDims};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub kind: ConfigErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax(String),
    UnknownKey(String),
    MissingKey(String),
    MissingTarget,
    InvalidValue { key: String, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "config line {l}: ")?;
        } else {
            f.write_str("config: ")?;
        }
        match &self.kind {
            ConfigErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ConfigErrorKind::UnknownKey(k) => write!(f, "unknown key {k}"),
            ConfigErrorKind::MissingKey(k) => write!(f, "missing required key {k}"),
            ConfigErrorKind::MissingTarget => f.write_str("missing target"),
            ConfigErrorKind::InvalidValue { key, reason } => write!(f, "invalid value for {key}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub model: ModelSection,
    pub target: Option<TargetSection>,
    pub pulse: Option<PulseSection>,
    #[serde(default)]
    pub band: BandSection,
    #[serde(default)]
    pub penalties: PenaltySection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb: Option<RbSection>,
    #[serde(default)]
    pub correction: CorrectionSection,
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub chi_mhz: f64,
    pub kerr_mhz: f64,
    pub anharmonicity_mhz: f64,
    pub chi_prime_mhz: f64,
    pub t1_transmon_us: f64,
    pub tphi_transmon_us: f64,
    pub t1_oscillator_us: f64,
    pub omega_t_mhz: f64,
    pub omega_c_mhz: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            chi_mhz: -2.194,
            kerr_mhz: -0.0037,
            anharmonicity_mhz: -236.0,
            chi_prime_mhz: -0.019,
            t1_transmon_us: 170.0,
            tphi_transmon_us: 43.0,
            t1_oscillator_us: 2700.0,
            omega_t_mhz: 5664.0,
            omega_c_mhz: 4452.6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub steps: usize,
    pub dt_ns: f64,
    #[serde(default = "default_seed_amplitude")]
    pub seed_amplitude: f64,
}

fn default_seed_amplitude() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandSection {
    pub oscillator_mhz: [f64; 2],
    pub transmon_mhz: [f64; 2],
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            oscillator_mhz: [-80.0, 80.0],
            transmon_mhz: [-80.0, 80.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    pub lambda_amplitude: f64,
    pub lambda_derivative: f64,
    pub lambda_discrepancy: f64,
    pub epsilon_max_mhz: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        let w = PenaltyWeights::default();
        Self {
            lambda_amplitude: w.lambda_amplitude,
            lambda_derivative: w.lambda_derivative,
            lambda_discrepancy: w.lambda_discrepancy,
            epsilon_max_mhz: crate::operators::angular_to_mhz(w.epsilon_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSection {
    pub n_osc: usize,
    pub n_trans: usize,
    pub pads: Vec<usize>,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            n_osc: 20,
            n_trans: 2,
            pads: vec![0, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub fidelity_goal: f64,
    pub memory: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        Self {
            max_iter: c.max_iter,
            grad_tol: c.grad_tol,
            fidelity_goal: c.fidelity_goal,
            memory: c.memory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub substeps: usize,
    pub decoherence: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            substeps: 4,
            decoherence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSection {
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct_n_max: Option<usize>,
}

fn default_extent() -> f64 {
    3.5
}

fn default_points() -> usize {
    41
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbSection {
    #[serde(default = "default_rb_mode")]
    pub mode: String,
    #[serde(default = "default_rb_lengths")]
    pub lengths: Vec<usize>,
    #[serde(default = "default_sequences")]
    pub sequences: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depolarizing_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interleave: Option<String>,
}

fn default_rb_mode() -> String {
    "lindblad".into()
}

fn default_rb_lengths() -> Vec<usize> {
    vec![1, 2, 4, 8, 12, 16, 24, 32]
}

fn default_sequences() -> usize {
    10
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionSection {
    pub b_ns: f64,
    pub tau_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbMode {
    Lindblad,
    Ptm,
    Depolarizing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbSettings {
    pub mode: RbMode,
    pub lengths: Vec<usize>,
    pub sequences: usize,
    pub shots: Option<u64>,
    pub waveform_dir: Option<PathBuf>,
    pub depolarizing_p: f64,
    pub interleave: Option<Gate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerSettings {
    pub extent: f64,
    pub points: usize,
    pub reconstruct_n_max: Option<usize>,
}

/// A validated configuration in internal units.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub document: ConfigDocument,
    pub model: HamiltonianModel,
    pub operation: Operation,
    pub alpha: c64,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub substeps: usize,
    pub decoherence: DecoherenceSpec,
    pub wigner: Option<WignerSettings>,
    pub rb: Option<RbSettings>,
    /// Dispersion weighting `b` (ns) and delay `τ` (ns).
    pub correction: (f64, f64),
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        self.document.to_toml()
    }

    /// The same settings aimed at another target.
    pub fn with_operation(&self, op: Operation) -> Self {
        let mut out = self.clone();
        out.operation = op;
        let alpha = self.document.target.as_ref().and_then(|t| t.alpha);
        let mut t = TargetSection {
            alpha,
            ..TargetSection::default()
        };
        match op {
            Operation::Gate(g) => {
                t.kind = Some("gate".into());
                t.gate = Some(g.name().into());
            }
            Operation::Fock(n) => {
                t.kind = Some("fock".into());
                t.n = Some(n);
            }
            Operation::Encode => t.kind = Some("encode".into()),
            Operation::Decode => t.kind = Some("decode".into()),
            Operation::Parity { n_max } => {
                t.kind = Some("parity".into());
                t.n_max = Some(n_max);
            }
            Operation::KerrCorrection { delta_t } => {
                t.kind = Some("kerr_correct".into());
                t.delta_t_ns = Some(delta_t);
            }
        }
        out.document.target = Some(t);
        out
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.seed = seed;
        out.optimizer.seed = seed;
        out.document.seed = seed;
        out
    }

    pub fn with_output_dir(&self, dir: impl Into<PathBuf>) -> Self {
        let mut out = self.clone();
        out.output_dir = dir.into();
        out.document.output_dir = out.output_dir.display().to_string();
        out
    }
}

impl ConfigDocument {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration documents always serialize")
    }
}

/// 1-based line of `key` inside `[section]` (or at top level for "").
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') && line.ends_with(']') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn invalid(&self, section: &str, key: &str, reason: impl Into<String>) -> ConfigError {
        let line = locate(self.text, section, key).or_else(|| locate(self.text, section, ""));
        let name = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        ConfigError {
            line,
            kind: ConfigErrorKind::InvalidValue {
                key: name,
                reason: reason.into(),
            },
        }
    }

    fn missing(&self, section: &str, key: &str) -> ConfigError {
        ConfigError {
            line: locate(self.text, section, ""),
            kind: ConfigErrorKind::MissingKey(format!("{section}.{key}")),
        }
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(section, key, format!("must be finite and > 0, got {v}")))
        }
    }

    fn non_negative(&self, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(section, key, format!("must be finite and ≥ 0, got {v}")))
        }
    }

    fn finite(&self, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(section, key, format!("must be finite, got {v}")))
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn classify(err: toml::de::Error, text: &str) -> ConfigError {
    let line = err.span().map(|s| line_of(text, s.start));
    let msg = err.message().trim().to_string();
    let quoted = || msg.split('`').nth(1).unwrap_or("").to_string();
    let kind = if msg.starts_with("unknown field") {
        ConfigErrorKind::UnknownKey(quoted())
    } else if msg.starts_with("missing field") {
        ConfigErrorKind::MissingKey(quoted())
    } else {
        ConfigErrorKind::Syntax(msg)
    };
    ConfigError { line, kind }
}

/// Parse and validate a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let document: ConfigDocument = toml::from_str(text).map_err(|e| classify(e, text))?;
    resolve(document, text)
}

fn resolve(doc: ConfigDocument, text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cx = Ctx { text };
    let m = &doc.model;
    let model = HamiltonianModel {
        chi: mhz_to_angular(cx.finite("model", "chi_mhz", m.chi_mhz)?),
        kerr: mhz_to_angular(cx.finite("model", "kerr_mhz", m.kerr_mhz)?),
        anharmonicity: mhz_to_angular(cx.finite("model", "anharmonicity_mhz", m.anharmonicity_mhz)?),
        chi_prime: mhz_to_angular(cx.finite("model", "chi_prime_mhz", m.chi_prime_mhz)?),
        t1_transmon: 1e3 * cx.positive("model", "t1_transmon_us", m.t1_transmon_us)?,
        tphi_transmon: 1e3 * cx.positive("model", "tphi_transmon_us", m.tphi_transmon_us)?,
        t1_oscillator: 1e3 * cx.positive("model", "t1_oscillator_us", m.t1_oscillator_us)?,
        omega_t: mhz_to_angular(cx.finite("model", "omega_t_mhz", m.omega_t_mhz)?),
        omega_c: mhz_to_angular(cx.finite("model", "omega_c_mhz", m.omega_c_mhz)?),
    };

    let target = match &doc.target {
        Some(t) if *t != TargetSection::default() => t,
        _ => {
            return Err(ConfigError {
                line: locate(text, "target", ""),
                kind: ConfigErrorKind::MissingTarget,
            })
        }
    };
    let kind = target.kind.as_deref().ok_or_else(|| cx.missing("target", "kind"))?;
    let operation = match kind {
        "gate" => {
            let name = target.gate.as_deref().ok_or_else(|| cx.missing("target", "gate"))?;
            Operation::Gate(
                name.parse()
                    .map_err(|_| cx.invalid("target", "gate", format!("unknown gate {name:?}")))?,
            )
        }
        "fock" => Operation::Fock(target.n.ok_or_else(|| cx.missing("target", "n"))?),
        "encode" => Operation::Encode,
        "decode" => Operation::Decode,
        "parity" => {
            let n_max = target.n_max.ok_or_else(|| cx.missing("target", "n_max"))?;
            if n_max == 0 {
                return Err(cx.invalid("target", "n_max", "must be ≥ 1"));
            }
            Operation::Parity { n_max }
        }
        "kerr_correct" => {
            let dt = target.delta_t_ns.ok_or_else(|| cx.missing("target", "delta_t_ns"))?;
            Operation::KerrCorrection {
                delta_t: cx.non_negative("target", "delta_t_ns", dt)?,
            }
        }
        other => return Err(cx.invalid("target", "kind", format!("unknown target kind {other:?}"))),
    };
    let alpha = cr(cx.positive("target", "alpha", target.alpha.unwrap_or(3f64.sqrt()))?);

    let pulse = doc.pulse.as_ref().ok_or_else(|| ConfigError {
        line: None,
        kind: ConfigErrorKind::MissingKey("pulse".into()),
    })?;
    if pulse.steps == 0 {
        return Err(cx.invalid("pulse", "steps", "must be ≥ 1"));
    }
    let dt = cx.positive("pulse", "dt_ns", pulse.dt_ns)?;
    let seed_amplitude = cx.non_negative("pulse", "seed_amplitude", pulse.seed_amplitude)?;

    let band = BandLimit {
        omega_min: [
            mhz_to_angular(cx.finite("band", "oscillator_mhz", doc.band.oscillator_mhz[0])?),
            mhz_to_angular(cx.finite("band", "transmon_mhz", doc.band.transmon_mhz[0])?),
        ],
        omega_max: [
            mhz_to_angular(cx.finite("band", "oscillator_mhz", doc.band.oscillator_mhz[1])?),
            mhz_to_angular(cx.finite("band", "transmon_mhz", doc.band.transmon_mhz[1])?),
        ],
    };
    for (i, key) in ["oscillator_mhz", "transmon_mhz"].iter().enumerate() {
        if band.omega_min[i] > band.omega_max[i] {
            return Err(cx.invalid("band", key, "lower edge above upper edge"));
        }
    }
    band.validate(dt).map_err(|e| cx.invalid("band", "", e.to_string()))?;

    let p = &doc.penalties;
    let weights = PenaltyWeights {
        lambda_amplitude: cx.non_negative("penalties", "lambda_amplitude", p.lambda_amplitude)?,
        lambda_derivative: cx.non_negative("penalties", "lambda_derivative", p.lambda_derivative)?,
        lambda_discrepancy: cx.non_negative("penalties", "lambda_discrepancy", p.lambda_discrepancy)?,
        epsilon_max: mhz_to_angular(cx.positive("penalties", "epsilon_max_mhz", p.epsilon_max_mhz)?),
    };

    let tr = &doc.truncation;
    let base = HilbertDims::new(tr.n_osc, tr.n_trans).map_err(|e| cx.invalid("truncation", "n_osc", e.to_string()))?;
    if tr.pads.is_empty() {
        return Err(cx.invalid("truncation", "pads", "need at least one truncation"));
    }
    let mut sorted = tr.pads.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != tr.pads.len() {
        return Err(cx.invalid("truncation", "pads", "duplicate entries"));
    }
    if let Operation::Fock(n) = operation {
        if n >= tr.n_osc {
            return Err(cx.invalid("target", "n", format!("Fock level {n} needs n_osc > {n}")));
        }
    }

    let o = &doc.optimizer;
    let goal = o.fidelity_goal;
    if !(goal.is_finite() && (0.0..=1.0).contains(&goal)) {
        return Err(cx.invalid("optimizer", "fidelity_goal", format!("must lie in [0, 1], got {goal}")));
    }
    if o.memory == 0 {
        return Err(cx.invalid("optimizer", "memory", "must be ≥ 1"));
    }
    let optimizer = OptimizerConfig {
        max_iter: o.max_iter,
        grad_tol: cx.non_negative("optimizer", "grad_tol", o.grad_tol)?,
        fidelity_goal: goal,
        memory: o.memory,
        seed: doc.seed,
    };

    if doc.simulation.substeps == 0 {
        return Err(cx.invalid("simulation", "substeps", "must be ≥ 1"));
    }
    let decoherence = if doc.simulation.decoherence {
        DecoherenceSpec::from_model(&model)
    } else {
        DecoherenceSpec::none()
    };

    let wigner = match &doc.wigner {
        None => None,
        Some(w) => {
            let extent = cx.positive("wigner", "extent", w.extent)?;
            if w.points < 2 {
                return Err(cx.invalid("wigner", "points", "need at least 2 points per axis"));
            }
            if w.reconstruct_n_max == Some(0) {
                return Err(cx.invalid("wigner", "reconstruct_n_max", "must be ≥ 1"));
            }
            Some(WignerSettings {
                extent,
                points: w.points,
                reconstruct_n_max: w.reconstruct_n_max,
            })
        }
    };

    let rb = match &doc.rb {
        None => None,
        Some(r) => {
            let mode = match r.mode.as_str() {
                "lindblad" => RbMode::Lindblad,
                "ptm" => RbMode::Ptm,
                "depolarizing" => RbMode::Depolarizing,
                other => return Err(cx.invalid("rb", "mode", format!("unknown mode {other:?}"))),
            };
            if r.lengths.is_empty() || r.lengths.contains(&0) {
                return Err(cx.invalid("rb", "lengths", "need lengths ≥ 1"));
            }
            if r.sequences == 0 {
                return Err(cx.invalid("rb", "sequences", "must be ≥ 1"));
            }
            if r.shots == Some(0) {
                return Err(cx.invalid("rb", "shots", "must be ≥ 1"));
            }
            let p = r.depolarizing_p.unwrap_or(0.0);
            if !(0.0..=4.0 / 3.0).contains(&p) {
                return Err(cx.invalid("rb", "depolarizing_p", format!("must lie in [0, 4/3], got {p}")));
            }
            if mode == RbMode::Depolarizing && r.depolarizing_p.is_none() {
                return Err(cx.missing("rb", "depolarizing_p"));
            }
            let interleave = match &r.interleave {
                None => None,
                Some(name) => Some(
                    name.parse::<Gate>()
                        .map_err(|_| cx.invalid("rb", "interleave", format!("unknown gate {name:?}")))?,
                ),
            };
            Some(RbSettings {
                mode,
                lengths: r.lengths.clone(),
                sequences: r.sequences,
                shots: r.shots,
                waveform_dir: r.waveform_dir.as_ref().map(PathBuf::from),
                depolarizing_p: p,
                interleave,
            })
        }
    };

    let correction = (
        cx.finite("correction", "b_ns", doc.correction.b_ns)?,
        cx.non_negative("correction", "tau_ns", doc.correction.tau_ns)?,
    );

    let problem = ProblemSpec {
        model,
        base,
        pads: tr.pads.clone(),
        weights,
        band,
        steps: pulse.steps,
        dt,
        seed_amplitude,
    };
    Ok(ExperimentConfig {
        seed: doc.seed,
        output_dir: PathBuf::from(&doc.output_dir),
        substeps: doc.simulation.substeps,
        model,
        operation,
        alpha,
        problem,
        optimizer,
        decoherence,
        wigner,
        rb,
        correction,
        document: doc,
    })
}
