// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Subcommand orchestration: synthesize, verify, report.
//!
//! Every output file is written to a temporary file in the output directory
//! and renamed into place, so a failed run never leaves a partial file.
//! Outputs contain no timestamps or timings; identical configurations and
//! seeds give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmarking::{
    fit_decay, irb_error, rb_error, run_rb, run_rb_lindblad, DecayFit, GateChannelSet, LindbladGateSet, RbResult,
};
use crate::catcode::{mat2_identity, Gate, LogicalBasis, Mat2, Operation};
use crate::cli::config::{ExperimentConfig, RbMode};
use crate::cli::correction::dispersion_correction;
use crate::cli::waveform_file::WaveformFile;
use crate::dynamics::{ControlSystem, ControlWaveform};
use crate::grape::{optimize, OptimizationProblem, OptimizationResult};
use crate::lindblad::{simulated_gate_fidelity, DensityMatrix, GateFidelity, LogicalPair, PulseChannel};
use crate::operators::angular_to_mhz;
use crate::tomography::{
    projector, reconstruct_from_wigner, reduce_to_oscillator, square_grid, state_fidelity, wigner,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synthesize,
    Simulate,
    Wigner,
    Ptomo,
    Rb,
    Correct,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synthesize => "synthesize",
            Command::Simulate => "simulate",
            Command::Wigner => "wigner",
            Command::Ptomo => "ptomo",
            Command::Rb => "rb",
            Command::Correct => "correct",
        }
    }

    fn needs_waveform(self) -> bool {
        matches!(
            self,
            Command::Simulate | Command::Wigner | Command::Ptomo | Command::Correct
        )
    }
}

/// How a run ended, mapped to the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Finished, and any fidelity goal was met.
    Success,
    /// Finished, but the closed-system fidelity stayed below the goal.
    BelowGoal,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::BelowGoal => 2,
        }
    }
}

pub const EXIT_ERROR: i32 = 1;

pub const WAVEFORM_FILE: &str = "waveform.wf";
pub const REPORT_FILE: &str = "report.txt";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const WIGNER_FILE: &str = "wigner.txt";
pub const PTM_FILE: &str = "ptm.txt";
pub const RB_FILE: &str = "rb.txt";
pub const CORRECTED_FILE: &str = "corrected.wf";
pub const PULSE_DIR: &str = "pulses";

/// Published figures for the reference device, `(gate, RB %, ΔF_PT %, sim %)`.
const LITERATURE: [(&str, &str, &str, &str); 11] = [
    ("I", "0.46 ± 0.02", "0.51", "0.31"),
    ("X90", "0.79 ± 0.02", "0.57", "0.78"),
    ("-X90", "0.91 ± 0.03", "0.71", "0.83"),
    ("X180", "1.11 ± 0.03", "0.88", "1.09"),
    ("Y90", "0.96 ± 0.03", "0.98", "0.76"),
    ("-Y90", "0.81 ± 0.02", "0.52", "0.75"),
    ("Y180", "1.28 ± 0.03", "0.99", "1.67"),
    ("H", "0.93 ± 0.03", "0.86", "1.00"),
    ("average", "0.90 ± 0.02", "0.75", "0.90"),
    ("enc+dec", "1.70 ± 0.03", "1.39", "1.76"),
    ("T", "-", "0.71", "0.40"),
];

const REPRODUCTION_NOTE: &str = "# Exact reproduction of the literature values is not expected: pulses are \
re-optimized here and differ from the published ones.";

fn literature_block() -> String {
    let mut s = String::from(
        "# literature values (published measurements on the reference device, not computed by this run)\n",
    );
    s.push_str("# gate  1-F_RB(%)  dF_PT(%)  1-F_sim(%)\n");
    for (g, rb, pt, sim) in LITERATURE {
        let _ = writeln!(s, "# {g:<8} {rb:<12} {pt:<6} {sim}");
    }
    s.push_str(REPRODUCTION_NOTE);
    s.push('\n');
    s
}

/// Write `contents` to `path` via a temporary file and an atomic rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| Error::io(format!("creating a temporary file in {}", dir.display()), e))?;
    // Temporary files are created private; results should not be.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(format!("setting permissions on {}", path.display()), e))?;
    }
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(format!("renaming into {}", path.display()), e.error))?;
    Ok(())
}

pub fn read_waveform_file(path: &Path) -> Result<WaveformFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(WaveformFile::read(&text)?)
}

/// Load a waveform and check it against the configured model and length.
pub fn load_waveform(path: &Path, cfg: &ExperimentConfig) -> Result<ControlWaveform> {
    let file = read_waveform_file(path)?;
    if !file.matches_model(&cfg.model) {
        log::warn!(
            "{} was optimized for a different model (hash {})",
            path.display(),
            file.model_sha256
        );
    }
    file.to_waveform()
}

fn short_name(op: &Operation) -> String {
    match op {
        Operation::Gate(g) => g.name().to_string(),
        Operation::Fock(n) => format!("fock{n}"),
        Operation::Encode => "encode".into(),
        Operation::Decode => "decode".into(),
        Operation::Parity { n_max } => format!("parity{n_max}"),
        Operation::KerrCorrection { .. } => "kerr_correct".into(),
    }
}

pub fn synthesize(cfg: &ExperimentConfig) -> Result<OptimizationResult> {
    let problem = OptimizationProblem::for_operation(cfg.problem.clone(), &cfg.operation, cfg.alpha)?;
    log::info!(
        "synthesizing {} over {} steps, {} parameters, truncations {:?}",
        cfg.operation,
        cfg.problem.steps,
        problem.basis().n_params(),
        problem.truncations().iter().map(|d| d.n_osc()).collect::<Vec<_>>()
    );
    let result = optimize(&problem, &cfg.optimizer)?;
    log::info!(
        "{} after {} iterations: fidelities {:?}",
        result.termination,
        result.iterations,
        result.fidelities
    );
    Ok(result)
}

/// Closed- and open-system figures of merit for one waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub truncations: Vec<usize>,
    pub closed_fidelities: Vec<f64>,
    /// Mean `⟨target|ρ(T)|target⟩` over the transfers, with decoherence.
    pub lindblad_transfer_fidelity: f64,
    /// Mean transmon-excited population at the end.
    pub final_transmon_excited: f64,
    /// Present for operations with a logical channel.
    pub logical: Option<GateFidelity>,
}

impl Verification {
    pub fn min_closed_fidelity(&self) -> f64 {
        self.closed_fidelities.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Input pair, output pair and ideal map of a logical operation.
pub fn logical_spec(op: &Operation, basis: &LogicalBasis) -> Result<Option<(LogicalPair, LogicalPair, Mat2)>> {
    let code = LogicalPair::codewords(basis);
    Ok(match op {
        Operation::Gate(g) => Some((code.clone(), code, g.unitary())),
        Operation::Encode => Some((LogicalPair::transmon(basis.dims())?, code, mat2_identity())),
        Operation::Decode => Some((code, LogicalPair::transmon(basis.dims())?, mat2_identity())),
        _ => None,
    })
}

pub fn pulse_channel(cfg: &ExperimentConfig, waveform: &ControlWaveform) -> Result<PulseChannel> {
    let system = ControlSystem::new(cfg.model, cfg.problem.base)?;
    PulseChannel::new(system, waveform.clone(), &cfg.decoherence, cfg.substeps)
}

pub fn verify(cfg: &ExperimentConfig, waveform: &ControlWaveform) -> Result<Verification> {
    let problem = OptimizationProblem::for_operation(cfg.problem.clone(), &cfg.operation, cfg.alpha)?;
    if waveform.steps() != cfg.problem.steps || waveform.dt() != cfg.problem.dt {
        log::warn!(
            "waveform has {} steps of {} ns; config expects {} of {} ns",
            waveform.steps(),
            waveform.dt(),
            cfg.problem.steps,
            cfg.problem.dt
        );
    }
    let closed_fidelities = problem.fidelities(waveform)?;
    let base = cfg.problem.base;
    let channel = pulse_channel(cfg, waveform)?;
    let set = cfg.operation.transfer_set(&cfg.model, base, cfg.alpha)?;
    let mut fid = 0.0;
    let mut excited = 0.0;
    for t in set.transfers() {
        let out = channel.evolve(&DensityMatrix::from_pure(&t.initial, base)?)?;
        fid += out.expectation(&t.target);
        excited += out.transmon_excited_population();
    }
    let m = set.len() as f64;
    let is_logical = matches!(
        cfg.operation,
        Operation::Gate(_) | Operation::Encode | Operation::Decode
    );
    let logical = if is_logical && base.n_trans() >= 2 {
        match logical_spec(&cfg.operation, &LogicalBasis::new(cfg.alpha, base)?)? {
            Some((input, output, ideal)) => Some(simulated_gate_fidelity(&channel, &input, &output, &ideal)?),
            None => None,
        }
    } else {
        None
    };
    Ok(Verification {
        truncations: problem.truncations().iter().map(|d| d.n_osc()).collect(),
        closed_fidelities,
        lindblad_transfer_fidelity: fid / m,
        final_transmon_excited: excited / m,
        logical,
    })
}

fn report(
    cfg: &ExperimentConfig,
    command: Command,
    waveform: &ControlWaveform,
    v: &Verification,
    opt: Option<&OptimizationResult>,
) -> String {
    let mut s = String::from("# catgrape report\n");
    let _ = writeln!(s, "command {}", command.name());
    let _ = writeln!(s, "target {}", cfg.operation);
    let _ = writeln!(s, "seed {}", cfg.seed);
    let _ = writeln!(s, "steps {}", waveform.steps());
    let _ = writeln!(s, "dt_ns {:.6}", waveform.dt());
    let _ = writeln!(s, "duration_ns {:.6}", waveform.duration());
    let _ = writeln!(s, "peak_amplitude_mhz {:.6}", angular_to_mhz(waveform.peak_amplitude()));
    if let Some(r) = opt {
        let _ = writeln!(s, "termination {}", r.termination);
        let _ = writeln!(s, "iterations {}", r.iterations);
        let _ = writeln!(s, "evaluations {}", r.evaluations);
        let _ = writeln!(s, "cost {:.12}", r.cost);
        let _ = writeln!(
            s,
            "penalties amplitude {:.6e} derivative {:.6e} discrepancy {:.6e}",
            r.penalties.amplitude, r.penalties.derivative, r.penalties.discrepancy
        );
    }
    for (n, f) in v.truncations.iter().zip(&v.closed_fidelities) {
        let _ = writeln!(s, "closed_system_fidelity n_osc={n} {f:.12}");
    }
    let spread = v.closed_fidelities.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.min_closed_fidelity();
    let _ = writeln!(s, "truncation_discrepancy {spread:.6e}");
    let decoherence = if cfg.decoherence.is_zero() { "off" } else { "on" };
    let _ = writeln!(s, "decoherence {decoherence}");
    let _ = writeln!(s, "lindblad_transfer_fidelity {:.12}", v.lindblad_transfer_fidelity);
    let _ = writeln!(s, "final_transmon_excited {:.6e}", v.final_transmon_excited);
    if let Some(g) = &v.logical {
        let _ = writeln!(s, "lindblad_average_fidelity {:.12}", g.average_fidelity);
        let _ = writeln!(s, "lindblad_infidelity_percent {:.6}", 100.0 * g.infidelity());
        let _ = writeln!(s, "lindblad_leakage {:.6e}", g.leakage);
    }
    let goal = cfg.optimizer.fidelity_goal;
    let met = if v.min_closed_fidelity() >= goal {
        "met"
    } else {
        "not met"
    };
    let _ = writeln!(s, "fidelity_goal {goal} {met}");
    s.push_str(&literature_block());
    s
}

fn outcome(cfg: &ExperimentConfig, v: &Verification) -> Outcome {
    if v.min_closed_fidelity() >= cfg.optimizer.fidelity_goal {
        Outcome::Success
    } else {
        Outcome::BelowGoal
    }
}

/// Run one subcommand, writing its outputs under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, command: Command, waveform_path: Option<&Path>) -> Result<Outcome> {
    let out = &cfg.output_dir;
    let loaded = match (command.needs_waveform(), waveform_path) {
        (true, Some(p)) => Some(load_waveform(p, cfg)?),
        (true, None) => {
            return Err(Error::InvalidParameter(format!("{} needs --waveform", command.name())));
        }
        (false, _) => None,
    };
    atomic_write(&out.join(CONFIG_ECHO_FILE), &cfg.to_toml())?;

    match command {
        Command::Synthesize => {
            let result = synthesize(cfg)?;
            let file = WaveformFile::from_waveform(&result.waveform, &cfg.model)?;
            // Everything downstream sees the waveform exactly as stored.
            let waveform = file.to_waveform()?;
            atomic_write(&out.join(WAVEFORM_FILE), &file.write())?;
            let v = verify(cfg, &waveform)?;
            atomic_write(
                &out.join(REPORT_FILE),
                &report(cfg, command, &waveform, &v, Some(&result)),
            )?;
            if cfg.wigner.is_some() {
                atomic_write(&out.join(WIGNER_FILE), &wigner_report(cfg, &waveform)?)?;
            }
            if cfg.rb.is_some() {
                atomic_write(&out.join(RB_FILE), &rb_report(cfg)?)?;
            }
            Ok(outcome(cfg, &v))
        }
        Command::Simulate => {
            let waveform = loaded.expect("checked above");
            let v = verify(cfg, &waveform)?;
            atomic_write(&out.join(REPORT_FILE), &report(cfg, command, &waveform, &v, None))?;
            Ok(outcome(cfg, &v))
        }
        Command::Wigner => {
            let waveform = loaded.expect("checked above");
            atomic_write(&out.join(WIGNER_FILE), &wigner_report(cfg, &waveform)?)?;
            Ok(Outcome::Success)
        }
        Command::Ptomo => {
            let waveform = loaded.expect("checked above");
            atomic_write(&out.join(PTM_FILE), &ptm_report(cfg, &waveform)?)?;
            Ok(Outcome::Success)
        }
        Command::Rb => {
            atomic_write(&out.join(RB_FILE), &rb_report(cfg)?)?;
            Ok(Outcome::Success)
        }
        Command::Correct => {
            let waveform = loaded.expect("checked above");
            let (b, tau) = cfg.correction;
            let corrected = dispersion_correction(&waveform, b, tau)?;
            let file = WaveformFile::from_waveform(&corrected, &cfg.model)?;
            atomic_write(&out.join(CORRECTED_FILE), &file.write())?;
            Ok(Outcome::Success)
        }
    }
}

/// Wigner function of the oscillator after the pulse acts on the first
/// transfer's initial state, with decoherence.
fn wigner_report(cfg: &ExperimentConfig, waveform: &ControlWaveform) -> Result<String> {
    let settings = cfg
        .wigner
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("the [wigner] section is required".into()))?;
    let base = cfg.problem.base;
    let set = cfg.operation.transfer_set(&cfg.model, base, cfg.alpha)?;
    let first = &set.transfers()[0];
    let channel = pulse_channel(cfg, waveform)?;
    let rho = channel.evolve(&DensityMatrix::from_pure(&first.initial, base)?)?;
    let osc = reduce_to_oscillator(rho.matrix(), base)?;
    let target = reduce_to_oscillator(&projector(&first.target), base)?;
    let grid = wigner(&osc, &square_grid(settings.extent, settings.points))?;

    let mut s = String::from("# catgrape wigner\n");
    let _ = writeln!(s, "# target {}", cfg.operation);
    let _ = writeln!(s, "# extent {:.6} points {}", settings.extent, settings.points);
    let _ = writeln!(s, "# fidelity_to_target {:.12}", state_fidelity(&osc, &target));
    if grid.any_flagged() {
        let n = grid.flagged.iter().filter(|&&f| f).count();
        let _ = writeln!(s, "# truncation_flagged_points {n}");
        log::warn!("{n} Wigner points exceed the working truncation");
    }
    if let Some(n_max) = settings.reconstruct_n_max {
        let rec = reconstruct_from_wigner(&grid, n_max)?;
        let sim = truncate_density(&osc, n_max);
        let _ = writeln!(s, "# reconstruction_n_max {n_max}");
        let _ = writeln!(s, "# reconstruction_fidelity {:.12}", state_fidelity(&rec, &sim));
    }
    s.push_str(&grid.to_table());
    Ok(s)
}

fn truncate_density(rho: &crate::linalg::CMat, n: usize) -> crate::linalg::CMat {
    let n = n.min(rho.nrows());
    let mut out = crate::linalg::CMat::from_fn(n, n, |i, j| rho[(i, j)]);
    let t = crate::linalg::trace(out.as_ref()).re;
    if t > 0.0 {
        out = crate::linalg::scaled(out.as_ref(), crate::linalg::cr(1.0 / t));
    }
    out
}

fn ptm_report(cfg: &ExperimentConfig, waveform: &ControlWaveform) -> Result<String> {
    let base = cfg.problem.base;
    let (input, output, ideal) =
        logical_spec(&cfg.operation, &LogicalBasis::new(cfg.alpha, base)?)?.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "process tomography needs a logical operation, not {}",
                cfg.operation
            ))
        })?;
    let channel = pulse_channel(cfg, waveform)?;
    let g = simulated_gate_fidelity(&channel, &input, &output, &ideal)?;
    let mut s = String::from("# catgrape ptm\n");
    let _ = writeln!(s, "# target {}", cfg.operation);
    let _ = writeln!(s, "# average_fidelity {:.12}", g.average_fidelity);
    let _ = writeln!(s, "# leakage {:.6e}", g.leakage);
    s.push_str(&g.ptm.to_table());
    s.push_str(&literature_block());
    Ok(s)
}

/// The eight RB gates plus encode and decode.
pub fn gate_set_operations() -> Vec<Operation> {
    Gate::RB_SET
        .iter()
        .map(|&g| Operation::Gate(g))
        .chain([Operation::Encode, Operation::Decode])
        .collect()
}

/// Pulses for the RB gate set, read from `dir/<name>.wf`. Missing or stale
/// files (different model, length or step) are synthesized with the
/// configuration's settings when `synthesize_missing` is set, and written
/// back; otherwise they are an error.
pub fn gate_set_pulses(
    cfg: &ExperimentConfig,
    dir: &Path,
    synthesize_missing: bool,
) -> Result<BTreeMap<String, ControlWaveform>> {
    let mut out = BTreeMap::new();
    for op in gate_set_operations() {
        let name = short_name(&op);
        let path = dir.join(format!("{name}.wf"));
        let cached = match read_waveform_file(&path) {
            Ok(f)
                if f.matches_model(&cfg.model) && f.steps() == cfg.problem.steps && f.dt.to_f64() == cfg.problem.dt =>
            {
                Some(f.to_waveform()?)
            }
            Ok(_) => {
                log::info!("{} does not match the configuration", path.display());
                None
            }
            Err(Error::Io { .. }) => None,
            Err(e) => return Err(e),
        };
        let waveform = match cached {
            Some(w) => w,
            None if synthesize_missing => {
                let sub = cfg.with_operation(op);
                let result = synthesize(&sub)?;
                if !result.goal_met(sub.optimizer.fidelity_goal) {
                    log::warn!("{name}: fidelity goal not reached ({:?})", result.fidelities);
                }
                let file = WaveformFile::from_waveform(&result.waveform, &cfg.model)?;
                atomic_write(&path, &file.write())?;
                file.to_waveform()?
            }
            None => {
                return Err(Error::InvalidParameter(format!(
                    "no usable pulse at {}",
                    path.display()
                )));
            }
        };
        out.insert(name, waveform);
    }
    Ok(out)
}

pub fn lindblad_gate_set(
    cfg: &ExperimentConfig,
    pulses: &BTreeMap<String, ControlWaveform>,
) -> Result<LindbladGateSet> {
    let get = |name: &str| {
        pulses
            .get(name)
            .ok_or_else(|| Error::InvalidParameter(format!("pulse {name} missing")))
            .and_then(|w| pulse_channel(cfg, w))
    };
    let mut gates = BTreeMap::new();
    for g in Gate::RB_SET {
        gates.insert(g, get(g.name())?);
    }
    Ok(LindbladGateSet {
        gates,
        encode: get("encode")?,
        decode: get("decode")?,
    })
}

/// Logical PTMs of the RB gates under decoherence.
pub fn ptm_gate_set(
    cfg: &ExperimentConfig,
    pulses: &BTreeMap<String, ControlWaveform>,
) -> Result<(GateChannelSet, BTreeMap<Gate, GateFidelity>)> {
    let basis = LogicalBasis::new(cfg.alpha, cfg.problem.base)?;
    let code = LogicalPair::codewords(&basis);
    let mut channels = BTreeMap::new();
    let mut fids = BTreeMap::new();
    for g in Gate::RB_SET {
        let w = pulses
            .get(g.name())
            .ok_or_else(|| Error::InvalidParameter(format!("pulse {g} missing")))?;
        let f = simulated_gate_fidelity(&pulse_channel(cfg, w)?, &code, &code, &g.unitary())?;
        // RB composes trace-preserving channels; renormalize leakage away.
        let mut m = f.ptm.0;
        let t = m[0][0];
        if t > 0.0 {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v /= t;
                }
            }
        }
        m[0] = [1.0, 0.0, 0.0, 0.0];
        channels.insert(g, crate::tomography::PauliTransferMatrix(m));
        fids.insert(g, f);
    }
    Ok((GateChannelSet::new(channels)?, fids))
}

/// Outcome of a reference RB run and an optional interleaved one.
#[derive(Debug, Clone)]
pub struct RbOutcome {
    pub reference: RbResult,
    pub reference_fit: DecayFit,
    pub interleaved: Option<(Gate, RbResult, DecayFit)>,
}

impl RbOutcome {
    pub fn average_error(&self) -> Result<f64> {
        rb_error(self.reference_fit.tau)
    }
}

pub fn run_rb_experiment(cfg: &ExperimentConfig) -> Result<RbOutcome> {
    let settings = cfg
        .rb
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("the [rb] section is required".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pulse_dir = || {
        settings
            .waveform_dir
            .clone()
            .unwrap_or_else(|| cfg.output_dir.join(PULSE_DIR))
    };
    let run = |interleave: Option<Gate>, rng: &mut ChaCha8Rng| -> Result<RbResult> {
        match settings.mode {
            RbMode::Depolarizing => run_rb(
                &GateChannelSet::depolarizing(settings.depolarizing_p),
                &settings.lengths,
                settings.shots.unwrap_or(2000),
                interleave,
                rng,
            ),
            RbMode::Ptm => {
                let pulses = gate_set_pulses(cfg, &pulse_dir(), settings.waveform_dir.is_none())?;
                let (set, _) = ptm_gate_set(cfg, &pulses)?;
                run_rb(&set, &settings.lengths, settings.shots.unwrap_or(2000), interleave, rng)
            }
            RbMode::Lindblad => {
                let pulses = gate_set_pulses(cfg, &pulse_dir(), settings.waveform_dir.is_none())?;
                let set = lindblad_gate_set(cfg, &pulses)?;
                run_rb_lindblad(
                    &set,
                    &settings.lengths,
                    settings.sequences,
                    settings.shots,
                    interleave,
                    rng,
                )
            }
        }
    };
    let reference = run(None, &mut rng)?;
    let reference_fit = fit_decay(&reference)?;
    let interleaved = match settings.interleave {
        None => None,
        Some(g) => {
            let r = run(Some(g), &mut rng)?;
            let f = fit_decay(&r)?;
            Some((g, r, f))
        }
    };
    Ok(RbOutcome {
        reference,
        reference_fit,
        interleaved,
    })
}

fn rb_report(cfg: &ExperimentConfig) -> Result<String> {
    let o = run_rb_experiment(cfg)?;
    let settings = cfg.rb.as_ref().expect("run_rb_experiment checked");
    let mut s = String::from("# catgrape rb\n");
    let mode = match settings.mode {
        RbMode::Lindblad => "lindblad",
        RbMode::Ptm => "ptm",
        RbMode::Depolarizing => "depolarizing",
    };
    let _ = writeln!(s, "# mode {mode}");
    let _ = writeln!(s, "# seed {}", cfg.seed);
    s.push_str("# reference\n");
    s.push_str(&o.reference.to_table());
    s.push_str(&o.reference_fit.summary());
    let _ = writeln!(s, "# average_gate_error {:.9e}", o.average_error()?);
    if let Some((g, r, f)) = &o.interleaved {
        let _ = writeln!(s, "# interleaved {g}");
        s.push_str(&r.to_table());
        s.push_str(&f.summary());
        let _ = writeln!(s, "# gate_error {g} {:.9e}", irb_error(f.tau, o.reference_fit.tau)?);
    }
    s.push_str(&literature_block());
    Ok(s)
}
