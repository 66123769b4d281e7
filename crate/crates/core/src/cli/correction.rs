// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Linear dispersion and delay pre-correction of drive waveforms.
//!
//! Each drive's envelope is transformed bin by bin as
//! `ε̃(ω) → (1 + b ω e^{iωτ}) ε̃(ω)` and brought back to the time domain.
//! The correction is first order in `b`: applying it with `b` and then with
//! `−b` leaves a residual factor `1 − b²ω²e^{2iωτ}`, so the round trip is
//! off by O(b²), not exact.

use rustfft::FftPlanner;

use crate::dynamics::ControlWaveform;
use crate::grape::{bin_frequency, spectrum};
use crate::linalg::c64;
use crate::Result;

/// Multiplier applied to a component at angular frequency `omega` (rad/ns).
pub fn correction_factor(omega: f64, b: f64, tau: f64) -> c64 {
    c64::new(1.0, 0.0) + b * omega * c64::from_polar(1.0, omega * tau)
}

/// Apply the correction with weighting `b` (ns) and delay `tau` (ns) to
/// both drives.
pub fn dispersion_correction(waveform: &ControlWaveform, b: f64, tau: f64) -> Result<ControlWaveform> {
    let n = waveform.steps();
    let dt = waveform.dt();
    let mut planner = FftPlanner::<f64>::new();
    let inverse = planner.plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut drives = spectrum(waveform);
    for d in drives.iter_mut() {
        for (j, z) in d.iter_mut().enumerate() {
            *z *= correction_factor(bin_frequency(j, n, dt), b, tau) * scale;
        }
        inverse.process(d);
    }
    let [osc, tr] = drives;
    let samples = (0..n).map(|k| [osc[k].re, osc[k].im, tr[k].re, tr[k].im]).collect();
    ControlWaveform::new(dt, samples)
}

/// Single-tone envelope `amp·e^{iωt}` on both drives, sampled at step starts.
pub fn tone(steps: usize, dt: f64, omega: f64, amp: f64) -> Result<ControlWaveform> {
    let samples = (0..steps)
        .map(|k| {
            let z = c64::from_polar(amp, omega * k as f64 * dt);
            [z.re, z.im, z.re, z.im]
        })
        .collect();
    ControlWaveform::new(dt, samples)
}
