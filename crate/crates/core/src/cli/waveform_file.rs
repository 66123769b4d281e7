// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Plain-text waveform files.
//!
//! ```text
//! # catgrape waveform
//! version 1
//! dt_ns 2.000000000
//! steps 550
//! omega_t_mhz 5664.000000000
//! omega_c_mhz 4452.600000000
//! model_sha256 3f1c...
//! # t_ns re_eps_t im_eps_t re_eps_c im_eps_c
//! 0.000000000 0.001234567 -0.000400000 0.010000000 0.000000000
//! ...
//! ```
//!
//! Amplitudes are in rad/ns. Every number is fixed point with exactly nine
//! decimals and is held internally as an integer count of 1e-9 units, so
//! writing and reading a file are both exact. Blank lines and lines
//! starting with `#` are ignored. Each row's time must equal `k * dt_ns`.

use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};

use crate::dynamics::ControlWaveform;
use crate::operators::{angular_to_mhz, HamiltonianModel};

pub const FORMAT_VERSION: u32 = 1;
const SCALE: i64 = 1_000_000_000;
/// Largest magnitude a fixed-point field may hold (1e6), small enough that
/// every value converts to `f64` and back unchanged.
const MAX_UNITS: i64 = 1_000_000 * SCALE;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct WaveformFileError {
    pub line: Option<usize>,
    pub kind: WaveformErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WaveformErrorKind {
    MissingField(&'static str),
    DuplicateField(String),
    UnknownField(String),
    UnsupportedVersion(String),
    BadNumber(String),
    BadRow(String),
    TimeMismatch { expected: String, found: String },
    RowCount { expected: usize, found: usize },
    InvalidHeader(String),
}

impl fmt::Display for WaveformFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "waveform line {l}: ")?;
        } else {
            f.write_str("waveform: ")?;
        }
        match &self.kind {
            WaveformErrorKind::MissingField(k) => write!(f, "missing header field {k}"),
            WaveformErrorKind::DuplicateField(k) => write!(f, "duplicate header field {k}"),
            WaveformErrorKind::UnknownField(k) => write!(f, "unknown header field {k}"),
            WaveformErrorKind::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            WaveformErrorKind::BadNumber(s) => write!(f, "not a fixed-point number: {s:?}"),
            WaveformErrorKind::BadRow(m) => write!(f, "malformed row: {m}"),
            WaveformErrorKind::TimeMismatch { expected, found } => {
                write!(f, "row time {found} does not match expected {expected}")
            }
            WaveformErrorKind::RowCount { expected, found } => {
                write!(f, "expected {expected} rows, found {found}")
            }
            WaveformErrorKind::InvalidHeader(m) => write!(f, "invalid header: {m}"),
        }
    }
}

fn err(line: usize, kind: WaveformErrorKind) -> WaveformFileError {
    WaveformFileError { line: Some(line), kind }
}

/// A real number with nine fixed decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed(i64);

impl Fixed {
    pub fn from_f64(x: f64) -> Option<Self> {
        let units = (x * SCALE as f64).round();
        (units.is_finite() && units.abs() <= MAX_UNITS as f64).then_some(Self(units as i64))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn units(self) -> i64 {
        self.0
    }

    fn parse(s: &str) -> Option<Self> {
        let (neg, body) = match s.as_bytes().first()? {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty()
            || int.len() > 12
            || frac.len() > 9
            || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let int: i64 = int.parse().ok()?;
        let mut f: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        for _ in frac.len()..9 {
            f *= 10;
        }
        let units = int.checked_mul(SCALE)?.checked_add(f)?;
        if units > MAX_UNITS {
            return None;
        }
        Some(Self(if neg { -units } else { units }))
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        let s = SCALE as u64;
        write!(f, "{sign}{}.{:09}", a / s, a % s)
    }
}

/// Round to the file's precision.
pub fn quantize(x: f64) -> f64 {
    Fixed::from_f64(x).map_or(x, Fixed::to_f64)
}

/// SHA-256 over the model parameters, used to tie a pulse to the system it
/// was optimized for.
pub fn model_hash(model: &HamiltonianModel) -> String {
    let canonical = format!(
        "chi={:?};kerr={:?};anharmonicity={:?};chi_prime={:?};t1_transmon={:?};tphi_transmon={:?};t1_oscillator={:?};omega_t={:?};omega_c={:?}",
        model.chi,
        model.kerr,
        model.anharmonicity,
        model.chi_prime,
        model.t1_transmon,
        model.tphi_transmon,
        model.t1_oscillator,
        model.omega_t,
        model.omega_c,
    );
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveformFile {
    pub version: u32,
    pub dt: Fixed,
    pub omega_t_mhz: Fixed,
    pub omega_c_mhz: Fixed,
    pub model_sha256: String,
    /// `[ReεT, ImεT, ReεC, ImεC]` per step, the file's column order.
    pub rows: Vec<[Fixed; 4]>,
}

impl WaveformFile {
    pub fn from_waveform(waveform: &ControlWaveform, model: &HamiltonianModel) -> crate::Result<Self> {
        let fx = |x: f64, what: &str| {
            Fixed::from_f64(x).ok_or_else(|| crate::Error::InvalidParameter(format!("{what} {x} is not representable")))
        };
        let rows = waveform
            .samples()
            .iter()
            .map(|s| {
                Ok([
                    fx(s[2], "amplitude")?,
                    fx(s[3], "amplitude")?,
                    fx(s[0], "amplitude")?,
                    fx(s[1], "amplitude")?,
                ])
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let dt = fx(waveform.dt(), "dt")?;
        if dt.0 <= 0 {
            return Err(crate::Error::InvalidParameter(format!(
                "dt {} rounds to zero",
                waveform.dt()
            )));
        }
        Ok(Self {
            version: FORMAT_VERSION,
            dt,
            omega_t_mhz: fx(angular_to_mhz(model.omega_t), "carrier")?,
            omega_c_mhz: fx(angular_to_mhz(model.omega_c), "carrier")?,
            model_sha256: model_hash(model),
            rows,
        })
    }

    pub fn steps(&self) -> usize {
        self.rows.len()
    }

    pub fn to_waveform(&self) -> crate::Result<ControlWaveform> {
        let samples = self
            .rows
            .iter()
            .map(|r| [r[2].to_f64(), r[3].to_f64(), r[0].to_f64(), r[1].to_f64()])
            .collect();
        ControlWaveform::new(self.dt.to_f64(), samples)
    }

    pub fn matches_model(&self, model: &HamiltonianModel) -> bool {
        self.model_sha256 == model_hash(model)
    }

    pub fn write(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 8));
        let _ = writeln!(s, "# catgrape waveform");
        let _ = writeln!(s, "version {}", self.version);
        let _ = writeln!(s, "dt_ns {}", self.dt);
        let _ = writeln!(s, "steps {}", self.rows.len());
        let _ = writeln!(s, "omega_t_mhz {}", self.omega_t_mhz);
        let _ = writeln!(s, "omega_c_mhz {}", self.omega_c_mhz);
        let _ = writeln!(s, "model_sha256 {}", self.model_sha256);
        let _ = writeln!(s, "# t_ns re_eps_t im_eps_t re_eps_c im_eps_c");
        for (k, r) in self.rows.iter().enumerate() {
            let t = Fixed(self.dt.0 * k as i64);
            let _ = writeln!(s, "{t} {} {} {} {}", r[0], r[1], r[2], r[3]);
        }
        s
    }

    pub fn read(text: &str) -> Result<Self, WaveformFileError> {
        let mut version = None;
        let mut dt = None;
        let mut steps: Option<usize> = None;
        let mut omega_t = None;
        let mut omega_c = None;
        let mut hash: Option<String> = None;
        let mut rows = Vec::new();
        let mut last_line = 0;

        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            last_line = n;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let first = line.split_ascii_whitespace().next().unwrap_or("");
            if first.starts_with(|c: char| c.is_ascii_alphabetic()) {
                if !rows.is_empty() {
                    return Err(err(
                        n,
                        WaveformErrorKind::BadRow(format!("header field {first} after data")),
                    ));
                }
                let mut parts = line.split_ascii_whitespace();
                let key = parts.next().unwrap_or("");
                let value = parts
                    .next()
                    .ok_or_else(|| err(n, WaveformErrorKind::InvalidHeader(format!("{key} has no value"))))?;
                if parts.next().is_some() {
                    return Err(err(
                        n,
                        WaveformErrorKind::InvalidHeader(format!("{key} has extra tokens")),
                    ));
                }
                let number = |v: &str| Fixed::parse(v).ok_or_else(|| err(n, WaveformErrorKind::BadNumber(v.into())));
                let dup = || err(n, WaveformErrorKind::DuplicateField(key.into()));
                match key {
                    "version" => {
                        if version.is_some() {
                            return Err(dup());
                        }
                        match value.parse::<u32>() {
                            Ok(FORMAT_VERSION) => version = Some(FORMAT_VERSION),
                            _ => return Err(err(n, WaveformErrorKind::UnsupportedVersion(value.into()))),
                        }
                    }
                    "dt_ns" => {
                        if dt.is_some() {
                            return Err(dup());
                        }
                        let v = number(value)?;
                        if v.0 <= 0 {
                            return Err(err(n, WaveformErrorKind::InvalidHeader("dt_ns must be > 0".into())));
                        }
                        dt = Some(v);
                    }
                    "steps" => {
                        if steps.is_some() {
                            return Err(dup());
                        }
                        let v: usize = value
                            .parse()
                            .map_err(|_| err(n, WaveformErrorKind::BadNumber(value.into())))?;
                        if v == 0 {
                            return Err(err(n, WaveformErrorKind::InvalidHeader("steps must be ≥ 1".into())));
                        }
                        steps = Some(v);
                    }
                    "omega_t_mhz" => {
                        if omega_t.is_some() {
                            return Err(dup());
                        }
                        omega_t = Some(number(value)?);
                    }
                    "omega_c_mhz" => {
                        if omega_c.is_some() {
                            return Err(dup());
                        }
                        omega_c = Some(number(value)?);
                    }
                    "model_sha256" => {
                        if hash.is_some() {
                            return Err(dup());
                        }
                        if value.len() != 64 || !value.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
                        {
                            return Err(err(
                                n,
                                WaveformErrorKind::InvalidHeader("model_sha256 must be 64 lowercase hex digits".into()),
                            ));
                        }
                        hash = Some(value.to_string());
                    }
                    _ => return Err(err(n, WaveformErrorKind::UnknownField(key.into()))),
                }
                continue;
            }

            let version = version.ok_or_else(|| err(n, WaveformErrorKind::MissingField("version")))?;
            debug_assert_eq!(version, FORMAT_VERSION);
            let dt = dt.ok_or_else(|| err(n, WaveformErrorKind::MissingField("dt_ns")))?;
            let expected = steps.ok_or_else(|| err(n, WaveformErrorKind::MissingField("steps")))?;
            let fields: Vec<&str> = line.split_ascii_whitespace().collect();
            if fields.len() != 5 {
                return Err(err(
                    n,
                    WaveformErrorKind::BadRow(format!("expected 5 columns, found {}", fields.len())),
                ));
            }
            if rows.len() >= expected {
                return Err(err(
                    n,
                    WaveformErrorKind::RowCount {
                        expected,
                        found: rows.len() + 1,
                    },
                ));
            }
            let mut vals = [Fixed(0); 5];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = Fixed::parse(f).ok_or_else(|| err(n, WaveformErrorKind::BadNumber((*f).into())))?;
            }
            let t =
                dt.0.checked_mul(rows.len() as i64)
                    .filter(|&t| t <= MAX_UNITS)
                    .map(Fixed)
                    .ok_or_else(|| err(n, WaveformErrorKind::InvalidHeader("duration overflows".into())))?;
            if vals[0] != t {
                return Err(err(
                    n,
                    WaveformErrorKind::TimeMismatch {
                        expected: t.to_string(),
                        found: fields[0].into(),
                    },
                ));
            }
            rows.push([vals[1], vals[2], vals[3], vals[4]]);
        }

        let at_end = |kind| WaveformFileError {
            line: Some(last_line.max(1)),
            kind,
        };
        let version = version.ok_or_else(|| at_end(WaveformErrorKind::MissingField("version")))?;
        let dt = dt.ok_or_else(|| at_end(WaveformErrorKind::MissingField("dt_ns")))?;
        let expected = steps.ok_or_else(|| at_end(WaveformErrorKind::MissingField("steps")))?;
        let omega_t_mhz = omega_t.ok_or_else(|| at_end(WaveformErrorKind::MissingField("omega_t_mhz")))?;
        let omega_c_mhz = omega_c.ok_or_else(|| at_end(WaveformErrorKind::MissingField("omega_c_mhz")))?;
        let model_sha256 = hash.ok_or_else(|| at_end(WaveformErrorKind::MissingField("model_sha256")))?;
        if rows.len() != expected {
            return Err(at_end(WaveformErrorKind::RowCount {
                expected,
                found: rows.len(),
            }));
        }
        Ok(Self {
            version,
            dt,
            omega_t_mhz,
            omega_c_mhz,
            model_sha256,
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_waveform() -> ControlWaveform {
        let samples = (0..25)
            .map(|k| {
                let t = k as f64;
                [0.01 * (0.3 * t).sin(), -0.004 * t.cos(), 0.02 / (1.0 + t), 1e-10 * t]
            })
            .collect();
        ControlWaveform::new(2.0, samples).unwrap()
    }

    #[test]
    fn fixed_formatting() {
        assert_eq!(Fixed(0).to_string(), "0.000000000");
        assert_eq!(Fixed(-1).to_string(), "-0.000000001");
        assert_eq!(Fixed(1_500_000_000).to_string(), "1.500000000");
        assert_eq!(Fixed::parse("-0.5"), Some(Fixed(-500_000_000)));
        assert_eq!(Fixed::parse("+3"), Some(Fixed(3 * SCALE)));
        for bad in ["", "-", ".5", "1.0000000001", "1e3", "nan", "1.2.3", "--1", "0x10"] {
            assert_eq!(Fixed::parse(bad), None, "{bad}");
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = HamiltonianModel::reference();
        let file = WaveformFile::from_waveform(&sample_waveform(), &model).unwrap();
        let text = file.write();
        let back = WaveformFile::read(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.write(), text);
        assert!(back.matches_model(&model));
        let w = back.to_waveform().unwrap();
        for (a, b) in w.samples().iter().zip(sample_waveform().samples()) {
            for c in 0..4 {
                assert_eq!(a[c], quantize(b[c]));
            }
        }
        assert!(text.contains("omega_t_mhz 5664.000000000"));
        assert!(text.contains("omega_c_mhz 4452.600000000"));
    }

    #[test]
    fn model_hash_tracks_parameters() {
        let a = HamiltonianModel::reference();
        let mut b = a;
        b.kerr *= 1.0 + 1e-12;
        assert_eq!(model_hash(&a), model_hash(&a));
        assert_ne!(model_hash(&a), model_hash(&b));
        assert_eq!(model_hash(&a).len(), 64);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let model = HamiltonianModel::reference();
        let text = WaveformFile::from_waveform(&sample_waveform(), &model).unwrap().write();
        let lines: Vec<&str> = text.lines().collect();
        let edit = |idx: usize, new: &str| {
            let mut l = lines.clone();
            l[idx] = new;
            l.join("\n")
        };

        let e = WaveformFile::read(&edit(1, "version 2")).unwrap_err();
        assert_eq!(
            (e.line, e.kind),
            (Some(2), WaveformErrorKind::UnsupportedVersion("2".into()))
        );
        let e = WaveformFile::read(&edit(10, "2.000000000 0 0 0")).unwrap_err();
        assert_eq!(e.line, Some(11));
        assert!(matches!(e.kind, WaveformErrorKind::BadRow(_)));
        let e = WaveformFile::read(&edit(10, "3.000000000 0 0 0 0")).unwrap_err();
        assert!(matches!(e.kind, WaveformErrorKind::TimeMismatch { .. }));
        let e = WaveformFile::read(&edit(10, "2.000000000 x 0 0 0")).unwrap_err();
        assert_eq!(e.kind, WaveformErrorKind::BadNumber("x".into()));
        let e = WaveformFile::read(&edit(4, "colour 3")).unwrap_err();
        assert_eq!(
            (e.line, e.kind),
            (Some(5), WaveformErrorKind::UnknownField("colour".into()))
        );
        let e = WaveformFile::read(&edit(3, "steps 30")).unwrap_err();
        assert_eq!(
            e.kind,
            WaveformErrorKind::RowCount {
                expected: 30,
                found: 25
            }
        );
        let e = WaveformFile::read(&edit(3, "steps 3")).unwrap_err();
        assert_eq!(
            (e.line, e.kind),
            (Some(12), WaveformErrorKind::RowCount { expected: 3, found: 4 })
        );
        let e = WaveformFile::read(&lines[..6].join("\n")).unwrap_err();
        assert_eq!(e.kind, WaveformErrorKind::MissingField("model_sha256"));
        let e = WaveformFile::read(&edit(2, "dt_ns 0")).unwrap_err();
        assert!(matches!(e.kind, WaveformErrorKind::InvalidHeader(_)));
        assert!(WaveformFile::read("").is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_waveforms_round_trip(
            dt in 0.1f64..5.0,
            samples in prop::collection::vec(prop::array::uniform4(-1.0f64..1.0), 1..40),
        ) {
            let w = ControlWaveform::new(dt, samples).unwrap();
            let file = WaveformFile::from_waveform(&w, &HamiltonianModel::reference()).unwrap();
            let back = WaveformFile::read(&file.write()).unwrap();
            prop_assert_eq!(&back, &file);
            let w2 = back.to_waveform().unwrap();
            let again = WaveformFile::from_waveform(&w2, &HamiltonianModel::reference()).unwrap();
            prop_assert_eq!(again, file);
            for (a, b) in w2.samples().iter().zip(w.samples()) {
                for c in 0..4 {
                    prop_assert!((a[c] - b[c]).abs() <= 5e-10);
                }
            }
        }

        #[test]
        fn fixed_parse_inverts_display(units in -MAX_UNITS..=MAX_UNITS) {
            let f = Fixed(units);
            prop_assert_eq!(Fixed::parse(&f.to_string()), Some(f));
            prop_assert_eq!(Fixed::from_f64(f.to_f64()), Some(f));
        }
    }
}
