// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::cli::config::ConfigError;
use crate::cli::waveform_file::WaveformFileError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation too small: {0}")]
    Truncation(String),

    #[error("integration failed at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("underdetermined reconstruction: {points} grid points for {unknowns} unknowns (need at least {unknowns})")]
    Underdetermined { points: usize, unknowns: usize },

    #[error("non-physical channel output: {0}")]
    NonPhysical(String),

    #[error("channel is not trace preserving (first PTM row deviates by {0:.3e})")]
    NotTracePreserving(f64),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    WaveformFile(#[from] WaveformFileError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
