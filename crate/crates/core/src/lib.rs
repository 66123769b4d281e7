// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Optimal-control pulse synthesis and open-system verification for a
//! cat-code logical qubit stored in an oscillator dispersively coupled to a
//! transmon.
//!
//! Units throughout: ħ = 1, time in ns, frequencies and drive amplitudes in
//! rad/ns. Joint states use the index `n * n_trans + m` for oscillator level
//! `n` and transmon level `m`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmarking;
pub mod catcode;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod grape;
pub mod linalg;
pub mod lindblad;
pub mod operators;
pub mod tomography;

pub use error::{Error, Result};
