// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Configuration, waveform files, the dispersion correction and the
//! subcommand driver behind the `catgrape` binary.

pub mod config;
pub mod correction;
pub mod run;
pub mod waveform_file;
