// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

#![no_main]

use catgrape::cli::waveform_file::WaveformFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = WaveformFile::read(text) {
        let written = file.write();
        let back = WaveformFile::read(&written).expect("written waveform must parse");
        assert_eq!(back, file);
        let _ = file.to_waveform();
    }
});
