// Copyright 2026 The catgrape Authors
// SPDX-License-Identifier: Apache-2.0

#![no_main]

use catgrape::cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        let echoed = cfg.to_toml();
        let again = parse_config(&echoed).expect("echoed configuration must parse");
        assert_eq!(again.document, cfg.document);
        assert_eq!(again.to_toml(), echoed);
    }
});
