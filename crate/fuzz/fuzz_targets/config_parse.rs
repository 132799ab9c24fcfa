//! Fuzzes the experiment-configuration text format end to end: lenient and
//! strict parsing, key resolution, and semantic validation must never panic,
//! and strict acceptance must imply a problem-free lenient parse.

#![no_main]

use beamkit::config::{ExperimentConfig, RawConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };

    let (raw, problems) = RawConfig::parse_lenient(text);
    let strict = RawConfig::parse(text);
    if strict.is_ok() {
        assert!(problems.is_empty(), "strict accepted what lenient flagged: {problems:?}");
    }

    let (cfg, _resolve_problems) = ExperimentConfig::resolve(&raw);
    let _ = cfg.validate();
});
