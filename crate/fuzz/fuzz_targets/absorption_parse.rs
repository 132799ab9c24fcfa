//! Fuzzes the absorption-table text format: parsing must never panic, and an
//! accepted table must be non-empty and serve finite, non-negative
//! coefficients for any query frequency.

#![no_main]

use beamkit::absorption::AbsorptionTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };

    if let Ok(table) = AbsorptionTable::parse(text) {
        assert!(!table.is_empty(), "accepted table has no entries");
        for q in [0.0, 1.0, 3e11, f64::MAX, f64::NAN] {
            let k = table.coefficient(q);
            assert!(k.is_finite() && k >= 0.0, "coefficient({q}) = {k}");
        }
    }
});
