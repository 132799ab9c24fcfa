//! Frequency-dependent molecular absorption coefficients.
//!
//! Sub-terahertz links lose power to molecular absorption on top of
//! spreading loss. The coefficient varies strongly with frequency, so it is
//! supplied as a lookup table: a text file of `frequency_hz
//! coefficient_per_m` pairs, one per line, `#` starting a comment, blank
//! lines ignored. Frequencies must be strictly ascending. Lookups take the
//! entry at or below the query frequency; queries below the first entry
//! clamp to it.

use crate::{Error, Result};
use std::path::Path;

/// Piecewise-constant absorption coefficient table in 1/m over frequency in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionTable {
    entries: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    /// A table that is zero everywhere: no molecular absorption.
    pub fn zero() -> Self {
        AbsorptionTable { entries: vec![(0.0, 0.0)] }
    }

    /// A table with a single frequency-independent coefficient.
    pub fn constant(kappa_per_m: f64) -> Result<Self> {
        if !(kappa_per_m.is_finite() && kappa_per_m >= 0.0) {
            return Err(Error::AbsorptionParse {
                line: 0,
                message: format!("coefficient {kappa_per_m} must be finite and non-negative"),
            });
        }
        Ok(AbsorptionTable { entries: vec![(0.0, kappa_per_m)] })
    }

    /// Parses the two-column text format described at the module level.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(f64, f64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut fields = content.split_whitespace();
            let f_txt = fields.next().expect("non-empty line has a first field");
            let k_txt = fields.next().ok_or_else(|| Error::AbsorptionParse {
                line,
                message: "expected two fields: frequency_hz coefficient_per_m".into(),
            })?;
            if fields.next().is_some() {
                return Err(Error::AbsorptionParse {
                    line,
                    message: "expected exactly two fields".into(),
                });
            }
            let f: f64 = f_txt.parse().map_err(|_| Error::AbsorptionParse {
                line,
                message: format!("cannot parse frequency `{f_txt}`"),
            })?;
            let k: f64 = k_txt.parse().map_err(|_| Error::AbsorptionParse {
                line,
                message: format!("cannot parse coefficient `{k_txt}`"),
            })?;
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::AbsorptionParse {
                    line,
                    message: format!("frequency {f} must be finite and non-negative"),
                });
            }
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::AbsorptionParse {
                    line,
                    message: format!("coefficient {k} must be finite and non-negative"),
                });
            }
            if let Some(&(prev, _)) = entries.last() {
                if f <= prev {
                    return Err(Error::AbsorptionParse {
                        line,
                        message: format!("frequency {f} not strictly greater than previous {prev}"),
                    });
                }
            }
            entries.push((f, k));
        }
        if entries.is_empty() {
            return Err(Error::AbsorptionParse { line: 0, message: "table has no entries".into() });
        }
        Ok(AbsorptionTable { entries })
    }

    /// Reads and parses a table file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading absorption table {}", path.display()), e))?;
        AbsorptionTable::parse(&text)
    }

    /// Coefficient at `f_hz`: the entry at or below the query, clamping to
    /// the first entry below the table's range.
    pub fn coefficient(&self, f_hz: f64) -> f64 {
        let mut k = self.entries[0].1;
        for &(f, v) in &self.entries {
            if f <= f_hz {
                k = v;
            } else {
                break;
            }
        }
        k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
