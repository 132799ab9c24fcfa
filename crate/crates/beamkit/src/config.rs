//! The `beamkit` experiment configuration format.
//!
//! Configurations are line-oriented text: one `key = value` pair per line,
//! `#` starting a comment anywhere, blank lines ignored. Keys are dotted
//! lowercase identifiers. Values are scalars, comma-separated lists, or
//! colon-separated pairs (`lo:hi` ranges, `azimuth:elevation` directions).
//! Every key has a default, so the empty file is a valid configuration.
//!
//! Resolution is two-phase: [`RawConfig`] parses the text without
//! interpreting values, then [`ExperimentConfig::resolve`] types every key
//! and collects problems (syntax, unknown keys, malformed values) instead of
//! stopping at the first, so `beamkit validate` can report everything at
//! once. [`ExperimentConfig::validate`] adds the semantic cross-checks.

use crate::absorption::AbsorptionTable;
use crate::channel::{AngleRange, ChannelScene, CovarianceMode};
use crate::geometry::{ArrayGeometry, CarrierConfig, ConnectivityMask, Direction, MaskKind};
use crate::radar::RadarScene;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Experiment scenarios the CLI can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    SeVsSnr,
    SeVsEta,
    Beampattern,
    SeVsDbar,
    ArrayGain,
    SeVsBandwidth,
    PhaseShifters,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SeVsSnr,
        Scenario::SeVsEta,
        Scenario::Beampattern,
        Scenario::SeVsDbar,
        Scenario::ArrayGain,
        Scenario::SeVsBandwidth,
        Scenario::PhaseShifters,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SeVsSnr => "se-vs-snr",
            Scenario::SeVsEta => "se-vs-eta",
            Scenario::Beampattern => "beampattern",
            Scenario::SeVsDbar => "se-vs-dbar",
            Scenario::ArrayGain => "array-gain",
            Scenario::SeVsBandwidth => "se-vs-bandwidth",
            Scenario::PhaseShifters => "phase-shifters",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .iter()
            .find(|sc| sc.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Connectivity selection for the designed analog precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskChoice {
    Fully,
    Partial,
    Overlapped,
}

impl MaskChoice {
    pub fn name(&self) -> &'static str {
        match self {
            MaskChoice::Fully => "fully",
            MaskChoice::Partial => "partial",
            MaskChoice::Overlapped => "overlapped",
        }
    }
}

/// Untyped `key = value` map straight from the text.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '_')
        && !key.starts_with('.')
        && !key.ends_with('.')
}

impl RawConfig {
    /// Parses leniently: malformed lines are reported and skipped, so later
    /// lines still surface their own problems.
    pub fn parse_lenient(text: &str) -> (RawConfig, Vec<String>) {
        let mut values = BTreeMap::new();
        let mut problems = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                problems.push(format!("line {line}: expected `key = value`, got `{content}`"));
                continue;
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !valid_key(&key) {
                problems.push(format!("line {line}: invalid key `{key}`"));
                continue;
            }
            if values.contains_key(&key) {
                problems.push(format!("line {line}: duplicate key `{key}`"));
                continue;
            }
            values.insert(key, value);
        }
        (RawConfig { values }, problems)
    }

    /// Parses strictly: the first malformed line is an error.
    pub fn parse(text: &str) -> Result<RawConfig> {
        let (cfg, problems) = RawConfig::parse_lenient(text);
        if let Some(first) = problems.first() {
            let (line, message) = first
                .strip_prefix("line ")
                .and_then(|rest| rest.split_once(": "))
                .map(|(l, m)| (l.parse().unwrap_or(0), m.to_string()))
                .unwrap_or((0, first.clone()));
            return Err(Error::ConfigSyntax { line, message });
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        RawConfig::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }
}

/// Accumulates typed reads and their problems.
struct KeyReader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<String>,
    problems: Vec<String>,
}

impl<'a> KeyReader<'a> {
    fn new(raw: &'a RawConfig) -> Self {
        KeyReader { raw, used: BTreeSet::new(), problems: Vec::new() }
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.used.insert(key.to_string());
        self.raw.get(key)
    }

    fn parse_or<T: FromStr>(&mut self, key: &str, default: T, what: &str) -> T {
        match self.take(key) {
            None => default,
            Some(text) => match text.parse() {
                Ok(v) => v,
                Err(_) => {
                    self.problems.push(format!("key `{key}`: cannot parse `{text}` as {what}"));
                    default
                }
            },
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.parse_or(key, default, "a number")
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.parse_or(key, default, "a non-negative integer")
    }

    fn u64(&mut self, key: &str, default: u64) -> u64 {
        self.parse_or(key, default, "a non-negative integer")
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        self.parse_or(key, default, "true or false")
    }

    fn opt_usize(&mut self, key: &str) -> Option<usize> {
        let text = self.take(key)?;
        match text.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.problems.push(format!("key `{key}`: cannot parse `{text}` as an integer"));
                None
            }
        }
    }

    fn opt_path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(PathBuf::from)
    }

    fn list_f64(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        let Some(text) = self.take(key) else { return default.to_vec() };
        let mut out = Vec::new();
        for part in text.split(',') {
            match part.trim().parse() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.problems
                        .push(format!("key `{key}`: cannot parse `{}` as a number", part.trim()));
                    return default.to_vec();
                }
            }
        }
        if out.is_empty() {
            self.problems.push(format!("key `{key}`: empty list"));
            return default.to_vec();
        }
        out
    }

    fn pair(&mut self, key: &str, text: &str) -> Option<(f64, f64)> {
        let Some((a, b)) = text.split_once(':') else {
            self.problems.push(format!("key `{key}`: expected `a:b`, got `{text}`"));
            return None;
        };
        match (a.trim().parse(), b.trim().parse()) {
            (Ok(x), Ok(y)) => Some((x, y)),
            _ => {
                self.problems.push(format!("key `{key}`: cannot parse `{text}` as two numbers"));
                None
            }
        }
    }

    fn range(&mut self, key: &str, default: (f64, f64)) -> (f64, f64) {
        match self.take(key) {
            None => default,
            Some(text) => {
                let text = text.to_string();
                self.pair(key, &text).unwrap_or(default)
            }
        }
    }

    fn opt_range(&mut self, key: &str) -> Option<(f64, f64)> {
        let text = self.take(key)?.to_string();
        self.pair(key, &text)
    }

    fn pairs(&mut self, key: &str, default: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let Some(text) = self.take(key) else { return default.to_vec() };
        let text = text.to_string();
        let mut out = Vec::new();
        for part in text.split(',') {
            match self.pair(key, part.trim()) {
                Some(p) => out.push(p),
                None => return default.to_vec(),
            }
        }
        if out.is_empty() {
            self.problems.push(format!("key `{key}`: empty list"));
            return default.to_vec();
        }
        out
    }

    fn finish(mut self) -> Vec<String> {
        for key in self.raw.keys() {
            if !self.used.contains(key) {
                self.problems.push(format!("unknown key `{key}`"));
            }
        }
        self.problems
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: usize,

    pub tx_subarrays: (usize, usize),
    pub tx_antennas: (usize, usize),
    pub rx_subarrays: (usize, usize),
    pub rx_antennas: (usize, usize),
    /// Antenna pitch inside a subarray, in carrier wavelengths.
    pub antenna_spacing_wavelengths: f64,
    /// Subarray pitch, in carrier wavelengths.
    pub subarray_spacing_wavelengths: f64,

    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarriers: usize,

    pub rf_chains: usize,
    pub streams: usize,
    pub snr_db: f64,

    /// Radar targets as (azimuth, elevation) degrees.
    pub targets: Vec<(f64, f64)>,
    /// Overlapped window for the radar reference blocks; partitioned when
    /// absent.
    pub radar_overlap: Option<usize>,

    pub paths: usize,
    pub distance_m: f64,
    pub path_loss_exponent: f64,
    pub nlos_ratio_db: f64,
    pub aod_azimuth: (f64, f64),
    pub aod_elevation: (f64, f64),
    pub aoa_azimuth: (f64, f64),
    pub aoa_elevation: (f64, f64),
    pub fixed_los_aod: Option<(f64, f64)>,
    pub fixed_los_aoa: Option<(f64, f64)>,
    pub absorption_table: Option<PathBuf>,
    pub normalize_los_gain: bool,
    pub covariance_exact: bool,

    pub eta: f64,
    pub mask: MaskChoice,
    /// Overlapped-mask window; defaults to twice the partitioned block.
    pub solver_overlap: Option<usize>,
    pub outer_iters: usize,
    pub outer_tol: f64,
    pub mmo_iters: usize,
    pub mmo_tol: f64,

    pub sweep_snr_db: Vec<f64>,
    pub sweep_eta: Vec<f64>,
    pub sweep_bandwidth_hz: Vec<f64>,
    /// Carrier-wavelength over antenna-pitch ratios for the spacing sweep.
    pub sweep_spacing_ratio: Vec<f64>,

    pub grid_azimuth_start: f64,
    pub grid_azimuth_stop: f64,
    pub grid_azimuth_step: f64,
    pub grid_elevation: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::SeVsSnr,
            seed: 1,
            trials: 50,
            tx_subarrays: (8, 8),
            tx_antennas: (2, 2),
            rx_subarrays: (4, 4),
            rx_antennas: (2, 2),
            antenna_spacing_wavelengths: 0.25,
            subarray_spacing_wavelengths: 0.5,
            center_hz: 300e9,
            bandwidth_hz: 15e9,
            subcarriers: 16,
            rf_chains: 8,
            streams: 2,
            snr_db: 10.0,
            targets: vec![(-40.0, 90.0), (40.0, 90.0)],
            radar_overlap: None,
            paths: 5,
            distance_m: 10.0,
            path_loss_exponent: 4.0,
            nlos_ratio_db: -10.0,
            aod_azimuth: (-150.0, 150.0),
            aod_elevation: (70.0, 90.0),
            aoa_azimuth: (-150.0, 150.0),
            aoa_elevation: (70.0, 90.0),
            fixed_los_aod: None,
            fixed_los_aoa: None,
            absorption_table: None,
            normalize_los_gain: true,
            covariance_exact: true,
            eta: 0.5,
            mask: MaskChoice::Fully,
            solver_overlap: None,
            outer_iters: 10,
            outer_tol: 1e-6,
            mmo_iters: 20,
            mmo_tol: 1e-6,
            sweep_snr_db: vec![-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0],
            sweep_eta: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            sweep_bandwidth_hz: vec![5e9, 10e9, 15e9, 20e9, 30e9],
            sweep_spacing_ratio: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            grid_azimuth_start: -90.0,
            grid_azimuth_stop: 90.0,
            grid_azimuth_step: 1.0,
            grid_elevation: 90.0,
        }
    }
}

impl ExperimentConfig {
    /// Types every key; returns the config and all resolution problems
    /// (malformed values, unknown keys). Malformed values fall back to
    /// their defaults so later checks still run.
    pub fn resolve(raw: &RawConfig) -> (ExperimentConfig, Vec<String>) {
        let d = ExperimentConfig::default();
        let mut r = KeyReader::new(raw);

        let scenario = match r.take("scenario") {
            None => d.scenario,
            Some(text) => match text.parse() {
                Ok(s) => s,
                Err(_) => {
                    let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                    r.problems.push(format!(
                        "key `scenario`: unknown scenario `{text}` (expected one of {})",
                        names.join(", ")
                    ));
                    d.scenario
                }
            },
        };
        let mask = match r.take("solver.mask") {
            None => d.mask,
            Some("fully") => MaskChoice::Fully,
            Some("partial") => MaskChoice::Partial,
            Some("overlapped") => MaskChoice::Overlapped,
            Some(text) => {
                r.problems.push(format!(
                    "key `solver.mask`: unknown mask `{text}` (expected fully, partial, or overlapped)"
                ));
                d.mask
            }
        };
        let covariance_exact = match r.take("channel.covariance") {
            None => d.covariance_exact,
            Some("exact") => true,
            Some("los-approx") => false,
            Some(text) => {
                r.problems.push(format!(
                    "key `channel.covariance`: unknown mode `{text}` (expected exact or los-approx)"
                ));
                d.covariance_exact
            }
        };

        let cfg = ExperimentConfig {
            scenario,
            seed: r.u64("seed", d.seed),
            trials: r.usize("trials", d.trials),
            tx_subarrays: (
                r.usize("tx.subarrays_x", d.tx_subarrays.0),
                r.usize("tx.subarrays_y", d.tx_subarrays.1),
            ),
            tx_antennas: (
                r.usize("tx.antennas_x", d.tx_antennas.0),
                r.usize("tx.antennas_y", d.tx_antennas.1),
            ),
            rx_subarrays: (
                r.usize("rx.subarrays_x", d.rx_subarrays.0),
                r.usize("rx.subarrays_y", d.rx_subarrays.1),
            ),
            rx_antennas: (
                r.usize("rx.antennas_x", d.rx_antennas.0),
                r.usize("rx.antennas_y", d.rx_antennas.1),
            ),
            antenna_spacing_wavelengths: r
                .f64("array.antenna_spacing_wavelengths", d.antenna_spacing_wavelengths),
            subarray_spacing_wavelengths: r
                .f64("array.subarray_spacing_wavelengths", d.subarray_spacing_wavelengths),
            center_hz: r.f64("carrier.center_hz", d.center_hz),
            bandwidth_hz: r.f64("carrier.bandwidth_hz", d.bandwidth_hz),
            subcarriers: r.usize("carrier.subcarriers", d.subcarriers),
            rf_chains: r.usize("link.rf_chains", d.rf_chains),
            streams: r.usize("link.streams", d.streams),
            snr_db: r.f64("link.snr_db", d.snr_db),
            targets: r.pairs("radar.targets", &d.targets),
            radar_overlap: r.opt_usize("radar.overlap"),
            paths: r.usize("channel.paths", d.paths),
            distance_m: r.f64("channel.distance_m", d.distance_m),
            path_loss_exponent: r.f64("channel.path_loss_exponent", d.path_loss_exponent),
            nlos_ratio_db: r.f64("channel.nlos_ratio_db", d.nlos_ratio_db),
            aod_azimuth: r.range("channel.aod_azimuth", d.aod_azimuth),
            aod_elevation: r.range("channel.aod_elevation", d.aod_elevation),
            aoa_azimuth: r.range("channel.aoa_azimuth", d.aoa_azimuth),
            aoa_elevation: r.range("channel.aoa_elevation", d.aoa_elevation),
            fixed_los_aod: r.opt_range("channel.fixed_los_aod"),
            fixed_los_aoa: r.opt_range("channel.fixed_los_aoa"),
            absorption_table: r.opt_path("channel.absorption_table"),
            normalize_los_gain: r.bool("channel.normalize_los_gain", d.normalize_los_gain),
            covariance_exact,
            eta: r.f64("solver.eta", d.eta),
            mask,
            solver_overlap: r.opt_usize("solver.overlap"),
            outer_iters: r.usize("solver.outer_iters", d.outer_iters),
            outer_tol: r.f64("solver.outer_tol", d.outer_tol),
            mmo_iters: r.usize("solver.mmo_iters", d.mmo_iters),
            mmo_tol: r.f64("solver.mmo_tol", d.mmo_tol),
            sweep_snr_db: r.list_f64("sweep.snr_db", &d.sweep_snr_db),
            sweep_eta: r.list_f64("sweep.eta", &d.sweep_eta),
            sweep_bandwidth_hz: r.list_f64("sweep.bandwidth_hz", &d.sweep_bandwidth_hz),
            sweep_spacing_ratio: r.list_f64("sweep.spacing_ratio", &d.sweep_spacing_ratio),
            grid_azimuth_start: r.f64("grid.azimuth_start", d.grid_azimuth_start),
            grid_azimuth_stop: r.f64("grid.azimuth_stop", d.grid_azimuth_stop),
            grid_azimuth_step: r.f64("grid.azimuth_step", d.grid_azimuth_step),
            grid_elevation: r.f64("grid.elevation", d.grid_elevation),
        };
        (cfg, r.finish())
    }

    /// Semantic cross-checks. Returns one message per violation; empty means
    /// the configuration is runnable.
    pub fn validate(&self) -> Vec<String> {
        fn check(v: &mut Vec<String>, ok: bool, msg: String) {
            if !ok {
                v.push(msg);
            }
        }
        let mut v = Vec::new();

        check(&mut v, self.trials >= 1, "trials must be at least 1".into());
        for (name, (a, b)) in [
            ("tx.subarrays", self.tx_subarrays),
            ("tx.antennas", self.tx_antennas),
            ("rx.subarrays", self.rx_subarrays),
            ("rx.antennas", self.rx_antennas),
        ] {
            check(
                &mut v,
                a >= 1 && b >= 1,
                format!("{name} must be at least 1 x 1, got {a} x {b}"),
            );
        }
        check(
            &mut v,
            self.tx_antennas == self.rx_antennas,
            format!(
                "transmit and receive subarrays must have the same antenna grid, got {:?} vs {:?}",
                self.tx_antennas, self.rx_antennas
            ),
        );
        for (name, s) in [
            ("array.antenna_spacing_wavelengths", self.antenna_spacing_wavelengths),
            ("array.subarray_spacing_wavelengths", self.subarray_spacing_wavelengths),
        ] {
            check(&mut v, s.is_finite() && s > 0.0, format!("{name} must be positive, got {s}"));
        }
        match CarrierConfig::new(self.center_hz, self.bandwidth_hz, self.subcarriers.max(1)) {
            Err(e) => v.push(e.to_string()),
            Ok(_) => {
                check(
                    &mut v,
                    self.subcarriers >= 1,
                    "carrier.subcarriers must be at least 1".into(),
                );
                // Wide sweeps must stay physical too.
                if self.scenario == Scenario::SeVsBandwidth {
                    for &bw in &self.sweep_bandwidth_hz {
                        if let Err(e) =
                            CarrierConfig::new(self.center_hz, bw, self.subcarriers.max(1))
                        {
                            v.push(format!("sweep.bandwidth_hz entry {bw}: {e}"));
                        }
                    }
                }
            }
        }

        let n_t = self.tx_subarrays.0 * self.tx_subarrays.1;
        check(&mut v, self.rf_chains >= 1, "link.rf_chains must be at least 1".into());
        check(
            &mut v,
            self.rf_chains <= n_t,
            format!("link.rf_chains = {} exceeds the {n_t} transmit subarrays", self.rf_chains),
        );
        check(&mut v, self.streams >= 1, "link.streams must be at least 1".into());
        check(
            &mut v,
            self.streams <= self.rf_chains,
            format!("link.streams = {} exceeds link.rf_chains = {}", self.streams, self.rf_chains),
        );
        let k = self.targets.len();
        check(&mut v, k >= 1, "radar.targets must name at least one target".into());
        check(
            &mut v,
            k <= self.streams,
            format!("{k} radar targets exceed link.streams = {}", self.streams),
        );
        for &(az, el) in &self.targets {
            if Direction::new(az, el).is_err() {
                v.push(format!(
                    "radar target {az}:{el} outside azimuth [-180, 180], elevation [0, 180]"
                ));
            }
        }
        if k >= 1 {
            match self.radar_overlap {
                None => check(
            &mut v,
                    n_t.is_multiple_of(k),
                    format!("partitioned radar blocks need {n_t} subarrays divisible by {k} targets (set radar.overlap otherwise)"),
                ),
                Some(w) => {
                    if let Err(e) = ConnectivityMask::build(n_t, k, MaskKind::Overlapped { window: w }) {
                        v.push(format!("radar.overlap: {e}"));
                    }
                }
            }
        }

        match self.mask {
            MaskChoice::Fully => {}
            MaskChoice::Partial => check(
                &mut v,
                self.rf_chains >= 1 && n_t.is_multiple_of(self.rf_chains.max(1)),
                format!(
                    "partial mask needs {n_t} subarrays divisible by {} RF chains",
                    self.rf_chains
                ),
            ),
            MaskChoice::Overlapped => {
                let w = self.resolved_solver_overlap();
                if let Err(e) = ConnectivityMask::build(
                    n_t,
                    self.rf_chains.max(1),
                    MaskKind::Overlapped { window: w },
                ) {
                    v.push(format!("solver.overlap: {e}"));
                }
            }
        }

        check(&mut v, self.paths >= 1, "channel.paths must be at least 1".into());
        check(
            &mut v,
            self.distance_m.is_finite() && self.distance_m > 0.0,
            format!("channel.distance_m must be positive, got {}", self.distance_m),
        );
        check(
            &mut v,
            self.path_loss_exponent.is_finite() && self.path_loss_exponent >= 0.0,
            format!(
                "channel.path_loss_exponent must be non-negative, got {}",
                self.path_loss_exponent
            ),
        );
        check(
            &mut v,
            self.nlos_ratio_db.is_finite(),
            format!("channel.nlos_ratio_db must be finite, got {}", self.nlos_ratio_db),
        );
        for (name, (lo, hi), min, max) in [
            ("channel.aod_azimuth", self.aod_azimuth, -180.0, 180.0),
            ("channel.aod_elevation", self.aod_elevation, 0.0, 180.0),
            ("channel.aoa_azimuth", self.aoa_azimuth, -180.0, 180.0),
            ("channel.aoa_elevation", self.aoa_elevation, 0.0, 180.0),
        ] {
            check(
                &mut v,
                lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min && hi <= max,
                format!("{name} range {lo}:{hi} must be non-empty within [{min}, {max}]"),
            );
        }
        check(
            &mut v,
            self.fixed_los_aod.is_some() == self.fixed_los_aoa.is_some(),
            "channel.fixed_los_aod and channel.fixed_los_aoa must be set together".into(),
        );
        for (name, dir) in [
            ("channel.fixed_los_aod", self.fixed_los_aod),
            ("channel.fixed_los_aoa", self.fixed_los_aoa),
        ] {
            if let Some((az, el)) = dir {
                if Direction::new(az, el).is_err() {
                    v.push(format!(
                        "{name} {az}:{el} outside azimuth [-180, 180], elevation [0, 180]"
                    ));
                }
            }
        }
        if let Some(path) = &self.absorption_table {
            if let Err(e) = AbsorptionTable::load(path) {
                v.push(format!("channel.absorption_table: {e}"));
            }
        }

        check(
            &mut v,
            self.eta.is_finite() && (0.0..=1.0).contains(&self.eta),
            format!("solver.eta = {} outside [0, 1]", self.eta),
        );
        check(&mut v, self.outer_iters >= 1, "solver.outer_iters must be at least 1".into());
        check(&mut v, self.mmo_iters >= 1, "solver.mmo_iters must be at least 1".into());
        for (name, t) in [("solver.outer_tol", self.outer_tol), ("solver.mmo_tol", self.mmo_tol)] {
            check(&mut v, t.is_finite() && t > 0.0, format!("{name} must be positive, got {t}"));
        }

        for e in &self.sweep_eta {
            check(
                &mut v,
                e.is_finite() && (0.0..=1.0).contains(e),
                format!("sweep.eta entry {e} outside [0, 1]"),
            );
        }
        for s in &self.sweep_spacing_ratio {
            check(
                &mut v,
                s.is_finite() && *s > 0.0,
                format!("sweep.spacing_ratio entry {s} must be positive"),
            );
        }
        for s in &self.sweep_snr_db {
            check(&mut v, s.is_finite(), format!("sweep.snr_db entry {s} must be finite"));
        }
        check(
            &mut v,
            self.snr_db.is_finite(),
            format!("link.snr_db must be finite, got {}", self.snr_db),
        );

        check(
            &mut v,
            self.grid_azimuth_step.is_finite() && self.grid_azimuth_step > 0.0,
            format!("grid.azimuth_step must be positive, got {}", self.grid_azimuth_step),
        );
        check(
            &mut v,
            self.grid_azimuth_start <= self.grid_azimuth_stop,
            format!(
                "grid azimuth range {}:{} is empty",
                self.grid_azimuth_start, self.grid_azimuth_stop
            ),
        );
        check(
            &mut v,
            self.grid_azimuth_start >= -180.0 && self.grid_azimuth_stop <= 180.0,
            "grid azimuth range must lie within [-180, 180]".into(),
        );
        check(
            &mut v,
            (0.0..=180.0).contains(&self.grid_elevation),
            format!("grid.elevation = {} outside [0, 180]", self.grid_elevation),
        );
        v
    }

    /// Overlapped-mask window: the configured one, or twice the partitioned
    /// block length clamped into the valid range.
    pub fn resolved_solver_overlap(&self) -> usize {
        let n_t = self.tx_subarrays.0 * self.tx_subarrays.1;
        let n_rf = self.rf_chains.max(1);
        self.solver_overlap.unwrap_or_else(|| {
            let min = n_t.div_ceil(n_rf);
            let max = n_t.saturating_sub(n_rf) + 1;
            (2 * n_t / n_rf).clamp(min, max.max(min))
        })
    }

    pub fn carrier(&self) -> Result<CarrierConfig> {
        CarrierConfig::new(self.center_hz, self.bandwidth_hz, self.subcarriers)
    }

    fn geometry(
        &self,
        sub: (usize, usize),
        ant: (usize, usize),
        antenna_spacing_wl: f64,
    ) -> Result<ArrayGeometry> {
        let lam = crate::geometry::wavelength(self.center_hz);
        ArrayGeometry::new(
            sub.0,
            sub.1,
            ant.0,
            ant.1,
            antenna_spacing_wl * lam,
            antenna_spacing_wl * lam,
            self.subarray_spacing_wavelengths * lam,
            self.subarray_spacing_wavelengths * lam,
        )
    }

    pub fn tx_geometry(&self) -> Result<ArrayGeometry> {
        self.geometry(self.tx_subarrays, self.tx_antennas, self.antenna_spacing_wavelengths)
    }

    pub fn rx_geometry(&self) -> Result<ArrayGeometry> {
        self.geometry(self.rx_subarrays, self.rx_antennas, self.antenna_spacing_wavelengths)
    }

    /// Geometries with an overridden antenna pitch (for the spacing sweep).
    pub fn tx_geometry_with_spacing(&self, antenna_spacing_wl: f64) -> Result<ArrayGeometry> {
        self.geometry(self.tx_subarrays, self.tx_antennas, antenna_spacing_wl)
    }

    pub fn rx_geometry_with_spacing(&self, antenna_spacing_wl: f64) -> Result<ArrayGeometry> {
        self.geometry(self.rx_subarrays, self.rx_antennas, antenna_spacing_wl)
    }

    pub fn channel_scene(&self) -> Result<ChannelScene> {
        let absorption = match &self.absorption_table {
            None => AbsorptionTable::zero(),
            Some(path) => AbsorptionTable::load(path)?,
        };
        let fixed_los = match (self.fixed_los_aod, self.fixed_los_aoa) {
            (Some((az_d, el_d)), Some((az_a, el_a))) => {
                Some((Direction::new(az_d, el_d)?, Direction::new(az_a, el_a)?))
            }
            _ => None,
        };
        Ok(ChannelScene {
            n_paths: self.paths,
            distance_m: self.distance_m,
            path_loss_exponent: self.path_loss_exponent,
            nlos_ratio_db: self.nlos_ratio_db,
            aod_azimuth: AngleRange::new(self.aod_azimuth.0, self.aod_azimuth.1),
            aod_elevation: AngleRange::new(self.aod_elevation.0, self.aod_elevation.1),
            aoa_azimuth: AngleRange::new(self.aoa_azimuth.0, self.aoa_azimuth.1),
            aoa_elevation: AngleRange::new(self.aoa_elevation.0, self.aoa_elevation.1),
            fixed_los,
            absorption,
            normalize_los_gain: self.normalize_los_gain,
        })
    }

    pub fn radar_scene(&self) -> Result<RadarScene> {
        let targets = self
            .targets
            .iter()
            .map(|&(az, el)| Direction::new(az, el))
            .collect::<Result<Vec<_>>>()?;
        RadarScene::new(targets)
    }

    pub fn covariance_mode(&self) -> CovarianceMode {
        if self.covariance_exact {
            CovarianceMode::Exact
        } else {
            CovarianceMode::LosApprox
        }
    }

    /// Connectivity mask of the configured kind for `n_t` subarrays.
    pub fn build_mask(&self, n_t: usize, choice: MaskChoice) -> Result<ConnectivityMask> {
        let kind = match choice {
            MaskChoice::Fully => MaskKind::Fully,
            MaskChoice::Partial => MaskKind::Partial,
            MaskChoice::Overlapped => {
                MaskKind::Overlapped { window: self.resolved_solver_overlap() }
            }
        };
        ConnectivityMask::build(n_t, self.rf_chains, kind)
    }

    /// The azimuth cut used by the beampattern and array-gain scenarios.
    pub fn direction_grid(&self) -> Result<Vec<Direction>> {
        let mut out = Vec::new();
        let mut az = self.grid_azimuth_start;
        while az <= self.grid_azimuth_stop + 1e-9 {
            out.push(Direction::new(az.min(180.0), self.grid_elevation)?);
            az += self.grid_azimuth_step;
        }
        Ok(out)
    }

    /// Every resolved key as `(key, value)` pairs in sorted key order;
    /// the run manifest records these.
    pub fn manifest_lines(&self) -> Vec<(String, String)> {
        fn fmt_list(values: &[f64]) -> String {
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        }
        fn fmt_pairs(values: &[(f64, f64)]) -> String {
            values.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(",")
        }
        let mut lines: Vec<(String, String)> = vec![
            ("scenario".into(), self.scenario.name().into()),
            ("seed".into(), self.seed.to_string()),
            ("trials".into(), self.trials.to_string()),
            ("tx.subarrays_x".into(), self.tx_subarrays.0.to_string()),
            ("tx.subarrays_y".into(), self.tx_subarrays.1.to_string()),
            ("tx.antennas_x".into(), self.tx_antennas.0.to_string()),
            ("tx.antennas_y".into(), self.tx_antennas.1.to_string()),
            ("rx.subarrays_x".into(), self.rx_subarrays.0.to_string()),
            ("rx.subarrays_y".into(), self.rx_subarrays.1.to_string()),
            ("rx.antennas_x".into(), self.rx_antennas.0.to_string()),
            ("rx.antennas_y".into(), self.rx_antennas.1.to_string()),
            (
                "array.antenna_spacing_wavelengths".into(),
                self.antenna_spacing_wavelengths.to_string(),
            ),
            (
                "array.subarray_spacing_wavelengths".into(),
                self.subarray_spacing_wavelengths.to_string(),
            ),
            ("carrier.center_hz".into(), self.center_hz.to_string()),
            ("carrier.bandwidth_hz".into(), self.bandwidth_hz.to_string()),
            ("carrier.subcarriers".into(), self.subcarriers.to_string()),
            ("link.rf_chains".into(), self.rf_chains.to_string()),
            ("link.streams".into(), self.streams.to_string()),
            ("link.snr_db".into(), self.snr_db.to_string()),
            ("radar.targets".into(), fmt_pairs(&self.targets)),
            ("channel.paths".into(), self.paths.to_string()),
            ("channel.distance_m".into(), self.distance_m.to_string()),
            ("channel.path_loss_exponent".into(), self.path_loss_exponent.to_string()),
            ("channel.nlos_ratio_db".into(), self.nlos_ratio_db.to_string()),
            (
                "channel.aod_azimuth".into(),
                format!("{}:{}", self.aod_azimuth.0, self.aod_azimuth.1),
            ),
            (
                "channel.aod_elevation".into(),
                format!("{}:{}", self.aod_elevation.0, self.aod_elevation.1),
            ),
            (
                "channel.aoa_azimuth".into(),
                format!("{}:{}", self.aoa_azimuth.0, self.aoa_azimuth.1),
            ),
            (
                "channel.aoa_elevation".into(),
                format!("{}:{}", self.aoa_elevation.0, self.aoa_elevation.1),
            ),
            ("channel.normalize_los_gain".into(), self.normalize_los_gain.to_string()),
            (
                "channel.covariance".into(),
                if self.covariance_exact { "exact".into() } else { "los-approx".into() },
            ),
            ("solver.eta".into(), self.eta.to_string()),
            ("solver.mask".into(), self.mask.name().into()),
            ("solver.overlap".into(), self.resolved_solver_overlap().to_string()),
            ("solver.outer_iters".into(), self.outer_iters.to_string()),
            ("solver.outer_tol".into(), self.outer_tol.to_string()),
            ("solver.mmo_iters".into(), self.mmo_iters.to_string()),
            ("solver.mmo_tol".into(), self.mmo_tol.to_string()),
            ("sweep.snr_db".into(), fmt_list(&self.sweep_snr_db)),
            ("sweep.eta".into(), fmt_list(&self.sweep_eta)),
            ("sweep.bandwidth_hz".into(), fmt_list(&self.sweep_bandwidth_hz)),
            ("sweep.spacing_ratio".into(), fmt_list(&self.sweep_spacing_ratio)),
            ("grid.azimuth_start".into(), self.grid_azimuth_start.to_string()),
            ("grid.azimuth_stop".into(), self.grid_azimuth_stop.to_string()),
            ("grid.azimuth_step".into(), self.grid_azimuth_step.to_string()),
            ("grid.elevation".into(), self.grid_elevation.to_string()),
        ];
        if let Some(w) = self.radar_overlap {
            lines.push(("radar.overlap".into(), w.to_string()));
        }
        if let Some((az, el)) = self.fixed_los_aod {
            lines.push(("channel.fixed_los_aod".into(), format!("{az}:{el}")));
        }
        if let Some((az, el)) = self.fixed_los_aoa {
            lines.push(("channel.fixed_los_aoa".into(), format!("{az}:{el}")));
        }
        if let Some(path) = &self.absorption_table {
            lines.push(("channel.absorption_table".into(), path.display().to_string()));
        }
        lines.sort();
        lines
    }
}
