//! Wideband hybrid beamforming for joint radar-communications transmitters
//! built from groups of subarrays.
//!
//! The crate models a transmitter whose antenna array is partitioned into
//! subarrays, each driven by a single phase shifter, so the analog precoder is
//! a frequency-flat unit-modulus matrix constrained by a connectivity mask
//! (fully connected, partitioned, or overlapped). On top of that it provides:
//!
//! - [`geometry`]: array layouts, steering vectors, connectivity masks, and
//!   phase-shifter accounting.
//! - [`channel`]: wideband multipath channel synthesis, the unconstrained
//!   communications precoder, and covariance-based statistical precoding.
//! - [`radar`]: radar-only beamformer targets, transmit covariance, and
//!   beampattern evaluation.
//! - [`mmo`]: the masked complex-circle manifold conjugate-gradient solver
//!   used for the analog precoder subproblem.
//! - [`jrc`]: the alternating-minimization design that trades off
//!   communications fidelity against radar beam placement, plus beam-split
//!   correction for wide bandwidths.
//! - [`metrics`]: spectral efficiency, normalized array gain, and trial
//!   aggregation.
//! - [`config`] and [`experiment`]: the `beamkit` CLI's configuration format
//!   and scenario runners.
//!
//! All randomized operations take explicit seeds and are bit-deterministic
//! for a fixed seed and configuration.

pub mod absorption;
pub mod channel;
pub mod config;
pub mod experiment;
pub mod geometry;
pub mod jrc;
pub mod linalg;
pub mod metrics;
pub mod mmo;
pub mod radar;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid direction: azimuth {azimuth_deg} deg must lie in [-180, 180] and elevation {elevation_deg} deg in [0, 180]")]
    InvalidDirection { azimuth_deg: f64, elevation_deg: f64 },

    #[error("invalid carrier: {0}")]
    InvalidCarrier(String),

    #[error("partitioned mask needs {n_rows} rows divisible by {n_cols} columns")]
    MaskIndivisible { n_rows: usize, n_cols: usize },

    #[error("overlap window {window} outside valid range [{min}, {max}]")]
    MaskOverlapRange { window: usize, min: usize, max: usize },

    #[error("absorption table line {line}: {message}")]
    AbsorptionParse { line: usize, message: String },

    #[error("invalid channel scene: {0}")]
    InvalidScene(String),

    #[error("requested {requested} streams but the channel has numerical rank {rank}")]
    DegenerateChannel { requested: usize, rank: usize },

    #[error("los-approximate covariance requires a line-of-sight path")]
    MissingLosPath,

    #[error("{context}: dimension mismatch ({detail})")]
    DimensionMismatch { context: &'static str, detail: String },

    #[error("{targets} radar targets exceed {streams} streams; the joint design needs K <= N_S")]
    TargetsExceedStreams { targets: usize, streams: usize },

    #[error("identity coupling requires as many targets as streams (K = N_S), got K = {targets}, N_S = {streams}")]
    TargetsStreamsUnequal { targets: usize, streams: usize },

    #[error("trade-off weight eta = {0} outside [0, 1]")]
    EtaOutOfRange(f64),

    #[error("beamformer carries no corrected baseband matrices; run beam-split correction first")]
    MissingCorrection,

    #[error("cannot aggregate an empty result list")]
    EmptyAggregate,

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("config failed validation:\n{0}")]
    ConfigInvalid(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
