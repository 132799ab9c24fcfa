//! Wideband multipath channel synthesis and the precoders derived from it.
//!
//! Each realization draws a line-of-sight path plus a configurable number of
//! reflected paths. Departure and arrival angles come from uniform ranges,
//! reflected-path gains sit a fixed number of decibels below the
//! line-of-sight gain with a random frequency-flat phase, and the
//! line-of-sight gain follows spreading loss with a configurable exponent
//! plus molecular absorption. The per-subcarrier channel is
//!
//! `H[m] = gamma * sum_l alpha[l][m] * A_R(aoa_l, f_m) * A_T(aod_l, f_m)ᴴ`
//!
//! with `gamma = sqrt(N_T * N_R / L)` and steering matrices at subarray x
//! element resolution, so `H[m]` maps transmit subarrays to receive
//! subarrays.

use crate::absorption::AbsorptionTable;
use crate::geometry::{ArrayGeometry, CarrierConfig, Direction};
use crate::linalg::{hermitian_eigen_desc, thin_svd, CMat};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Line-of-sight amplitude gain at distance `d_m` and frequency `f_hz`:
/// spreading loss with exponent `path_loss_exponent` (amplitude exponent
/// half of it) attenuated by molecular absorption `kappa_per_m`.
///
/// Returns a positive real amplitude.
pub fn los_gain(f_hz: f64, d_m: f64, path_loss_exponent: f64, kappa_per_m: f64) -> Result<f64> {
    if !(f_hz.is_finite() && f_hz > 0.0) {
        return Err(Error::InvalidScene(format!("frequency {f_hz} Hz must be positive")));
    }
    if !(d_m.is_finite() && d_m > 0.0) {
        return Err(Error::InvalidScene(format!("distance {d_m} m must be positive")));
    }
    if !(path_loss_exponent.is_finite() && path_loss_exponent >= 0.0) {
        return Err(Error::InvalidScene(format!(
            "path loss exponent {path_loss_exponent} must be non-negative"
        )));
    }
    if !(kappa_per_m.is_finite() && kappa_per_m >= 0.0) {
        return Err(Error::InvalidScene(format!(
            "absorption coefficient {kappa_per_m} must be non-negative"
        )));
    }
    let spreading = crate::geometry::SPEED_OF_LIGHT / (4.0 * PI * f_hz * d_m);
    Ok(spreading.powf(path_loss_exponent / 2.0) * (-0.5 * kappa_per_m * d_m).exp())
}

/// Inclusive uniform angle range in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    pub lo_deg: f64,
    pub hi_deg: f64,
}

impl AngleRange {
    pub fn new(lo_deg: f64, hi_deg: f64) -> Self {
        AngleRange { lo_deg, hi_deg }
    }

    fn validate(&self, name: &str, min: f64, max: f64) -> Result<()> {
        let ok = self.lo_deg.is_finite()
            && self.hi_deg.is_finite()
            && self.lo_deg <= self.hi_deg
            && self.lo_deg >= min
            && self.hi_deg <= max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!(
                "{name} range [{}, {}] must be non-empty within [{min}, {max}]",
                self.lo_deg, self.hi_deg
            )))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo_deg == self.hi_deg {
            self.lo_deg
        } else {
            rng.random_range(self.lo_deg..self.hi_deg)
        }
    }
}

/// Everything that parameterizes a channel draw except the geometry, carrier
/// grid, and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScene {
    /// Total path count `L` including the line-of-sight path; `L - 1`
    /// reflected paths are drawn.
    pub n_paths: usize,
    /// Link distance in meters.
    pub distance_m: f64,
    /// Power path-loss exponent (free space is 2).
    pub path_loss_exponent: f64,
    /// Reflected-path power relative to line of sight, in dB (typically
    /// negative).
    pub nlos_ratio_db: f64,
    pub aod_azimuth: AngleRange,
    pub aod_elevation: AngleRange,
    pub aoa_azimuth: AngleRange,
    pub aoa_elevation: AngleRange,
    /// Pins the line-of-sight departure and arrival instead of drawing them.
    /// The draws still happen, so pinning never perturbs the reflected
    /// paths' angles for a given seed.
    pub fixed_los: Option<(Direction, Direction)>,
    /// Molecular absorption table evaluated per subcarrier.
    pub absorption: AbsorptionTable,
    /// Rescale all path gains so the line-of-sight gain is exactly 1 on
    /// every subcarrier. Keeps spectral-efficiency evaluation conditioned on
    /// the receiver-side SNR rather than on absolute propagation loss, which
    /// at sub-terahertz scales would underflow `log2(1 + x)` entirely.
    pub normalize_los_gain: bool,
}

impl Default for ChannelScene {
    fn default() -> Self {
        ChannelScene {
            n_paths: 5,
            distance_m: 10.0,
            path_loss_exponent: 4.0,
            nlos_ratio_db: -10.0,
            aod_azimuth: AngleRange::new(-150.0, 150.0),
            aod_elevation: AngleRange::new(70.0, 90.0),
            aoa_azimuth: AngleRange::new(-150.0, 150.0),
            aoa_elevation: AngleRange::new(70.0, 90.0),
            fixed_los: None,
            absorption: AbsorptionTable::zero(),
            normalize_los_gain: true,
        }
    }
}

/// One propagation path of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PathParams {
    pub is_los: bool,
    pub aod: Direction,
    pub aoa: Direction,
    /// Complex gain per subcarrier.
    pub gains: Vec<Complex64>,
}

/// A drawn channel: per-subcarrier matrices plus the paths that generated
/// them.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `H[m]`, one `N_R x N_T` matrix per subcarrier.
    pub h: Vec<CMat>,
    pub paths: Vec<PathParams>,
    /// Normalization `sqrt(N_T * N_R / L)` baked into `h`.
    pub gamma: f64,
    pub carrier: CarrierConfig,
    pub distance_m: f64,
    pub path_loss_exponent: f64,
}

impl ChannelRealization {
    pub fn n_subcarriers(&self) -> usize {
        self.h.len()
    }

    pub fn n_rx(&self) -> usize {
        self.h[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h[0].ncols()
    }
}

/// Draws a channel realization between two arrays.
///
/// Angles are drawn per path in a fixed order (departure azimuth, departure
/// elevation, arrival azimuth, arrival elevation; line of sight first), then
/// one frequency-flat phase per reflected path, all from a ChaCha8 stream
/// seeded with `seed`, so realizations are reproducible bit for bit.
///
/// The arrays must share the per-subarray antenna count so the element-space
/// inner products are well formed.
pub fn generate_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    carrier: &CarrierConfig,
    scene: &ChannelScene,
    seed: u64,
) -> Result<ChannelRealization> {
    if tx.antennas_per_subarray() != rx.antennas_per_subarray() {
        return Err(Error::DimensionMismatch {
            context: "generate_channel",
            detail: format!(
                "transmit subarrays have {} antennas but receive subarrays have {}",
                tx.antennas_per_subarray(),
                rx.antennas_per_subarray()
            ),
        });
    }
    if scene.n_paths == 0 {
        return Err(Error::InvalidScene("need at least the line-of-sight path".into()));
    }
    if !(scene.distance_m.is_finite() && scene.distance_m > 0.0) {
        return Err(Error::InvalidScene(format!(
            "distance {} m must be positive",
            scene.distance_m
        )));
    }
    if !scene.nlos_ratio_db.is_finite() {
        return Err(Error::InvalidScene(format!(
            "reflected-path ratio {} dB must be finite",
            scene.nlos_ratio_db
        )));
    }
    scene.aod_azimuth.validate("departure azimuth", -180.0, 180.0)?;
    scene.aod_elevation.validate("departure elevation", 0.0, 180.0)?;
    scene.aoa_azimuth.validate("arrival azimuth", -180.0, 180.0)?;
    scene.aoa_elevation.validate("arrival elevation", 0.0, 180.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_count = scene.n_paths;

    let mut aods = Vec::with_capacity(l_count);
    let mut aoas = Vec::with_capacity(l_count);
    for _ in 0..l_count {
        let aod_az = scene.aod_azimuth.sample(&mut rng);
        let aod_el = scene.aod_elevation.sample(&mut rng);
        let aoa_az = scene.aoa_azimuth.sample(&mut rng);
        let aoa_el = scene.aoa_elevation.sample(&mut rng);
        aods.push(Direction::new(aod_az, aod_el)?);
        aoas.push(Direction::new(aoa_az, aoa_el)?);
    }
    if let Some((aod, aoa)) = scene.fixed_los {
        aods[0] = aod;
        aoas[0] = aoa;
    }
    let nlos_phases: Vec<f64> = (1..l_count).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let m_count = carrier.n_subcarriers();
    let nlos_amp = 10f64.powf(scene.nlos_ratio_db / 20.0);
    let mut paths = Vec::with_capacity(l_count);
    for l in 0..l_count {
        let mut gains = Vec::with_capacity(m_count);
        for m in 0..m_count {
            let f = carrier.subcarrier_hz(m);
            let kappa = scene.absorption.coefficient(f);
            let g = los_gain(f, scene.distance_m, scene.path_loss_exponent, kappa)?;
            let alpha = if l == 0 {
                Complex64::new(g, 0.0)
            } else {
                Complex64::from_polar(g * nlos_amp, nlos_phases[l - 1])
            };
            gains.push(alpha);
        }
        paths.push(PathParams { is_los: l == 0, aod: aods[l], aoa: aoas[l], gains });
    }

    if scene.normalize_los_gain {
        for m in 0..m_count {
            let g = paths[0].gains[m].norm();
            for path in paths.iter_mut() {
                path.gains[m] /= g;
            }
        }
    }

    let n_t = tx.num_subarrays();
    let n_r = rx.num_subarrays();
    let gamma = ((n_t * n_r) as f64 / l_count as f64).sqrt();
    let mut h = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let f = carrier.subcarrier_hz(m);
        let mut h_m = CMat::zeros(n_r, n_t);
        for path in &paths {
            let a_r = rx.steering_matrix(path.aoa, f);
            let a_t = tx.steering_matrix(path.aod, f);
            h_m += a_r * a_t.adjoint() * (path.gains[m] * gamma);
        }
        h.push(h_m);
    }

    Ok(ChannelRealization {
        h,
        paths,
        gamma,
        carrier: *carrier,
        distance_m: scene.distance_m,
        path_loss_exponent: scene.path_loss_exponent,
    })
}

/// Optimal fully digital precoder for one subcarrier: the top `n_streams`
/// right singular vectors of `h_m`, columns phase-fixed so the dominant
/// entry of each is real positive. Errors when the channel's numerical rank
/// cannot support that many streams.
pub fn unconstrained_precoder(h_m: &CMat, n_streams: usize) -> Result<CMat> {
    let svd = thin_svd(h_m);
    let cutoff = svd.s.first().copied().unwrap_or(0.0) * 1e-10;
    let rank = svd.s.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    if n_streams > rank {
        return Err(Error::DegenerateChannel { requested: n_streams, rank });
    }
    Ok(svd.v.columns(0, n_streams).into_owned())
}

/// Which paths contribute to the transmit-side covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    /// All drawn paths.
    Exact,
    /// Line-of-sight path only: the statistical knowledge a transmitter
    /// realistically tracks.
    LosApprox,
}

/// Transmit-side channel covariance at subcarrier `m`:
/// `gamma^2 * sum_l |alpha[l][m]|^2 * A_T A_Tᴴ` over the selected paths.
pub fn covariance(
    realization: &ChannelRealization,
    tx: &ArrayGeometry,
    m: usize,
    mode: CovarianceMode,
) -> Result<CMat> {
    let f = realization.carrier.subcarrier_hz(m);
    let n_t = tx.num_subarrays();
    let mut c = CMat::zeros(n_t, n_t);
    let mut used = 0usize;
    for path in &realization.paths {
        if mode == CovarianceMode::LosApprox && !path.is_los {
            continue;
        }
        let a_t = tx.steering_matrix(path.aod, f);
        let power = path.gains[m].norm_sqr() * realization.gamma * realization.gamma;
        c += (&a_t * a_t.adjoint()) * Complex64::new(power, 0.0);
        used += 1;
    }
    if used == 0 {
        return Err(Error::MissingLosPath);
    }
    Ok(c)
}

/// Precoder built from second-order statistics only: the top `n_streams`
/// eigenvectors of the covariance. Unlike [`unconstrained_precoder`] this
/// never fails on rank: trailing columns may span the covariance's null
/// space when the covariance is low rank, which still maximizes the captured
/// transmit power.
pub fn statistical_precoder(c: &CMat, n_streams: usize) -> Result<CMat> {
    if n_streams > c.nrows() {
        return Err(Error::DimensionMismatch {
            context: "statistical_precoder",
            detail: format!(
                "{n_streams} streams exceed the {} x {} covariance",
                c.nrows(),
                c.ncols()
            ),
        });
    }
    let (_, vectors) = hermitian_eigen_desc(c);
    Ok(vectors.columns(0, n_streams).into_owned())
}
