//! Radar-side targets for the joint design: steering-based beamformers,
//! transmit covariance, and beampattern evaluation.

use crate::geometry::{ArrayGeometry, ConnectivityMask, Direction, MaskKind};
use crate::linalg::{CMat, CVec};
use crate::{Error, Result};

/// Directions the radar must illuminate.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarScene {
    pub targets: Vec<Direction>,
}

impl RadarScene {
    pub fn new(targets: Vec<Direction>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidScene("radar scene needs at least one target".into()));
        }
        Ok(RadarScene { targets })
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }
}

/// Radar-only analog reference: one column per target, each a masked
/// subarray-resolution steering vector.
#[derive(Debug, Clone)]
pub struct RadarBeamformer {
    /// `N_T x K` matrix whose column `k` steers toward target `k` on its
    /// mask window and is zero elsewhere.
    pub weights: CMat,
    /// The mask the columns were restricted to.
    pub mask: ConnectivityMask,
}

impl RadarBeamformer {
    pub fn n_targets(&self) -> usize {
        self.weights.ncols()
    }
}

/// Builds the radar reference beamformer at the reference frequency
/// `f_ref_hz` (normally the carrier center).
///
/// With `overlap_window = None` each target gets a partitioned block of
/// `N_T / K` subarrays (so `N_T` must be divisible by `K`); with
/// `Some(window)` the blocks are overlapped windows of that length. Each
/// column is the target's steering vector restricted to its block, so its
/// squared norm is the block length over `N_T`.
pub fn radar_beamformer(
    scene: &RadarScene,
    tx: &ArrayGeometry,
    f_ref_hz: f64,
    overlap_window: Option<usize>,
) -> Result<RadarBeamformer> {
    let n_t = tx.num_subarrays();
    let k = scene.n_targets();
    let kind = match overlap_window {
        None => MaskKind::Partial,
        Some(window) => MaskKind::Overlapped { window },
    };
    let mask = ConnectivityMask::build(n_t, k, kind)?;
    let mut weights = CMat::zeros(n_t, k);
    for (j, dir) in scene.targets.iter().enumerate() {
        let steer = tx.subarray_steering(*dir, f_ref_hz);
        for i in mask.column_range(j) {
            weights[(i, j)] = steer[i];
        }
    }
    Ok(RadarBeamformer { weights, mask })
}

/// Transmit covariance of one subcarrier's hybrid precoder, assuming unit-
/// power uncorrelated streams: `(F_RF F_BB)(F_RF F_BB)ᴴ`.
pub fn transmit_covariance(f_rf: &CMat, f_bb_m: &CMat) -> CMat {
    let eff = f_rf * f_bb_m;
    &eff * eff.adjoint()
}

/// Transmit beampattern: radiated power toward each grid direction at
/// frequency `f_hz` for transmit covariance `r`, i.e. the quadratic form of
/// `r` over the element-space steering matrix summed across subarray
/// elements.
pub fn beampattern(r: &CMat, tx: &ArrayGeometry, grid: &[Direction], f_hz: f64) -> Vec<f64> {
    assert_eq!(r.nrows(), tx.num_subarrays(), "covariance does not match the array");
    grid.iter()
        .map(|dir| {
            let a = tx.steering_matrix(*dir, f_hz);
            (a.adjoint() * r * &a).trace().re
        })
        .collect()
}

/// Beampattern of a single effective precoding column `f`: `|a(dir)ᴴ f|^2`
/// summed over the subarray elements.
pub fn column_pattern(f: &CVec, tx: &ArrayGeometry, grid: &[Direction], f_hz: f64) -> Vec<f64> {
    assert_eq!(f.len(), tx.num_subarrays(), "column does not match the array");
    grid.iter()
        .map(|dir| {
            let a = tx.steering_matrix(*dir, f_hz);
            let proj = a.adjoint() * f;
            proj.iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
        .collect()
}
