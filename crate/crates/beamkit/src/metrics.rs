//! Link metrics: spectral efficiency, normalized array gain, and trial
//! aggregation.

use crate::channel::ChannelRealization;
use crate::geometry::{ArrayGeometry, Direction};
use crate::jrc::HybridBeamformer;
use crate::linalg::{log2_det_i_plus_gram, CMat, CVec};
use crate::{Error, Result};

/// Receiver operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrConfig {
    /// Signal-to-noise ratio in dB (transmit power over noise power).
    pub snr_db: f64,
}

impl SnrConfig {
    pub fn linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// Mean spectral efficiency over subcarriers, in bits/s/Hz, for arbitrary
/// effective precoders (one `N_T x N_S` matrix per subcarrier):
/// `(1/M) * sum_m log2 det(I + snr / N_S * (H F)(H F)ᴴ)`.
pub fn spectral_efficiency_for(
    channel: &ChannelRealization,
    effective: &[CMat],
    snr: SnrConfig,
) -> f64 {
    assert_eq!(effective.len(), channel.n_subcarriers(), "per-subcarrier precoder count mismatch");
    let n_s = effective[0].ncols() as f64;
    let c = snr.linear() / n_s;
    let mut acc = 0.0;
    for (h, f) in channel.h.iter().zip(effective.iter()) {
        let hf = h * f;
        acc += log2_det_i_plus_gram(&hf, c);
    }
    acc / channel.n_subcarriers() as f64
}

/// Spectral efficiency of a hybrid design; `corrected` selects the
/// beam-split-corrected baseband matrices.
pub fn spectral_efficiency(
    channel: &ChannelRealization,
    bf: &HybridBeamformer,
    snr: SnrConfig,
    corrected: bool,
) -> Result<f64> {
    let effective: Vec<CMat> = if corrected {
        (0..bf.n_subcarriers()).map(|m| bf.effective_corrected(m)).collect::<Result<Vec<_>>>()?
    } else {
        (0..bf.n_subcarriers()).map(|m| bf.effective(m)).collect()
    };
    Ok(spectral_efficiency_for(channel, &effective, snr))
}

/// Array gain of an effective precoding column toward each grid direction at
/// `f_hz`, normalized by the maximum over the grid (so the peak is 1).
///
/// The gain at a direction is `|a(dir)ᴴ f|` summed over the subarray
/// elements (root of the radiated power of the rank-1 pattern).
pub fn array_gain(f: &CVec, tx: &ArrayGeometry, grid: &[Direction], f_hz: f64) -> Vec<f64> {
    let raw: Vec<f64> =
        crate::radar::column_pattern(f, tx, grid, f_hz).into_iter().map(|p| p.sqrt()).collect();
    let max = raw.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        raw.into_iter().map(|v| v / max).collect()
    } else {
        raw
    }
}

/// Mean and standard error of a list of per-trial values, in trial order.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
