//! Array layout, steering vectors, RF-chain connectivity masks, and
//! phase-shifter accounting for grouped-subarray transceivers.
//!
//! The transmitter (and receiver) is a planar array of `n_sub_x * n_sub_y`
//! subarrays in the z = 0 plane, each subarray a `q_x * q_y` antenna grid.
//! One phase shifter drives each whole subarray, so analog beamforming
//! resolves per subarray while the element count inside a subarray only
//! shapes the element-space steering matrix. Subarray centers sit on a grid
//! with pitch (`subarray_pitch_x`, `subarray_pitch_y`) anchored at the
//! origin; antennas sit on a grid of pitch (`antenna_pitch_x`,
//! `antenna_pitch_y`) centered on their subarray.

use crate::linalg::{CMat, CVec};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Speed of light in vacuum, meters per second.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength in meters for a frequency in hertz.
pub fn wavelength(f_hz: f64) -> f64 {
    SPEED_OF_LIGHT / f_hz
}

/// A propagation direction in spherical coordinates.
///
/// Azimuth is measured in the x-y plane from the x axis, elevation from the
/// z axis (so elevation 90 degrees lies in the array plane). The unit vector
/// is `[cos(az) sin(el), sin(az) sin(el), cos(el)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl Direction {
    /// Azimuth must lie in [-180, 180] degrees and elevation in [0, 180].
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        let ok = azimuth_deg.is_finite()
            && elevation_deg.is_finite()
            && (-180.0..=180.0).contains(&azimuth_deg)
            && (0.0..=180.0).contains(&elevation_deg);
        if !ok {
            return Err(Error::InvalidDirection { azimuth_deg, elevation_deg });
        }
        Ok(Direction { azimuth_deg, elevation_deg })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    /// Cartesian unit vector of the direction.
    pub fn unit_vector(&self) -> [f64; 3] {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        [az.cos() * el.sin(), az.sin() * el.sin(), el.cos()]
    }
}

/// Uniformly spaced subcarrier grid around a center frequency.
///
/// Subcarrier `m` (0-indexed) sits at `f_c + (B / M) * (m - (M - 1) / 2)`,
/// so the grid is symmetric about `f_c` and spans slightly less than the
/// full bandwidth `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierConfig {
    center_hz: f64,
    bandwidth_hz: f64,
    n_subcarriers: usize,
}

impl CarrierConfig {
    pub fn new(center_hz: f64, bandwidth_hz: f64, n_subcarriers: usize) -> Result<Self> {
        if !(center_hz.is_finite() && center_hz > 0.0) {
            return Err(Error::InvalidCarrier(format!(
                "center frequency {center_hz} Hz must be positive"
            )));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz >= 0.0) {
            return Err(Error::InvalidCarrier(format!(
                "bandwidth {bandwidth_hz} Hz must be non-negative"
            )));
        }
        if n_subcarriers == 0 {
            return Err(Error::InvalidCarrier("need at least one subcarrier".into()));
        }
        let cfg = CarrierConfig { center_hz, bandwidth_hz, n_subcarriers };
        let lowest = cfg.subcarrier_hz(0);
        if lowest <= 0.0 {
            return Err(Error::InvalidCarrier(format!(
                "lowest subcarrier {lowest} Hz is not positive; bandwidth too wide for the center frequency"
            )));
        }
        Ok(cfg)
    }

    pub fn center_hz(&self) -> f64 {
        self.center_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Frequency of the 0-indexed subcarrier `m`.
    pub fn subcarrier_hz(&self, m: usize) -> f64 {
        assert!(m < self.n_subcarriers, "subcarrier index out of range");
        let m_count = self.n_subcarriers as f64;
        let offset = m as f64 - (m_count - 1.0) / 2.0;
        self.center_hz + self.bandwidth_hz / m_count * offset
    }

    /// All subcarrier frequencies in ascending order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_subcarriers).map(|m| self.subcarrier_hz(m)).collect()
    }

    /// Index of the subcarrier closest to the center frequency (the lower of
    /// the two middle ones when the count is even).
    pub fn center_index(&self) -> usize {
        (self.n_subcarriers - 1) / 2
    }
}

/// Planar array of subarrays in the z = 0 plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    n_sub_x: usize,
    n_sub_y: usize,
    q_x: usize,
    q_y: usize,
    antenna_pitch_x: f64,
    antenna_pitch_y: f64,
    subarray_pitch_x: f64,
    subarray_pitch_y: f64,
}

impl ArrayGeometry {
    // A planar layout genuinely has eight independent scalars (two grids, two
    // pitches, each with an x and y part); grouping them would only move the
    // eight names somewhere else.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_sub_x: usize,
        n_sub_y: usize,
        q_x: usize,
        q_y: usize,
        antenna_pitch_x: f64,
        antenna_pitch_y: f64,
        subarray_pitch_x: f64,
        subarray_pitch_y: f64,
    ) -> Result<Self> {
        if n_sub_x == 0 || n_sub_y == 0 || q_x == 0 || q_y == 0 {
            return Err(Error::InvalidGeometry("all grid counts must be at least 1".into()));
        }
        for (name, v) in [
            ("antenna_pitch_x", antenna_pitch_x),
            ("antenna_pitch_y", antenna_pitch_y),
            ("subarray_pitch_x", subarray_pitch_x),
            ("subarray_pitch_y", subarray_pitch_y),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(ArrayGeometry {
            n_sub_x,
            n_sub_y,
            q_x,
            q_y,
            antenna_pitch_x,
            antenna_pitch_y,
            subarray_pitch_x,
            subarray_pitch_y,
        })
    }

    /// Square helper: `n x n` subarrays of `q x q` antennas with isotropic
    /// pitches.
    pub fn square(n: usize, q: usize, antenna_pitch: f64, subarray_pitch: f64) -> Result<Self> {
        ArrayGeometry::new(n, n, q, q, antenna_pitch, antenna_pitch, subarray_pitch, subarray_pitch)
    }

    pub fn n_sub_x(&self) -> usize {
        self.n_sub_x
    }

    pub fn n_sub_y(&self) -> usize {
        self.n_sub_y
    }

    pub fn q_x(&self) -> usize {
        self.q_x
    }

    pub fn q_y(&self) -> usize {
        self.q_y
    }

    /// Number of subarrays.
    pub fn num_subarrays(&self) -> usize {
        self.n_sub_x * self.n_sub_y
    }

    /// Antennas per subarray.
    pub fn antennas_per_subarray(&self) -> usize {
        self.q_x * self.q_y
    }

    /// Total antenna count.
    pub fn num_antennas(&self) -> usize {
        self.num_subarrays() * self.antennas_per_subarray()
    }

    /// True when neighboring subarrays' antenna footprints touch or overlap,
    /// which usually indicates a misconfigured pitch pair.
    pub fn subarrays_overlap(&self) -> bool {
        let span_x = (self.q_x as f64 - 1.0) * self.antenna_pitch_x;
        let span_y = (self.q_y as f64 - 1.0) * self.antenna_pitch_y;
        (self.n_sub_x > 1 && span_x >= self.subarray_pitch_x)
            || (self.n_sub_y > 1 && span_y >= self.subarray_pitch_y)
    }

    /// Flat subarray index for grid coordinates `(p, s)`; x varies fastest.
    pub fn subarray_index(&self, p: usize, s: usize) -> usize {
        assert!(p < self.n_sub_x && s < self.n_sub_y, "subarray grid index out of range");
        p + s * self.n_sub_x
    }

    /// Center of subarray `(p, s)` in meters.
    pub fn subarray_center(&self, p: usize, s: usize) -> [f64; 3] {
        assert!(p < self.n_sub_x && s < self.n_sub_y, "subarray grid index out of range");
        [p as f64 * self.subarray_pitch_x, s as f64 * self.subarray_pitch_y, 0.0]
    }

    /// Offset of antenna `(u, v)` from its subarray center; the antenna grid
    /// is centered, so offsets are symmetric about zero.
    pub fn antenna_offset(&self, u: usize, v: usize) -> [f64; 3] {
        assert!(u < self.q_x && v < self.q_y, "antenna grid index out of range");
        [
            (u as f64 - (self.q_x as f64 - 1.0) / 2.0) * self.antenna_pitch_x,
            (v as f64 - (self.q_y as f64 - 1.0) / 2.0) * self.antenna_pitch_y,
            0.0,
        ]
    }

    /// Absolute position of antenna `i` of subarray `n` (both flat indices;
    /// x varies fastest inside each grid).
    pub fn antenna_position(&self, n: usize, i: usize) -> [f64; 3] {
        assert!(n < self.num_subarrays(), "subarray index out of range");
        assert!(i < self.antennas_per_subarray(), "antenna index out of range");
        let p = n % self.n_sub_x;
        let s = n / self.n_sub_x;
        let u = i % self.q_x;
        let v = i / self.q_x;
        let c = self.subarray_center(p, s);
        let o = self.antenna_offset(u, v);
        [c[0] + o[0], c[1] + o[1], c[2] + o[2]]
    }

    /// Positions of every antenna, grouped by subarray: index `n * Q + i`
    /// holds antenna `i` of subarray `n`.
    pub fn antenna_positions(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.num_antennas());
        for n in 0..self.num_subarrays() {
            for i in 0..self.antennas_per_subarray() {
                out.push(self.antenna_position(n, i));
            }
        }
        out
    }

    /// Element-space steering matrix: entry `(n, i)` is the response of
    /// antenna `i` in subarray `n` toward `dir` at frequency `f_hz`, scaled
    /// by `1 / sqrt(num_subarrays)` so each column has norm one.
    pub fn steering_matrix(&self, dir: Direction, f_hz: f64) -> CMat {
        let omega = dir.unit_vector();
        let wave = 2.0 * PI / wavelength(f_hz);
        let scale = 1.0 / (self.num_subarrays() as f64).sqrt();
        CMat::from_fn(self.num_subarrays(), self.antennas_per_subarray(), |n, i| {
            let p = self.antenna_position(n, i);
            let phase = -wave * (p[0] * omega[0] + p[1] * omega[1] + p[2] * omega[2]);
            Complex64::from_polar(scale, phase)
        })
    }

    /// Subarray-resolution steering vector: the phase of each subarray's
    /// center toward `dir` at `f_hz`, scaled by `1 / sqrt(num_subarrays)`.
    /// This is the natural target for per-subarray phase shifters.
    pub fn subarray_steering(&self, dir: Direction, f_hz: f64) -> CVec {
        let omega = dir.unit_vector();
        let wave = 2.0 * PI / wavelength(f_hz);
        let scale = 1.0 / (self.num_subarrays() as f64).sqrt();
        CVec::from_fn(self.num_subarrays(), |n, _| {
            let p = n % self.n_sub_x;
            let s = n / self.n_sub_x;
            let c = self.subarray_center(p, s);
            let phase = -wave * (c[0] * omega[0] + c[1] * omega[1] + c[2] * omega[2]);
            Complex64::from_polar(scale, phase)
        })
    }
}

/// How subarrays map onto RF chains in the analog precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Every subarray connects to every RF chain.
    Fully,
    /// Subarrays are partitioned into equal contiguous blocks, one per RF
    /// chain. Requires the subarray count to be divisible by the chain count.
    Partial,
    /// Each RF chain drives a contiguous window of `window` subarrays;
    /// windows are spread evenly and may overlap.
    Overlapped { window: usize },
}

/// Support pattern of the analog precoder: which entries of the
/// `n_rows x n_cols` matrix (subarrays x RF chains) may be non-zero.
///
/// Every kind yields one contiguous row range per column, with column start
/// indices non-decreasing left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityMask {
    n_rows: usize,
    n_cols: usize,
    kind: MaskKind,
    col_start: Vec<usize>,
    col_len: Vec<usize>,
}

impl ConnectivityMask {
    pub fn build(n_rows: usize, n_cols: usize, kind: MaskKind) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidGeometry("mask dimensions must be at least 1".into()));
        }
        let (col_start, col_len) = match kind {
            MaskKind::Fully => (vec![0; n_cols], vec![n_rows; n_cols]),
            MaskKind::Partial => {
                if !n_rows.is_multiple_of(n_cols) {
                    return Err(Error::MaskIndivisible { n_rows, n_cols });
                }
                let len = n_rows / n_cols;
                ((0..n_cols).map(|j| j * len).collect(), vec![len; n_cols])
            }
            MaskKind::Overlapped { window } => {
                // The window must be long enough that the evenly spread
                // columns jointly cover every row, and short enough that the
                // spread is well defined.
                let min = n_rows.div_ceil(n_cols);
                let max = n_rows - n_cols.min(n_rows) + 1;
                if window < min || window > max {
                    return Err(Error::MaskOverlapRange { window, min, max });
                }
                let starts: Vec<usize> = (0..n_cols)
                    .map(|j| {
                        if n_cols == 1 {
                            0
                        } else {
                            let span = (n_rows - window) as f64;
                            (j as f64 * span / (n_cols as f64 - 1.0)).round() as usize
                        }
                    })
                    .collect();
                (starts, vec![window; n_cols])
            }
        };
        Ok(ConnectivityMask { n_rows, n_cols, kind, col_start, col_len })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    /// Row range allowed to be non-zero in column `j`.
    pub fn column_range(&self, j: usize) -> std::ops::Range<usize> {
        assert!(j < self.n_cols, "mask column out of range");
        self.col_start[j]..self.col_start[j] + self.col_len[j]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n_rows && j < self.n_cols && self.column_range(j).contains(&i)
    }

    /// Number of entries on the support.
    pub fn support_len(&self) -> usize {
        self.col_len.iter().sum()
    }

    /// Support positions `(row, col)` in column-major order.
    pub fn matrix_support(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.support_len());
        for j in 0..self.n_cols {
            for i in self.column_range(j) {
                out.push((i, j));
            }
        }
        out
    }

    /// Support positions of the column-major vectorization (`col * n_rows +
    /// row`), in ascending order.
    pub fn vector_support(&self) -> Vec<usize> {
        self.matrix_support().iter().map(|&(i, j)| j * self.n_rows + i).collect()
    }

    /// Complement of [`ConnectivityMask::vector_support`], ascending.
    pub fn vector_complement(&self) -> Vec<usize> {
        let support = self.vector_support();
        let mut out = Vec::with_capacity(self.n_rows * self.n_cols - support.len());
        let mut iter = support.iter().copied().peekable();
        for t in 0..self.n_rows * self.n_cols {
            if iter.peek() == Some(&t) {
                iter.next();
            } else {
                out.push(t);
            }
        }
        out
    }

    /// Builds the dense matrix whose support entries are `values` in
    /// column-major support order and whose other entries are zero.
    pub fn scatter(&self, values: &[Complex64]) -> CMat {
        assert_eq!(values.len(), self.support_len(), "support value count mismatch");
        let mut m = CMat::zeros(self.n_rows, self.n_cols);
        for (t, &(i, j)) in self.matrix_support().iter().enumerate() {
            m[(i, j)] = values[t];
        }
        m
    }

    /// Reads the support entries of `m` in column-major support order.
    pub fn gather(&self, m: &CMat) -> Vec<Complex64> {
        assert_eq!(m.shape(), (self.n_rows, self.n_cols), "matrix shape mismatch");
        self.matrix_support().iter().map(|&(i, j)| m[(i, j)]).collect()
    }

    /// Zeroes every entry of `m` off the support.
    pub fn zero_off_support(&self, m: &mut CMat) {
        assert_eq!(m.shape(), (self.n_rows, self.n_cols), "matrix shape mismatch");
        for j in 0..self.n_cols {
            let range = self.column_range(j);
            for i in 0..self.n_rows {
                if !range.contains(&i) {
                    m[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// Hardware architecture whose phase-shifter budget is being counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseShifterArchitecture {
    /// One shifter per antenna per RF chain.
    PerAntennaFully,
    /// One shifter per antenna, each antenna tied to a single chain.
    PerAntennaPartial,
    /// One shifter per subarray per RF chain.
    PerSubarrayFully,
    /// One shifter per subarray, each subarray tied to a single chain.
    PerSubarrayPartial,
    /// One shifter per subarray inside each chain's window of `window`
    /// subarrays.
    PerSubarrayOverlapped { window: usize },
}

/// Number of phase shifters the architecture needs for `n_sub` subarrays of
/// `q` antennas and `n_rf` RF chains.
pub fn phase_shifter_count(
    arch: PhaseShifterArchitecture,
    n_sub: usize,
    q: usize,
    n_rf: usize,
) -> u64 {
    let n_sub = n_sub as u64;
    let q = q as u64;
    let n_rf = n_rf as u64;
    match arch {
        PhaseShifterArchitecture::PerAntennaFully => n_sub * q * n_rf,
        PhaseShifterArchitecture::PerAntennaPartial => n_sub * q,
        PhaseShifterArchitecture::PerSubarrayFully => n_sub * n_rf,
        PhaseShifterArchitecture::PerSubarrayPartial => n_sub,
        PhaseShifterArchitecture::PerSubarrayOverlapped { window } => n_rf * window as u64,
    }
}
