//! Joint radar-communications hybrid beamformer design.
//!
//! The design picks a frequency-flat analog precoder `F_RF` (masked,
//! unit-modulus) and per-subcarrier baseband precoders `F_BB[m]` so the
//! effective precoder tracks a weighted target
//!
//! `F_CR[m] = eta * F_C[m] + (1 - eta) * F_R * P[m]`
//!
//! where `F_C[m]` is the communications-optimal precoder, `F_R` holds the
//! radar steering columns, and `P[m]` is a row-orthonormal coupling matrix
//! that lets the radar columns ride on top of the communications streams.
//! Alternating minimization cycles the coupling update, the baseband
//! least-squares step (with a transmit-power renormalization), and the
//! manifold solver for `F_RF`; a cost guard rejects any cycle that would
//! increase the joint fit, so the reported cost trace is non-increasing.
//!
//! Beam-split correction derives per-subcarrier analog phases from the
//! designed ones by scaling with `f_m / f_c`, which re-aims each subcarrier's
//! beam at the direction the design intended at the center frequency; the
//! corrected analog response is then folded into the baseband matrices, which
//! is exactly what a true-time-delay front end would realize.

use crate::geometry::{CarrierConfig, ConnectivityMask};
use crate::linalg::{frob, pseudo_inverse, thin_svd, CMat};
use crate::mmo::{self, ManifoldPoint, MmoOptions, MmoStatus, ReducedProblem};
use crate::radar::RadarBeamformer;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Knobs of the alternating design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JrcOptions {
    /// Outer alternating cycles.
    pub max_outer_iters: usize,
    /// Stop when the joint cost's relative change drops below this.
    pub rel_cost_tol: f64,
    /// Inner manifold-solver options.
    pub mmo: MmoOptions,
    /// Keep the radar coupling pinned to the identity instead of updating
    /// it. Requires as many streams as targets and is what the closed-form
    /// combination rule assumes on its radar input.
    pub fix_coupling_identity: bool,
}

impl Default for JrcOptions {
    fn default() -> Self {
        JrcOptions {
            max_outer_iters: 10,
            rel_cost_tol: 1e-6,
            mmo: MmoOptions::default(),
            fix_coupling_identity: false,
        }
    }
}

/// One joint design instance.
pub struct JrcProblem<'a> {
    /// Communications-optimal precoder per subcarrier, each `N_T x N_S`.
    pub comm_precoders: &'a [CMat],
    /// Radar reference columns (`N_T x K`, `K <= N_S`).
    pub radar: &'a RadarBeamformer,
    /// Trade-off weight: 1 is communications-only, 0 radar-only.
    pub eta: f64,
    /// Connectivity of the analog precoder (`N_T x N_RF`).
    pub mask: &'a ConnectivityMask,
    pub options: JrcOptions,
}

/// The designed hybrid precoder.
#[derive(Debug, Clone)]
pub struct HybridBeamformer {
    /// Frequency-flat analog precoder on the mask support, entries of
    /// modulus `1 / sqrt(N_T)`.
    pub f_rf: CMat,
    /// Baseband precoder per subcarrier, each normalized so the effective
    /// precoder carries power `N_S`.
    pub f_bb: Vec<CMat>,
    /// Beam-split-corrected baseband precoders, when
    /// [`beam_split_correct`] has been applied.
    pub f_bb_corrected: Option<Vec<CMat>>,
    /// The mask `f_rf` satisfies.
    pub mask: ConnectivityMask,
}

impl HybridBeamformer {
    pub fn n_subcarriers(&self) -> usize {
        self.f_bb.len()
    }

    pub fn n_streams(&self) -> usize {
        self.f_bb[0].ncols()
    }

    /// Effective precoder `F_RF * F_BB[m]`.
    pub fn effective(&self, m: usize) -> CMat {
        &self.f_rf * &self.f_bb[m]
    }

    /// Effective precoder using the corrected baseband matrices.
    pub fn effective_corrected(&self, m: usize) -> Result<CMat> {
        let corrected = self.f_bb_corrected.as_ref().ok_or(Error::MissingCorrection)?;
        Ok(&self.f_rf * &corrected[m])
    }

    /// Computes and stores beam-split-corrected baseband precoders.
    pub fn apply_beam_split_correction(&mut self, carrier: &CarrierConfig) {
        self.f_bb_corrected = Some(beam_split_correct(self, carrier));
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative cost change fell below the tolerance.
    Converged,
    /// Outer iteration budget exhausted.
    IterationLimit,
    /// A cycle would have increased the joint cost and was rolled back.
    CostGuard,
}

/// Outer-loop trace.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Joint cost `|| F_RF F_BB - F_CR ||_F` (stacked over subcarriers)
    /// after initialization and after each accepted cycle. Non-increasing.
    pub cost_trace: Vec<f64>,
    pub stop: StopReason,
    /// How many cycles hit a rank-deficient analog precoder in the
    /// least-squares step.
    pub rank_deficient_cycles: usize,
    /// Status of the last manifold solve.
    pub last_mmo_status: Option<MmoStatus>,
}

/// Coupling update: the orthogonal-Procrustes maximizer of
/// `Re Trace(Pᴴ F_Rᴴ F_RF F_BB[m])` over row-orthonormal `P`, i.e. `U Vᴴ`
/// from the thin SVD of `F_Rᴴ F_RF F_BB[m]`.
pub fn update_coupling(radar_weights: &CMat, f_rf: &CMat, f_bb_m: &CMat) -> CMat {
    let a = radar_weights.adjoint() * f_rf * f_bb_m;
    let svd = thin_svd(&a);
    &svd.u * svd.v.adjoint()
}

/// Unnormalized least-squares baseband update `F_RF^+ * F_CR[m]`.
pub fn least_squares_baseband(f_rf: &CMat, f_cr_m: &CMat) -> (CMat, bool) {
    let (pinv, rank) = pseudo_inverse(f_rf, 1e-12);
    (pinv * f_cr_m, rank < f_rf.ncols())
}

/// Baseband update: least squares followed by the transmit-power
/// renormalization `|| F_RF F_BB[m] ||_F = sqrt(N_S)`.
pub fn update_baseband(f_rf: &CMat, f_cr_m: &CMat) -> (CMat, bool) {
    let (ls, rank_deficient) = least_squares_baseband(f_rf, f_cr_m);
    (renormalize(f_rf, ls), rank_deficient)
}

fn renormalize(f_rf: &CMat, f_bb_m: CMat) -> CMat {
    let n_s = f_bb_m.ncols() as f64;
    let power = frob(&(f_rf * &f_bb_m));
    if power > 0.0 {
        f_bb_m * Complex64::new(n_s.sqrt() / power, 0.0)
    } else {
        f_bb_m
    }
}

fn stack_columns(mats: &[CMat]) -> CMat {
    let rows = mats[0].nrows();
    let cols: usize = mats.iter().map(|m| m.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for m in mats {
        out.columns_mut(at, m.ncols()).copy_from(m);
        at += m.ncols();
    }
    out
}

fn joint_cost(f_rf: &CMat, f_bb: &[CMat], f_cr: &[CMat]) -> f64 {
    let mut acc = 0.0;
    for (bb, cr) in f_bb.iter().zip(f_cr.iter()) {
        acc += crate::linalg::frob_sqr(&(f_rf * bb - cr));
    }
    acc.sqrt()
}

/// Runs the alternating design. `seed` fixes the analog starting phases.
pub fn solve(problem: &JrcProblem, seed: u64) -> Result<(HybridBeamformer, SolveReport)> {
    let mask = problem.mask;
    let n_t = mask.n_rows();
    let m_count = problem.comm_precoders.len();
    if m_count == 0 {
        return Err(Error::DimensionMismatch {
            context: "jrc::solve",
            detail: "no subcarriers".into(),
        });
    }
    let n_s = problem.comm_precoders[0].ncols();
    let k = problem.radar.n_targets();
    if !(problem.eta.is_finite() && (0.0..=1.0).contains(&problem.eta)) {
        return Err(Error::EtaOutOfRange(problem.eta));
    }
    if k > n_s {
        return Err(Error::TargetsExceedStreams { targets: k, streams: n_s });
    }
    if problem.options.fix_coupling_identity && k != n_s {
        return Err(Error::TargetsStreamsUnequal { targets: k, streams: n_s });
    }
    for (m, fc) in problem.comm_precoders.iter().enumerate() {
        if fc.nrows() != n_t || fc.ncols() != n_s {
            return Err(Error::DimensionMismatch {
                context: "jrc::solve",
                detail: format!(
                    "communications precoder {m} is {} x {}, expected {} x {}",
                    fc.nrows(),
                    fc.ncols(),
                    n_t,
                    n_s
                ),
            });
        }
    }
    if problem.radar.weights.nrows() != n_t {
        return Err(Error::DimensionMismatch {
            context: "jrc::solve",
            detail: format!(
                "radar columns have {} rows, expected {}",
                problem.radar.weights.nrows(),
                n_t
            ),
        });
    }

    let eta = Complex64::new(problem.eta, 0.0);
    let etabar = Complex64::new(1.0 - problem.eta, 0.0);
    let radius = 1.0 / (n_t as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = ManifoldPoint::random(radius, mask.support_len(), &mut rng);
    let mut f_rf = mask.scatter(x.values());

    let coupling_identity = CMat::identity(k, n_s);
    let mut coupling: Vec<CMat> = vec![coupling_identity.clone(); m_count];
    let recombine = |coupling: &[CMat]| -> Vec<CMat> {
        (0..m_count)
            .map(|m| {
                &problem.comm_precoders[m] * eta + &problem.radar.weights * &coupling[m] * etabar
            })
            .collect()
    };

    let mut f_cr = recombine(&coupling);
    let mut rank_deficient_cycles = 0usize;
    let mut f_bb: Vec<CMat> = Vec::with_capacity(m_count);
    {
        let mut deficient = false;
        for f_cr_m in &f_cr {
            let (bb, flag) = update_baseband(&f_rf, f_cr_m);
            deficient |= flag;
            f_bb.push(bb);
        }
        if deficient {
            rank_deficient_cycles += 1;
        }
    }

    let mut cost = joint_cost(&f_rf, &f_bb, &f_cr);
    let mut trace = vec![cost];
    let mut stop = StopReason::IterationLimit;
    let mut last_mmo_status = None;

    for _ in 0..problem.options.max_outer_iters {
        let snapshot = (f_rf.clone(), f_bb.clone());

        if !problem.options.fix_coupling_identity {
            for m in 0..m_count {
                coupling[m] = update_coupling(&problem.radar.weights, &f_rf, &f_bb[m]);
            }
            f_cr = recombine(&coupling);
        }

        let (pinv, rank) = pseudo_inverse(&f_rf, 1e-12);
        if rank < f_rf.ncols() {
            rank_deficient_cycles += 1;
        }
        for m in 0..m_count {
            f_bb[m] = renormalize(&f_rf, &pinv * &f_cr[m]);
        }

        let reduced = ReducedProblem::new(mask, stack_columns(&f_bb), stack_columns(&f_cr))?;
        let (x_new, mmo_report) = mmo::optimize(&reduced, x, &problem.options.mmo);
        x = x_new;
        last_mmo_status = Some(mmo_report.status);
        f_rf = mask.scatter(x.values());

        let new_cost = joint_cost(&f_rf, &f_bb, &f_cr);
        if new_cost > cost + 1e-12 * cost.max(1.0) {
            // The coupling and renormalization steps do not descend the
            // joint objective in every geometry; reject the cycle rather
            // than report a non-monotone trace.
            (f_rf, f_bb) = snapshot;
            stop = StopReason::CostGuard;
            break;
        }
        let improvement = cost - new_cost;
        cost = new_cost;
        trace.push(cost);
        if improvement <= problem.options.rel_cost_tol * cost.max(f64::MIN_POSITIVE) {
            stop = StopReason::Converged;
            break;
        }
    }

    // The manifold step ran after the last baseband update, so restore the
    // exact transmit-power normalization against the final analog precoder.
    for bb in f_bb.iter_mut() {
        *bb = renormalize(&f_rf, bb.clone());
    }

    Ok((
        HybridBeamformer { f_rf, f_bb, f_bb_corrected: None, mask: mask.clone() },
        SolveReport { cost_trace: trace, stop, rank_deficient_cycles, last_mmo_status },
    ))
}

/// Closed-form combination of a communications-only and a radar-only
/// design: `eta * F_RF_C F_BB_C[m] + (1 - eta) * F_RF_R F_BB_R[m]`, stacked
/// horizontally over subcarriers.
///
/// `sol_comm` should come from a solve at `eta = 1` and `sol_radar` from a
/// solve at `eta = 0` with the coupling pinned to the identity (so both
/// factors target the same stream count).
pub fn combine_designs(
    sol_comm: &HybridBeamformer,
    sol_radar: &HybridBeamformer,
    eta: f64,
) -> Result<CMat> {
    if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
        return Err(Error::EtaOutOfRange(eta));
    }
    if sol_comm.n_subcarriers() != sol_radar.n_subcarriers()
        || sol_comm.f_rf.nrows() != sol_radar.f_rf.nrows()
        || sol_comm.n_streams() != sol_radar.n_streams()
    {
        return Err(Error::DimensionMismatch {
            context: "combine_designs",
            detail: format!(
                "communications design {} x {} streams over {} subcarriers vs radar {} x {} over {}",
                sol_comm.f_rf.nrows(),
                sol_comm.n_streams(),
                sol_comm.n_subcarriers(),
                sol_radar.f_rf.nrows(),
                sol_radar.n_streams(),
                sol_radar.n_subcarriers()
            ),
        });
    }
    let m_count = sol_comm.n_subcarriers();
    let eta_c = Complex64::new(eta, 0.0);
    let eta_r = Complex64::new(1.0 - eta, 0.0);
    let blocks: Vec<CMat> = (0..m_count)
        .map(|m| sol_comm.effective(m) * eta_c + sol_radar.effective(m) * eta_r)
        .collect();
    Ok(stack_columns(&blocks))
}

/// Per-subcarrier baseband matrices compensating array beam split.
///
/// For each subcarrier the designed analog phases are scaled by `f_m / f_c`,
/// which re-aims the analog beams at the directions intended at the center
/// frequency; that virtual analog precoder is then projected back through
/// the actual one into the baseband domain and renormalized to transmit
/// power `N_S`. At `f_m = f_c` the correction is the identity.
pub fn beam_split_correct(bf: &HybridBeamformer, carrier: &CarrierConfig) -> Vec<CMat> {
    let f_c = carrier.center_hz();
    let radius = 1.0 / (bf.f_rf.nrows() as f64).sqrt();
    let (pinv, _) = pseudo_inverse(&bf.f_rf, 1e-12);
    (0..carrier.n_subcarriers())
        .map(|m| {
            let ratio = carrier.subcarrier_hz(m) / f_c;
            let mut rf_c = CMat::zeros(bf.f_rf.nrows(), bf.f_rf.ncols());
            for j in 0..bf.mask.n_cols() {
                for i in bf.mask.column_range(j) {
                    rf_c[(i, j)] = Complex64::from_polar(radius, ratio * bf.f_rf[(i, j)].arg());
                }
            }
            renormalize(&bf.f_rf, &pinv * rf_c * &bf.f_bb[m])
        })
        .collect()
}
