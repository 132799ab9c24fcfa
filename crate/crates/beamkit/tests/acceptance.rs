//! Release gate for the beamkit library and experiment runner.
//!
//! Each test checks one release criterion end to end and writes exactly one
//! `acceptance NN <name>: PASS/FAIL` line to the real stderr (bypassing the
//! harness capture), so a full run always prints the complete scorecard.

use beamkit::channel::{
    covariance, generate_channel, statistical_precoder, unconstrained_precoder, CovarianceMode,
};
use beamkit::config::{ExperimentConfig, MaskChoice, Scenario};
use beamkit::experiment::{run, RunOptions, RunSummary};
use beamkit::geometry::{
    phase_shifter_count, ConnectivityMask, Direction, MaskKind, PhaseShifterArchitecture,
};
use beamkit::jrc::{combine_designs, solve, HybridBeamformer, JrcOptions, JrcProblem};
use beamkit::linalg::{frob_sqr, pseudo_inverse, CMat, CVec};
use beamkit::metrics::{array_gain, spectral_efficiency_for, SnrConfig};
use beamkit::mmo::{optimize, ManifoldPoint, MmoOptions, ReducedProblem};
use beamkit::radar::{beampattern, radar_beamformer, transmit_covariance};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

type Check = Result<(), String>;

fn report(name: &str, outcome: Check) {
    {
        let mut err = std::io::stderr().lock();
        match &outcome {
            Ok(()) => {
                let _ = writeln!(err, "acceptance {name}: PASS");
            }
            Err(msg) => {
                let _ = writeln!(err, "acceptance {name}: FAIL ({msg})");
            }
        }
    }
    if let Err(msg) = outcome {
        panic!("{name}: {msg}");
    }
}

fn req(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

static SCRATCH: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let n = SCRATCH.fetch_add(1, Ordering::Relaxed);
    let dir =
        std::env::temp_dir().join(format!("beamkit-acceptance-{}-{tag}-{n}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// The desk-scale testbed: 8x8 transmit subarrays of 2x2 antennas, 4x4
/// receive subarrays, 8 RF chains, 2 streams, 16 subcarriers, 2 targets.
fn desk() -> ExperimentConfig {
    ExperimentConfig::default()
}

#[test]
fn criterion_01_mask_cardinality() {
    report(
        "01 mask-cardinality",
        (|| {
            let n_t = 100;
            let n_rf = 10;
            let window = n_t - n_rf + 1;
            let mask = ConnectivityMask::build(n_t, n_rf, MaskKind::Overlapped { window })
                .map_err(|e| e.to_string())?;
            req(mask.support_len() == 910, || {
                format!("support size {} != 910", mask.support_len())
            })?;
            req(mask.vector_complement().len() == 90, || {
                format!("complement size {} != 90", mask.vector_complement().len())
            })?;
            req(mask.vector_support().len() + mask.vector_complement().len() == n_t * n_rf, || {
                "support and complement must partition the index set".into()
            })
        })(),
    );
}

#[test]
fn criterion_02_phase_shifter_table() {
    report(
        "02 phase-shifter-table",
        (|| {
            for n_t in [16usize, 64, 256, 1024] {
                for q in [4usize, 9, 16] {
                    for n_rf in [4usize, 8, 16] {
                        let lo = n_t.div_ceil(n_rf);
                        let hi = n_t - n_rf + 1;
                        let window = (2 * n_t / n_rf).clamp(lo, hi);
                        let cases: [(PhaseShifterArchitecture, u64); 5] = [
                            (PhaseShifterArchitecture::PerAntennaFully, (n_t * q * n_rf) as u64),
                            (PhaseShifterArchitecture::PerAntennaPartial, (n_t * q) as u64),
                            (PhaseShifterArchitecture::PerSubarrayFully, (n_t * n_rf) as u64),
                            (PhaseShifterArchitecture::PerSubarrayPartial, n_t as u64),
                            (
                                PhaseShifterArchitecture::PerSubarrayOverlapped { window },
                                (n_rf * window) as u64,
                            ),
                        ];
                        for (arch, want) in cases {
                            let got = phase_shifter_count(arch, n_t, q, n_rf);
                            req(got == want, || {
                                format!("{arch:?} with N={n_t}, Q={q}, RF={n_rf}: {got} != {want}")
                            })?;
                        }
                    }
                }
            }
            // Spot values for the 1024-subarray, 9-antenna, 16-chain design point.
            let (n_t, q, n_rf) = (1024, 9, 16);
            for (arch, want) in [
                (PhaseShifterArchitecture::PerAntennaFully, 147_456),
                (PhaseShifterArchitecture::PerAntennaPartial, 9_216),
                (PhaseShifterArchitecture::PerSubarrayFully, 16_384),
                (PhaseShifterArchitecture::PerSubarrayPartial, 1_024),
                (PhaseShifterArchitecture::PerSubarrayOverlapped { window: 64 }, 1_024),
            ] {
                let got = phase_shifter_count(arch, n_t, q, n_rf);
                req(got == want, || format!("{arch:?}: {got} != {want}"))?;
            }
            Ok(())
        })(),
    );
}

#[test]
fn criterion_03_gradient_oracle() {
    report(
        "03 gradient-oracle",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let n_t = 8;
            let n_rf = 4;
            let t_cols = 32;
            for kind in [MaskKind::Fully, MaskKind::Partial, MaskKind::Overlapped { window: 3 }] {
                let mask = ConnectivityMask::build(n_t, n_rf, kind).map_err(|e| e.to_string())?;
                let b = random_cmat(&mut rng, n_rf, t_cols);
                let c = random_cmat(&mut rng, n_t, t_cols);
                let problem =
                    ReducedProblem::new(&mask, b.clone(), c.clone()).map_err(|e| e.to_string())?;
                let x = ManifoldPoint::random(problem.radius(), problem.dim(), &mut rng);
                let got = problem.euclidean_gradient(&x);

                // Explicit construction: the objective vectorizes to
                // || G x - vec(C) ||^2 where G holds B entries replicated down
                // the block diagonal, columns restricted to the mask support.
                let support = mask.vector_support();
                let mut g_v = CMat::zeros(n_t * t_cols, support.len());
                for (t, &pos) in support.iter().enumerate() {
                    let row = pos % n_t;
                    let rf = pos / n_t;
                    for col in 0..t_cols {
                        g_v[(col * n_t + row, t)] = b[(rf, col)];
                    }
                }
                let mut c_vec = CVec::zeros(n_t * t_cols);
                for col in 0..t_cols {
                    for row in 0..n_t {
                        c_vec[col * n_t + row] = c[(row, col)];
                    }
                }
                let x_vec = CVec::from_column_slice(x.values());
                let residual = &g_v * &x_vec - &c_vec;
                let expected = (g_v.adjoint() * &residual) * Complex64::new(2.0, 0.0);
                let mut diff = 0.0;
                let mut scale = 0.0;
                for (t, &g) in got.iter().enumerate() {
                    diff += (g - expected[t]).norm_sqr();
                    scale += expected[t].norm_sqr();
                }
                req(diff.sqrt() <= 1e-12 * scale.sqrt(), || {
                    format!("{kind:?}: explicit-form relative error {}", diff.sqrt() / scale.sqrt())
                })?;

                // Central finite differences of an independently coded cost.
                let fd_cost =
                    |vals: &[Complex64]| -> f64 { frob_sqr(&(mask.scatter(vals) * &b - &c)) };
                let h = 1e-6;
                for t in 0..problem.dim() {
                    let mut plus = x.values().to_vec();
                    let mut minus = x.values().to_vec();
                    plus[t] += Complex64::new(h, 0.0);
                    minus[t] -= Complex64::new(h, 0.0);
                    let d_re = (fd_cost(&plus) - fd_cost(&minus)) / (2.0 * h);
                    let mut plus = x.values().to_vec();
                    let mut minus = x.values().to_vec();
                    plus[t] += Complex64::new(0.0, h);
                    minus[t] -= Complex64::new(0.0, h);
                    let d_im = (fd_cost(&plus) - fd_cost(&minus)) / (2.0 * h);
                    let fd = Complex64::new(d_re, d_im);
                    req((got[t] - fd).norm() <= 1e-6 * fd.norm().max(1.0), || {
                        format!("{kind:?} entry {t}: analytic {} vs finite difference {fd}", got[t])
                    })?;
                }
            }
            Ok(())
        })(),
    );
}

#[test]
fn criterion_04_micro_scale_optimality() {
    report(
        "04 micro-optimality",
        (|| {
            let n_t = 4;
            let n_rf = 2;
            let t_cols = 2;
            let levels = 32usize;
            let mask =
                ConnectivityMask::build(n_t, n_rf, MaskKind::Partial).map_err(|e| e.to_string())?;
            let support = mask.matrix_support();
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let b = random_cmat(&mut rng, n_rf, t_cols);
                let c = random_cmat(&mut rng, n_t, t_cols);
                let problem =
                    ReducedProblem::new(&mask, b.clone(), c.clone()).map_err(|e| e.to_string())?;
                let radius = problem.radius();
                let dim = problem.dim();
                assert_eq!(dim, 4);

                // Exhaustive minimum over the joint 32-level phase grid.
                let ring: Vec<Complex64> = (0..levels)
                    .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / levels as f64))
                    .collect();
                // Row-wise residual terms: entry t contributes vals[t] * B[j, col]
                // to row i of the product.
                let mut row_terms: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_t];
                for (t, &(i, j)) in support.iter().enumerate() {
                    row_terms[i].push((t, j));
                }
                let mut grid_min = f64::INFINITY;
                let mut vals = [Complex64::new(0.0, 0.0); 4];
                for &r0 in &ring {
                    vals[0] = r0;
                    for &r1 in &ring {
                        vals[1] = r1;
                        for &r2 in &ring {
                            vals[2] = r2;
                            for &r3 in &ring {
                                vals[3] = r3;
                                let mut cost = 0.0;
                                for (i, terms) in row_terms.iter().enumerate() {
                                    for col in 0..t_cols {
                                        let mut acc = -c[(i, col)];
                                        for &(t, j) in terms {
                                            acc += vals[t] * b[(j, col)];
                                        }
                                        cost += acc.norm_sqr();
                                    }
                                }
                                if cost < grid_min {
                                    grid_min = cost;
                                }
                            }
                        }
                    }
                }

                let x0 = ManifoldPoint::random(radius, dim, &mut rng);
                let opts = MmoOptions { max_iters: 100, grad_tol: 1e-10, ..MmoOptions::default() };
                let (x, _) = optimize(&problem, x0, &opts);
                let reached = problem.cost(&x);
                req(reached <= 1.05 * grid_min + 1e-12, || {
                    format!("seed {seed}: solver cost {reached} vs grid minimum {grid_min}")
                })?;
            }
            Ok(())
        })(),
    );
}

#[test]
fn criterion_05_descent_and_invariants() {
    report(
        "05 descent-invariants",
        (|| {
            let cfg = desk();
            let carrier = cfg.carrier().map_err(|e| e.to_string())?;
            let tx = cfg.tx_geometry().map_err(|e| e.to_string())?;
            let rx = cfg.rx_geometry().map_err(|e| e.to_string())?;
            let scene = cfg.channel_scene().map_err(|e| e.to_string())?;
            let radar = radar_beamformer(
                &cfg.radar_scene().map_err(|e| e.to_string())?,
                &tx,
                carrier.center_hz(),
                None,
            )
            .map_err(|e| e.to_string())?;
            let n_t = tx.num_subarrays();
            let masks = [
                cfg.build_mask(n_t, MaskChoice::Fully).map_err(|e| e.to_string())?,
                cfg.build_mask(n_t, MaskChoice::Partial).map_err(|e| e.to_string())?,
                cfg.build_mask(n_t, MaskChoice::Overlapped).map_err(|e| e.to_string())?,
            ];
            let radius = 1.0 / (n_t as f64).sqrt();

            for seed in 0..50u64 {
                let channel = generate_channel(&tx, &rx, &carrier, &scene, seed)
                    .map_err(|e| e.to_string())?;
                let comm: Vec<CMat> = (0..carrier.n_subcarriers())
                    .map(|m| unconstrained_precoder(&channel.h[m], 2))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                let mask = &masks[(seed % 3) as usize];
                for eta in [0.0, 0.5, 1.0] {
                    let problem = JrcProblem {
                        comm_precoders: &comm,
                        radar: &radar,
                        eta,
                        mask,
                        options: JrcOptions::default(),
                    };
                    let (bf, rep) = solve(&problem, seed ^ 0x5bd1).map_err(|e| e.to_string())?;

                    for pair in rep.cost_trace.windows(2) {
                        req(pair[1] <= pair[0] + 1e-9 * pair[0].max(1.0), || {
                            format!("seed {seed} eta {eta}: cost rose {} -> {}", pair[0], pair[1])
                        })?;
                    }
                    req(rep.cost_trace.len() <= 11, || {
                        format!(
                            "seed {seed} eta {eta}: {} outer cycles exceed 10",
                            rep.cost_trace.len() - 1
                        )
                    })?;

                    for j in 0..bf.f_rf.ncols() {
                        for i in 0..bf.f_rf.nrows() {
                            let e = bf.f_rf[(i, j)];
                            if mask.contains(i, j) {
                                req((e.norm() - radius).abs() <= 1e-12, || {
                                    format!(
                                        "seed {seed} eta {eta}: |F_RF[{i},{j}]| = {} != {radius}",
                                        e.norm()
                                    )
                                })?;
                            } else {
                                req(e == Complex64::new(0.0, 0.0), || {
                                    format!("seed {seed} eta {eta}: F_RF[{i},{j}] off-mask nonzero")
                                })?;
                            }
                        }
                    }
                    for m in 0..carrier.n_subcarriers() {
                        let power = frob_sqr(&(&bf.f_rf * &bf.f_bb[m]));
                        req((power - 2.0).abs() <= 1e-9, || {
                            format!("seed {seed} eta {eta} subcarrier {m}: power {power} != 2")
                        })?;
                    }
                }
            }
            Ok(())
        })(),
    );
}

fn curve_points(summary: &RunSummary, name: &str) -> Result<Vec<(f64, f64, f64)>, String> {
    let path = summary
        .curves
        .iter()
        .find(|p| p.file_name().map(|n| n == name).unwrap_or(false))
        .ok_or_else(|| format!("missing curve {name}"))?;
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .skip(1)
        .map(|line| {
            let mut it = line.split(',');
            let mut next = || -> Result<f64, String> {
                it.next()
                    .ok_or_else(|| format!("short row in {name}: {line}"))?
                    .parse()
                    .map_err(|e| format!("bad number in {name}: {line}: {e}"))
            };
            Ok((next()?, next()?, next()?))
        })
        .collect()
}

#[test]
fn criterion_06_tradeoff_ordering() {
    report(
        "06 tradeoff-ordering",
        (|| {
            let mut cfg = desk();
            cfg.scenario = Scenario::SeVsEta;
            cfg.trials = 50;
            cfg.snr_db = 10.0;
            cfg.sweep_eta = vec![0.0, 0.25, 0.5, 0.75, 1.0];
            let dir = scratch_dir("tradeoff");
            let summary = run(&cfg, &RunOptions { out_dir: dir.clone(), jobs: None })
                .map_err(|e| e.to_string())?;

            let fully = curve_points(&summary, "fully.csv")?;
            for pair in fully.windows(2) {
                let (eta0, mean0, _) = pair[0];
                let (eta1, mean1, _) = pair[1];
                req(mean1 >= mean0 - 1e-9, || {
                    format!(
                        "fully-connected SE fell from {mean0} (eta {eta0}) to {mean1} (eta {eta1})"
                    )
                })?;
            }

            let at_half = |name: &str| -> Result<(f64, f64), String> {
                let points = curve_points(&summary, name)?;
                points
                    .iter()
                    .find(|(eta, _, _)| (eta - 0.5).abs() < 1e-12)
                    .map(|&(_, mean, stderr)| (mean, stderr))
                    .ok_or_else(|| format!("{name} has no eta=0.5 row"))
            };
            let order = [
                ("unconstrained.csv", at_half("unconstrained.csv")?),
                ("fully.csv", at_half("fully.csv")?),
                ("overlapped.csv", at_half("overlapped.csv")?),
                ("partial.csv", at_half("partial.csv")?),
            ];
            for pair in order.windows(2) {
                let (name_a, (mean_a, se_a)) = &pair[0];
                let (name_b, (mean_b, se_b)) = &pair[1];
                let slack = (se_a * se_a + se_b * se_b).sqrt();
                req(*mean_a >= *mean_b - slack, || {
                    format!(
                    "{name_a} ({mean_a}) should dominate {name_b} ({mean_b}) within one standard error ({slack})"
                )
                })?;
            }
            let _ = std::fs::remove_dir_all(dir);
            Ok(())
        })(),
    );
}

/// Indices of strict local maxima over a 1-D pattern.
fn local_maxima(pattern: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..pattern.len() {
        let left = if i == 0 { f64::NEG_INFINITY } else { pattern[i - 1] };
        let right = if i + 1 == pattern.len() { f64::NEG_INFINITY } else { pattern[i + 1] };
        if pattern[i] > left && pattern[i] >= right {
            out.push(i);
        }
    }
    out.sort_by(|&a, &b| pattern[b].partial_cmp(&pattern[a]).unwrap());
    out
}

#[test]
fn criterion_07_beampattern_lobes() {
    report(
        "07 beampattern-lobes",
        (|| {
            let mut cfg = desk();
            // Pin the line of sight on the elevation cut and cluster the
            // reflected paths around it, so the azimuth cut shows the designed
            // lobes instead of a random scatterer draw.
            cfg.fixed_los_aod = Some((10.0, 90.0));
            cfg.fixed_los_aoa = Some((0.0, 90.0));
            cfg.aod_azimuth = (0.0, 20.0);
            cfg.aod_elevation = (80.0, 90.0);
            cfg.nlos_ratio_db = -10.0;
            let carrier = cfg.carrier().map_err(|e| e.to_string())?;
            let tx = cfg.tx_geometry().map_err(|e| e.to_string())?;
            let rx = cfg.rx_geometry().map_err(|e| e.to_string())?;
            let scene = cfg.channel_scene().map_err(|e| e.to_string())?;
            let radar = radar_beamformer(
                &cfg.radar_scene().map_err(|e| e.to_string())?,
                &tx,
                carrier.center_hz(),
                None,
            )
            .map_err(|e| e.to_string())?;
            let mask =
                cfg.build_mask(tx.num_subarrays(), MaskChoice::Fully).map_err(|e| e.to_string())?;
            let grid: Vec<Direction> =
                (-90..=90).map(|a| Direction::new(a as f64, 90.0).unwrap()).collect();
            let azim = |idx: usize| grid[idx].azimuth_deg();
            let targets = [-40.0, 40.0];
            let los_az = 10.0;
            // Reflector azimuths live in [0, 20]; the stream they excite may put
            // lobe flanks up to roughly half a beamwidth outside that range.
            let comm_sector = (cfg.aod_azimuth.0 - 8.0, cfg.aod_azimuth.1 + 8.0);

            for seed in 1..=6u64 {
                let channel = generate_channel(&tx, &rx, &carrier, &scene, seed)
                    .map_err(|e| e.to_string())?;
                let comm: Vec<CMat> = (0..carrier.n_subcarriers())
                    .map(|m| unconstrained_precoder(&channel.h[m], 2))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                let pattern_for = |eta: f64| -> Result<Vec<f64>, String> {
                    let problem = JrcProblem {
                        comm_precoders: &comm,
                        radar: &radar,
                        eta,
                        mask: &mask,
                        options: JrcOptions::default(),
                    };
                    let (bf, _) = solve(&problem, seed).map_err(|e| e.to_string())?;
                    let m_count = carrier.n_subcarriers();
                    let mut mean_cov = CMat::zeros(tx.num_subarrays(), tx.num_subarrays());
                    for m in 0..m_count {
                        mean_cov += transmit_covariance(&bf.f_rf, &bf.f_bb[m])
                            / Complex64::from(m_count as f64);
                    }
                    let raw = beampattern(&mean_cov, &tx, &grid, carrier.center_hz());
                    let peak = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    Ok(raw.into_iter().map(|p| p / peak).collect())
                };

                // Radar-only: one lobe per target, each within a degree.
                let radar_pattern = pattern_for(0.0)?;
                let peaks = local_maxima(&radar_pattern);
                for &target in &targets {
                    let hit = peaks.iter().take(2).any(|&i| (azim(i) - target).abs() <= 1.0);
                    req(hit, || {
                        let tops: Vec<f64> = peaks.iter().take(2).map(|&i| azim(i)).collect();
                        format!("seed {seed} eta 0: no lobe within 1 degree of {target} (top lobes at {tops:?})")
                    })?;
                }

                // Balanced: the target lobes persist (the compromise design may
                // pull them a few degrees, well under half a beamwidth), the user
                // channel's direction joins them, and nothing else becomes
                // dominant.
                let joint = pattern_for(0.5)?;
                let dominant: Vec<usize> =
                    local_maxima(&joint).into_iter().filter(|&i| joint[i] >= 0.15).collect();
                for &target in &targets {
                    let hit = dominant.iter().any(|&i| (azim(i) - target).abs() <= 5.0);
                    req(hit, || {
                        let tops: Vec<f64> = dominant.iter().map(|&i| azim(i)).collect();
                        format!(
                        "seed {seed} eta 0.5: no dominant lobe within 5 degrees of {target} (dominant lobes at {tops:?})"
                    )
                    })?;
                }
                let at_los = joint[(los_az + 90.0) as usize];
                req(at_los >= 0.5, || {
                    format!("seed {seed} eta 0.5: power toward the line of sight is only {at_los:.3} of the peak")
                })?;
                for &i in &dominant {
                    let a = azim(i);
                    let near_target = targets.iter().any(|&t| (a - t).abs() <= 5.0);
                    let in_sector = a >= comm_sector.0 && a <= comm_sector.1;
                    req(near_target || in_sector, || {
                        format!(
                            "seed {seed} eta 0.5: stray dominant lobe at {a} (power {:.3})",
                            joint[i]
                        )
                    })?;
                }
            }
            Ok(())
        })(),
    );
}

#[test]
fn criterion_08_design_combination() {
    report(
        "08 design-combination",
        (|| {
            let cfg = desk();
            let f = cfg.center_hz;
            let lam = beamkit::geometry::wavelength(f);
            let tx = beamkit::geometry::ArrayGeometry::new(
                3,
                2,
                2,
                2,
                lam / 4.0,
                lam / 4.0,
                lam / 2.0,
                lam / 2.0,
            )
            .map_err(|e| e.to_string())?;
            let rx = beamkit::geometry::ArrayGeometry::square(2, 2, lam / 4.0, lam / 2.0)
                .map_err(|e| e.to_string())?;
            let carrier =
                beamkit::geometry::CarrierConfig::new(f, 10e9, 2).map_err(|e| e.to_string())?;
            let scene = cfg.channel_scene().map_err(|e| e.to_string())?;
            let radar_scene = beamkit::radar::RadarScene::new(vec![
                Direction::new(-40.0, 90.0).unwrap(),
                Direction::new(35.0, 90.0).unwrap(),
            ])
            .map_err(|e| e.to_string())?;
            let radar = radar_beamformer(&radar_scene, &tx, f, None).map_err(|e| e.to_string())?;
            let mask = ConnectivityMask::build(6, 3, MaskKind::Fully).map_err(|e| e.to_string())?;
            let eta = 0.35;

            for seed in 0..20u64 {
                let channel = generate_channel(&tx, &rx, &carrier, &scene, seed)
                    .map_err(|e| e.to_string())?;
                let comm: Vec<CMat> = (0..2)
                    .map(|m| unconstrained_precoder(&channel.h[m], 2))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                let solve_at = |eta: f64, pin: bool| -> Result<HybridBeamformer, String> {
                    let problem = JrcProblem {
                        comm_precoders: &comm,
                        radar: &radar,
                        eta,
                        mask: &mask,
                        options: JrcOptions { fix_coupling_identity: pin, ..JrcOptions::default() },
                    };
                    solve(&problem, seed).map(|(bf, _)| bf).map_err(|e| e.to_string())
                };
                let sol_comm = solve_at(1.0, false)?;
                let sol_radar = solve_at(0.0, true)?;
                let combined =
                    combine_designs(&sol_comm, &sol_radar, eta).map_err(|e| e.to_string())?;

                let mut f_c_norm_sq = 0.0;
                let mut f_r_norm_sq = 0.0;
                let mut diff_sq = 0.0;
                for m in 0..2 {
                    let eff_c = sol_comm.effective(m);
                    let eff_r = sol_radar.effective(m);
                    let literal =
                        &eff_c * Complex64::from(eta) + &eff_r * Complex64::from(1.0 - eta);
                    let block = combined.columns(m * 2, 2);
                    for j in 0..2 {
                        for i in 0..6 {
                            let d = (literal[(i, j)] - block[(i, j)]).norm();
                            req(d <= 1e-15, || {
                                format!(
                                    "seed {seed} subcarrier {m}: entry ({i},{j}) differs by {d}"
                                )
                            })?;
                        }
                    }
                    f_c_norm_sq += frob_sqr(&eff_c);
                    f_r_norm_sq += frob_sqr(&eff_r);
                    diff_sq += frob_sqr(&(&literal - &eff_c));
                }
                // Distance to the communications-optimal design is bounded by
                // the mixing weight times the two design norms.
                let bound = (1.0 - eta) * (f_c_norm_sq.sqrt() + f_r_norm_sq.sqrt());
                req(diff_sq.sqrt() <= bound + 1e-12, || {
                    format!("seed {seed}: distance {} above bound {bound}", diff_sq.sqrt())
                })?;
            }
            Ok(())
        })(),
    );
}

#[test]
fn criterion_09_beam_split_correction() {
    report(
        "09 beam-split-correction",
        (|| {
            let mut cfg = desk();
            cfg.bandwidth_hz = 30e9; // a tenth of the carrier
                                     // A long thin panel serving a user close to the array plane is the
                                     // regime where a frequency-flat analog stage visibly mis-steers the
                                     // band edges; the phase-scaling correction must pull them back.
            cfg.tx_subarrays = (64, 1);
            cfg.streams = 1;
            // Three chains keep the steering fan well conditioned: the panel's
            // phase budget limits how far apart the fan columns can sit, and a
            // nearly collinear fan would turn the correction's least-squares
            // projection into noise amplification.
            cfg.rf_chains = 3;
            cfg.targets = vec![(0.0, 90.0)];
            cfg.fixed_los_aod = Some((89.3, 90.0));
            cfg.fixed_los_aoa = Some((0.0, 90.0));
            cfg.aod_elevation = (60.0, 75.0);
            // Keep reflections far below the direct path: the aim vector must be
            // dominated by the one direction whose re-steering we are measuring.
            cfg.nlos_ratio_db = -40.0;
            let carrier = cfg.carrier().map_err(|e| e.to_string())?;
            let tx = cfg.tx_geometry().map_err(|e| e.to_string())?;
            let rx = cfg.rx_geometry().map_err(|e| e.to_string())?;
            let scene = cfg.channel_scene().map_err(|e| e.to_string())?;
            let mask =
                cfg.build_mask(tx.num_subarrays(), MaskChoice::Fully).map_err(|e| e.to_string())?;
            let n_sub = tx.num_subarrays();
            let n_rf = cfg.rf_chains;

            // Analog stage: a fan of steering columns bracketing the user
            // direction. The correction rescales stored phases by the subcarrier
            // frequency ratio, which re-aims a steering column exactly when its
            // phase ramp stays inside one wrap — true here because the scan sits
            // 0.7 degrees off broadside of the long axis.
            let u0 = 89.3_f64.to_radians().cos();
            let mut f_rf = CMat::zeros(n_sub, n_rf);
            for j in 0..n_rf {
                let u = u0 + (j as f64 - (n_rf as f64 - 1.0) / 2.0) * 1.8e-3;
                let dir = Direction::new(u.acos().to_degrees(), 90.0).map_err(|e| e.to_string())?;
                f_rf.column_mut(j).copy_from(&tx.subarray_steering(dir, carrier.center_hz()));
            }
            let (pinv, _) = pseudo_inverse(&f_rf, 1e-12);

            let step = 0.01;
            let grid: Vec<Direction> =
                (0..=500).map(|k| Direction::new(87.0 + step * k as f64, 90.0).unwrap()).collect();
            let snr = SnrConfig { snr_db: 10.0 };
            let mc = carrier.center_index();
            let m_count = carrier.n_subcarriers();

            let mut se_uncorrected = Vec::new();
            let mut se_corrected = Vec::new();
            for seed in 0..20u64 {
                let channel = generate_channel(&tx, &rx, &carrier, &scene, seed)
                    .map_err(|e| e.to_string())?;
                let v0 = unconstrained_precoder(&channel.h[mc], 1).map_err(|e| e.to_string())?;
                let mut b = &pinv * &v0;
                let scale = 1.0 / (&f_rf * &b).norm();
                b *= Complex64::from(scale);
                let mut flat = HybridBeamformer {
                    f_rf: f_rf.clone(),
                    f_bb: vec![b; m_count],
                    f_bb_corrected: None,
                    mask: mask.clone(),
                };
                flat.apply_beam_split_correction(&carrier);

                let argmax_of = |eff: CMat, f_hz: f64| -> f64 {
                    let gains = array_gain(&eff.column(0).into_owned(), &tx, &grid, f_hz);
                    let best = gains
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap();
                    grid[best].azimuth_deg()
                };
                let a_center = argmax_of(flat.effective(mc), carrier.subcarrier_hz(mc));
                for edge in [0, m_count - 1] {
                    let f_edge = carrier.subcarrier_hz(edge);
                    let a_raw = argmax_of(flat.effective(edge), f_edge);
                    let a_fixed = argmax_of(
                        flat.effective_corrected(edge).map_err(|e| e.to_string())?,
                        f_edge,
                    );
                    req((a_raw - a_center).abs() > step + 1e-9, || {
                        format!(
                        "seed {seed} subcarrier {edge}: uncorrected beam at {a_raw} did not move off {a_center}"
                    )
                    })?;
                    req((a_fixed - a_center).abs() <= step + 1e-9, || {
                        format!(
                        "seed {seed} subcarrier {edge}: corrected beam at {a_fixed} missed {a_center}"
                    )
                    })?;
                }

                let eff_raw: Vec<CMat> = (0..m_count).map(|m| flat.effective(m)).collect();
                let eff_fix: Vec<CMat> = (0..m_count)
                    .map(|m| flat.effective_corrected(m))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                se_uncorrected.push(spectral_efficiency_for(&channel, &eff_raw, snr));
                se_corrected.push(spectral_efficiency_for(&channel, &eff_fix, snr));
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let raw = mean(&se_uncorrected);
            let fixed = mean(&se_corrected);
            req(fixed > raw, || {
                format!("mean spectral efficiency did not improve: {raw} -> {fixed}")
            })
        })(),
    );
}

#[test]
fn criterion_10_covariance_design() {
    report(
        "10 covariance-design",
        (|| {
            let cfg = desk();
            let carrier = cfg.carrier().map_err(|e| e.to_string())?;
            let tx = cfg.tx_geometry().map_err(|e| e.to_string())?;
            let rx = cfg.rx_geometry().map_err(|e| e.to_string())?;
            let scene = cfg.channel_scene().map_err(|e| e.to_string())?;
            let radar = radar_beamformer(
                &cfg.radar_scene().map_err(|e| e.to_string())?,
                &tx,
                carrier.center_hz(),
                None,
            )
            .map_err(|e| e.to_string())?;
            let mask =
                cfg.build_mask(tx.num_subarrays(), MaskChoice::Fully).map_err(|e| e.to_string())?;
            let snr = SnrConfig { snr_db: 10.0 };
            let m_count = carrier.n_subcarriers();

            let mut se_csi = Vec::new();
            let mut se_cov = Vec::new();
            for seed in 0..100u64 {
                let channel = generate_channel(&tx, &rx, &carrier, &scene, seed)
                    .map_err(|e| e.to_string())?;
                let solve_with = |precoders: &[CMat]| -> Result<f64, String> {
                    let problem = JrcProblem {
                        comm_precoders: precoders,
                        radar: &radar,
                        eta: 0.5,
                        mask: &mask,
                        options: JrcOptions::default(),
                    };
                    let (bf, _) = solve(&problem, seed).map_err(|e| e.to_string())?;
                    let eff: Vec<CMat> = (0..m_count).map(|m| bf.effective(m)).collect();
                    Ok(spectral_efficiency_for(&channel, &eff, snr))
                };
                let instant: Vec<CMat> = (0..m_count)
                    .map(|m| unconstrained_precoder(&channel.h[m], 2))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                se_csi.push(solve_with(&instant)?);
                let statistical: Vec<CMat> = (0..m_count)
                    .map(|m| {
                        let c = covariance(&channel, &tx, m, CovarianceMode::Exact)?;
                        statistical_precoder(&c, 2)
                    })
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                se_cov.push(solve_with(&statistical)?);
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let csi = mean(&se_csi);
            let cov = mean(&se_cov);
            req(cov <= csi + 1e-9, || {
                format!("covariance design ({cov}) outperformed instantaneous design ({csi})")
            })?;
            req(csi - cov <= 0.25 * csi, || {
                format!("covariance gap {} exceeds a quarter of the baseline {csi}", csi - cov)
            })
        })(),
    );
}

#[test]
fn criterion_11_determinism() {
    report(
        "11 determinism",
        (|| {
            let base = "\
            trials = 2\n\
            tx.subarrays_x = 4\n\
            tx.subarrays_y = 1\n\
            tx.antennas_x = 1\n\
            tx.antennas_y = 1\n\
            rx.subarrays_x = 2\n\
            rx.subarrays_y = 1\n\
            rx.antennas_x = 1\n\
            rx.antennas_y = 1\n\
            link.rf_chains = 2\n\
            link.streams = 1\n\
            radar.targets = 0:90\n\
            carrier.subcarriers = 3\n\
            channel.paths = 2\n\
            solver.outer_iters = 3\n\
            solver.mmo_iters = 6\n\
            sweep.snr_db = 0, 10\n\
            sweep.eta = 0, 1\n\
            sweep.bandwidth_hz = 10000000000, 20000000000\n\
            sweep.spacing_ratio = 2, 4\n\
            grid.azimuth_step = 15\n";
            let (raw, problems) = beamkit::config::RawConfig::parse_lenient(base);
            req(problems.is_empty(), || format!("fixture config problems: {problems:?}"))?;
            let (mut cfg, problems) = ExperimentConfig::resolve(&raw);
            req(problems.is_empty(), || format!("fixture resolve problems: {problems:?}"))?;

            let read_all = |summary: &RunSummary| -> Result<Vec<(String, Vec<u8>)>, String> {
                let mut out: Vec<(String, Vec<u8>)> = summary
                    .curves
                    .iter()
                    .chain(std::iter::once(&summary.manifest))
                    .map(|p| {
                        Ok((
                            p.file_name().unwrap().to_string_lossy().into_owned(),
                            std::fs::read(p).map_err(|e| e.to_string())?,
                        ))
                    })
                    .collect::<Result<_, String>>()?;
                out.sort();
                Ok(out)
            };

            for scenario in Scenario::ALL {
                cfg.scenario = scenario;
                let violations = cfg.validate();
                req(violations.is_empty(), || {
                    format!("{scenario}: fixture invalid: {violations:?}")
                })?;
                let d1 = scratch_dir("det-a");
                let d2 = scratch_dir("det-b");
                let s1 = run(&cfg, &RunOptions { out_dir: d1.clone(), jobs: Some(1) })
                    .map_err(|e| format!("{scenario}: {e}"))?;
                let s2 = run(&cfg, &RunOptions { out_dir: d2.clone(), jobs: Some(2) })
                    .map_err(|e| format!("{scenario}: {e}"))?;
                let a = read_all(&s1)?;
                let b = read_all(&s2)?;
                req(!s1.curves.is_empty(), || format!("{scenario}: produced no curve files"))?;
                for (name, bytes) in &a {
                    let rows = bytes.iter().filter(|&&c| c == b'\n').count();
                    req(rows >= 2, || format!("{scenario}: {name} has no data rows"))?;
                }
                req(a == b, || format!("{scenario}: rerun changed output bytes"))?;
                let _ = std::fs::remove_dir_all(d1);
                let _ = std::fs::remove_dir_all(d2);
            }
            Ok(())
        })(),
    );
}
