//! Scenario runners behind the `beamkit` command line.
//!
//! Every scenario writes one CSV per curve plus a `manifest.txt` that
//! records the fully resolved configuration and the curve list. Outputs are
//! deterministic for a given configuration and seed: trials are indexed, each
//! trial derives its own RNG seeds from the base seed, and parallel execution
//! preserves trial order, so reruns are byte-identical regardless of the
//! worker count.

use crate::channel::{
    generate_channel, statistical_precoder, unconstrained_precoder, ChannelRealization,
};
use crate::config::{ExperimentConfig, MaskChoice, Scenario};
use crate::geometry::{ArrayGeometry, CarrierConfig, ConnectivityMask, PhaseShifterArchitecture};
use crate::jrc::{solve, HybridBeamformer, JrcOptions, JrcProblem};
use crate::linalg::CMat;
use crate::metrics::{aggregate, array_gain, spectral_efficiency_for, SnrConfig};
use crate::mmo::MmoOptions;
use crate::radar::{beampattern, radar_beamformer, transmit_covariance, RadarBeamformer};
use crate::{Error, Result};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Where and how to run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses the global rayon default.
    pub jobs: Option<usize>,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub curves: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// One output file under construction.
struct Curve {
    name: String,
    header: &'static str,
    rows: Vec<String>,
}

impl Curve {
    fn new(name: impl Into<String>, header: &'static str) -> Self {
        Curve { name: name.into(), header, rows: Vec::new() }
    }
}

/// Decorrelates the solver's phase-initialization stream from the channel
/// stream while keeping it a pure function of the trial, so every design
/// compared within a trial starts from the same initialization.
fn solver_seed(channel_seed: u64) -> u64 {
    channel_seed ^ 0x9e37_79b9_7f4a_7c15
}

fn trial_channel_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

fn jrc_options(cfg: &ExperimentConfig) -> JrcOptions {
    JrcOptions {
        max_outer_iters: cfg.outer_iters,
        rel_cost_tol: cfg.outer_tol,
        mmo: MmoOptions {
            max_iters: cfg.mmo_iters,
            grad_tol: cfg.mmo_tol,
            ..MmoOptions::default()
        },
        fix_coupling_identity: false,
    }
}

fn solve_design(
    cfg: &ExperimentConfig,
    comm: &[CMat],
    radar: &RadarBeamformer,
    eta: f64,
    mask: &ConnectivityMask,
    seed: u64,
) -> Result<HybridBeamformer> {
    let problem = JrcProblem { comm_precoders: comm, radar, eta, mask, options: jrc_options(cfg) };
    let (bf, _) = solve(&problem, seed)?;
    Ok(bf)
}

fn comm_precoders(channel: &ChannelRealization, streams: usize) -> Result<Vec<CMat>> {
    (0..channel.n_subcarriers()).map(|m| unconstrained_precoder(&channel.h[m], streams)).collect()
}

/// The connectivity variants a comparison sweep walks, restricted to the
/// ones the geometry admits (a partitioned mask needs the subarray count to
/// divide evenly).
fn mask_lineup(cfg: &ExperimentConfig, n_t: usize) -> Vec<(&'static str, ConnectivityMask)> {
    let mut out = Vec::new();
    for choice in [MaskChoice::Fully, MaskChoice::Overlapped, MaskChoice::Partial] {
        if let Ok(mask) = cfg.build_mask(n_t, choice) {
            out.push((choice.name(), mask));
        }
    }
    out
}

fn run_trials<T: Send>(
    trials: usize,
    f: impl Fn(usize) -> Result<T> + Send + Sync,
) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

/// Mean and standard-error row text for one x-point over all trials.
fn stat_row(x: f64, samples: &[f64]) -> Result<String> {
    let (mean, stderr) = aggregate(samples)?;
    Ok(format!("{x},{mean},{stderr}"))
}

fn write_curves(dir: &Path, curves: &[Curve]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating output directory {}", dir.display()), e))?;
    let mut paths = Vec::new();
    for curve in curves {
        let path = dir.join(&curve.name);
        let mut text = String::with_capacity(curve.rows.len() * 32 + 64);
        text.push_str(curve.header);
        text.push('\n');
        for row in &curve.rows {
            text.push_str(row);
            text.push('\n');
        }
        std::fs::write(&path, text)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        paths.push(path);
    }
    Ok(paths)
}

fn write_manifest(dir: &Path, cfg: &ExperimentConfig, curves: &[Curve]) -> Result<PathBuf> {
    let mut text = String::from("format = beamkit-run-v1\n");
    for (key, value) in cfg.manifest_lines() {
        text.push_str(&key);
        text.push_str(" = ");
        text.push_str(&value);
        text.push('\n');
    }
    let mut names: Vec<&str> = curves.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    for name in names {
        text.push_str("curve = ");
        text.push_str(name);
        text.push('\n');
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

/// Runs the configured scenario and writes its outputs.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let violations = cfg.validate();
    if !violations.is_empty() {
        return Err(Error::ConfigInvalid(violations.join("; ")));
    }
    let curves = match opts.jobs {
        None => run_scenario(cfg)?,
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::ConfigInvalid(format!("worker pool: {e}")))?;
            pool.install(|| run_scenario(cfg))?
        }
    };
    let dir = opts.out_dir.join(cfg.scenario.name());
    let paths = write_curves(&dir, &curves)?;
    let manifest = write_manifest(&dir, cfg, &curves)?;
    Ok(RunSummary { scenario: cfg.scenario, curves: paths, manifest })
}

fn run_scenario(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    match cfg.scenario {
        Scenario::SeVsSnr => se_vs_snr(cfg),
        Scenario::SeVsEta => se_vs_eta(cfg),
        Scenario::Beampattern => beampattern_scenario(cfg),
        Scenario::SeVsDbar => se_vs_dbar(cfg),
        Scenario::ArrayGain => array_gain_scenario(cfg),
        Scenario::SeVsBandwidth => se_vs_bandwidth(cfg),
        Scenario::PhaseShifters => phase_shifters(cfg),
    }
}

/// Shared per-run fixtures.
struct Bench {
    carrier: CarrierConfig,
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    radar: RadarBeamformer,
}

impl Bench {
    fn build(cfg: &ExperimentConfig) -> Result<Bench> {
        let carrier = cfg.carrier()?;
        let tx = cfg.tx_geometry()?;
        let rx = cfg.rx_geometry()?;
        let radar =
            radar_beamformer(&cfg.radar_scene()?, &tx, carrier.center_hz(), cfg.radar_overlap)?;
        Ok(Bench { carrier, tx, rx, radar })
    }
}

fn se_vs_snr(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    let bench = Bench::build(cfg)?;
    let scene = cfg.channel_scene()?;
    let masks = mask_lineup(cfg, bench.tx.num_subarrays());
    let fully = cfg.build_mask(bench.tx.num_subarrays(), MaskChoice::Fully)?;
    let cov_mode = cfg.covariance_mode();

    // Per trial: one SE value per curve per SNR point.
    let per_trial = run_trials(cfg.trials, |t| -> Result<Vec<Vec<f64>>> {
        let channel_seed = trial_channel_seed(cfg.seed, t);
        let channel = generate_channel(&bench.tx, &bench.rx, &bench.carrier, &scene, channel_seed)?;
        let comm = comm_precoders(&channel, cfg.streams)?;
        let mut effectives: Vec<Vec<CMat>> = vec![comm.clone()];
        for (_, mask) in &masks {
            let bf =
                solve_design(cfg, &comm, &bench.radar, cfg.eta, mask, solver_seed(channel_seed))?;
            effectives.push((0..channel.n_subcarriers()).map(|m| bf.effective(m)).collect());
        }
        let stat: Vec<CMat> = (0..channel.n_subcarriers())
            .map(|m| {
                let c = crate::channel::covariance(&channel, &bench.tx, m, cov_mode)?;
                statistical_precoder(&c, cfg.streams)
            })
            .collect::<Result<Vec<_>>>()?;
        let bf =
            solve_design(cfg, &stat, &bench.radar, cfg.eta, &fully, solver_seed(channel_seed))?;
        effectives.push((0..channel.n_subcarriers()).map(|m| bf.effective(m)).collect());

        let rows = effectives
            .iter()
            .map(|eff| {
                cfg.sweep_snr_db
                    .iter()
                    .map(|&snr| spectral_efficiency_for(&channel, eff, SnrConfig { snr_db: snr }))
                    .collect()
            })
            .collect();
        Ok(rows)
    })?;

    let mut names = vec!["unconstrained"];
    names.extend(masks.iter().map(|(n, _)| *n));
    names.push("covariance");
    let mut curves = Vec::new();
    for (ci, name) in names.iter().enumerate() {
        let mut curve = Curve::new(format!("{name}.csv"), "snr_db,se_mean,se_stderr");
        for (xi, &snr) in cfg.sweep_snr_db.iter().enumerate() {
            let samples: Vec<f64> = per_trial.iter().map(|t| t[ci][xi]).collect();
            curve.rows.push(stat_row(snr, &samples)?);
        }
        curves.push(curve);
    }
    Ok(curves)
}

fn se_vs_eta(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    let bench = Bench::build(cfg)?;
    let scene = cfg.channel_scene()?;
    let masks = mask_lineup(cfg, bench.tx.num_subarrays());
    let snr = SnrConfig { snr_db: cfg.snr_db };

    let per_trial = run_trials(cfg.trials, |t| -> Result<(f64, Vec<Vec<f64>>)> {
        let channel_seed = trial_channel_seed(cfg.seed, t);
        let channel = generate_channel(&bench.tx, &bench.rx, &bench.carrier, &scene, channel_seed)?;
        let comm = comm_precoders(&channel, cfg.streams)?;
        let reference = spectral_efficiency_for(&channel, &comm, snr);
        let mut per_mask = Vec::with_capacity(masks.len());
        for (_, mask) in &masks {
            let mut along_eta = Vec::with_capacity(cfg.sweep_eta.len());
            for &eta in &cfg.sweep_eta {
                let bf =
                    solve_design(cfg, &comm, &bench.radar, eta, mask, solver_seed(channel_seed))?;
                let eff: Vec<CMat> =
                    (0..channel.n_subcarriers()).map(|m| bf.effective(m)).collect();
                along_eta.push(spectral_efficiency_for(&channel, &eff, snr));
            }
            per_mask.push(along_eta);
        }
        Ok((reference, per_mask))
    })?;

    let mut curves = Vec::new();
    let mut unconstrained = Curve::new("unconstrained.csv", "eta,se_mean,se_stderr");
    let reference: Vec<f64> = per_trial.iter().map(|(r, _)| *r).collect();
    for &eta in &cfg.sweep_eta {
        unconstrained.rows.push(stat_row(eta, &reference)?);
    }
    curves.push(unconstrained);
    for (ci, (name, _)) in masks.iter().enumerate() {
        let mut curve = Curve::new(format!("{name}.csv"), "eta,se_mean,se_stderr");
        for (xi, &eta) in cfg.sweep_eta.iter().enumerate() {
            let samples: Vec<f64> = per_trial.iter().map(|(_, t)| t[ci][xi]).collect();
            curve.rows.push(stat_row(eta, &samples)?);
        }
        curves.push(curve);
    }
    Ok(curves)
}

fn beampattern_scenario(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    let bench = Bench::build(cfg)?;
    let scene = cfg.channel_scene()?;
    let mask = cfg.build_mask(bench.tx.num_subarrays(), cfg.mask)?;
    let grid = cfg.direction_grid()?;

    let channel_seed = trial_channel_seed(cfg.seed, 0);
    let channel = generate_channel(&bench.tx, &bench.rx, &bench.carrier, &scene, channel_seed)?;
    let comm = comm_precoders(&channel, cfg.streams)?;

    let patterns = run_trials(cfg.sweep_eta.len(), |ei| -> Result<Vec<f64>> {
        let eta = cfg.sweep_eta[ei];
        let bf = solve_design(cfg, &comm, &bench.radar, eta, &mask, solver_seed(channel_seed))?;
        let m_count = channel.n_subcarriers() as f64;
        let mut mean_cov = CMat::zeros(bench.tx.num_subarrays(), bench.tx.num_subarrays());
        for m in 0..channel.n_subcarriers() {
            mean_cov +=
                transmit_covariance(&bf.f_rf, &bf.f_bb[m]) / num_complex::Complex64::from(m_count);
        }
        Ok(beampattern(&mean_cov, &bench.tx, &grid, bench.carrier.center_hz()))
    })?;

    let mut curves = Vec::new();
    for (ei, &eta) in cfg.sweep_eta.iter().enumerate() {
        let mut curve = Curve::new(format!("eta-{eta}.csv"), "azimuth_deg,power,power_db");
        for (gi, dir) in grid.iter().enumerate() {
            let p = patterns[ei][gi];
            let db = 10.0 * p.max(f64::MIN_POSITIVE).log10();
            curve.rows.push(format!("{},{p},{db}", dir.azimuth_deg()));
        }
        curves.push(curve);
    }
    Ok(curves)
}

fn se_vs_dbar(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    let scene = cfg.channel_scene()?;
    let carrier = cfg.carrier()?;
    let radar_scene = cfg.radar_scene()?;
    let snr = SnrConfig { snr_db: cfg.snr_db };

    // curve -> ratio -> per-trial samples
    let mut names: Vec<String> = Vec::new();
    let mut table: Vec<Vec<Vec<f64>>> = Vec::new();
    for (ri, &ratio) in cfg.sweep_spacing_ratio.iter().enumerate() {
        let spacing_wl = 1.0 / ratio;
        let tx = cfg.tx_geometry_with_spacing(spacing_wl)?;
        let rx = cfg.rx_geometry_with_spacing(spacing_wl)?;
        let radar = radar_beamformer(&radar_scene, &tx, carrier.center_hz(), cfg.radar_overlap)?;
        let masks = mask_lineup(cfg, tx.num_subarrays());
        if ri == 0 {
            names.push("unconstrained".into());
            names.extend(masks.iter().map(|(n, _)| n.to_string()));
            table = vec![vec![Vec::new(); cfg.sweep_spacing_ratio.len()]; names.len()];
        }

        let per_trial = run_trials(cfg.trials, |t| -> Result<Vec<f64>> {
            let channel_seed = trial_channel_seed(cfg.seed, t);
            let channel = generate_channel(&tx, &rx, &carrier, &scene, channel_seed)?;
            let comm = comm_precoders(&channel, cfg.streams)?;
            let mut row = vec![spectral_efficiency_for(&channel, &comm, snr)];
            for (_, mask) in &masks {
                let bf =
                    solve_design(cfg, &comm, &radar, cfg.eta, mask, solver_seed(channel_seed))?;
                let eff: Vec<CMat> =
                    (0..channel.n_subcarriers()).map(|m| bf.effective(m)).collect();
                row.push(spectral_efficiency_for(&channel, &eff, snr));
            }
            Ok(row)
        })?;
        for trial_row in &per_trial {
            for (ci, &value) in trial_row.iter().enumerate() {
                table[ci][ri].push(value);
            }
        }
    }

    let mut curves = Vec::new();
    for (ci, name) in names.iter().enumerate() {
        let mut curve = Curve::new(format!("{name}.csv"), "spacing_ratio,se_mean,se_stderr");
        for (ri, &ratio) in cfg.sweep_spacing_ratio.iter().enumerate() {
            curve.rows.push(stat_row(ratio, &table[ci][ri])?);
        }
        curves.push(curve);
    }
    Ok(curves)
}

/// Designs once at the center subcarrier, deploys the same baseband across
/// the band, and reports the beam of the first stream with and without the
/// per-subcarrier analog correction.
fn array_gain_scenario(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    let bench = Bench::build(cfg)?;
    let scene = cfg.channel_scene()?;
    let mask = cfg.build_mask(bench.tx.num_subarrays(), cfg.mask)?;
    let grid = cfg.direction_grid()?;

    let channel_seed = trial_channel_seed(cfg.seed, 0);
    let channel = generate_channel(&bench.tx, &bench.rx, &bench.carrier, &scene, channel_seed)?;
    let mc = bench.carrier.center_index();
    let comm_center = vec![unconstrained_precoder(&channel.h[mc], cfg.streams)?];
    let designed =
        solve_design(cfg, &comm_center, &bench.radar, cfg.eta, &mask, solver_seed(channel_seed))?;

    let m_count = bench.carrier.n_subcarriers();
    let mut flat = HybridBeamformer {
        f_rf: designed.f_rf.clone(),
        f_bb: vec![designed.f_bb[0].clone(); m_count],
        f_bb_corrected: None,
        mask: designed.mask.clone(),
    };
    flat.apply_beam_split_correction(&bench.carrier);

    let beam = |eff: CMat, f_hz: f64| -> Vec<f64> {
        let col = eff.column(0).into_owned();
        array_gain(&col, &bench.tx, &grid, f_hz)
    };
    let edge_low = 0;
    let edge_high = m_count - 1;
    let outputs = [
        ("center.csv", beam(flat.effective(mc), bench.carrier.subcarrier_hz(mc))),
        (
            "edge-low-uncorrected.csv",
            beam(flat.effective(edge_low), bench.carrier.subcarrier_hz(edge_low)),
        ),
        (
            "edge-low-corrected.csv",
            beam(flat.effective_corrected(edge_low)?, bench.carrier.subcarrier_hz(edge_low)),
        ),
        (
            "edge-high-uncorrected.csv",
            beam(flat.effective(edge_high), bench.carrier.subcarrier_hz(edge_high)),
        ),
        (
            "edge-high-corrected.csv",
            beam(flat.effective_corrected(edge_high)?, bench.carrier.subcarrier_hz(edge_high)),
        ),
    ];

    let mut curves = Vec::new();
    for (name, gains) in outputs {
        let mut curve = Curve::new(name, "azimuth_deg,gain");
        for (gi, dir) in grid.iter().enumerate() {
            curve.rows.push(format!("{},{}", dir.azimuth_deg(), gains[gi]));
        }
        curves.push(curve);
    }
    Ok(curves)
}

fn se_vs_bandwidth(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    let tx = cfg.tx_geometry()?;
    let rx = cfg.rx_geometry()?;
    let scene = cfg.channel_scene()?;
    let radar = radar_beamformer(&cfg.radar_scene()?, &tx, cfg.center_hz, cfg.radar_overlap)?;
    let mask = cfg.build_mask(tx.num_subarrays(), cfg.mask)?;
    let snr = SnrConfig { snr_db: cfg.snr_db };

    let names = ["unconstrained", "per-subcarrier", "flat-uncorrected", "flat-corrected"];
    let mut table: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); cfg.sweep_bandwidth_hz.len()]; names.len()];
    for (bi, &bw) in cfg.sweep_bandwidth_hz.iter().enumerate() {
        let carrier = CarrierConfig::new(cfg.center_hz, bw, cfg.subcarriers)?;
        let per_trial = run_trials(cfg.trials, |t| -> Result<[f64; 4]> {
            let channel_seed = trial_channel_seed(cfg.seed, t);
            let channel = generate_channel(&tx, &rx, &carrier, &scene, channel_seed)?;
            let comm = comm_precoders(&channel, cfg.streams)?;
            let unconstrained = spectral_efficiency_for(&channel, &comm, snr);

            let bf = solve_design(cfg, &comm, &radar, cfg.eta, &mask, solver_seed(channel_seed))?;
            let eff: Vec<CMat> = (0..channel.n_subcarriers()).map(|m| bf.effective(m)).collect();
            let per_subcarrier = spectral_efficiency_for(&channel, &eff, snr);

            let mc = carrier.center_index();
            let comm_center = vec![comm[mc].clone()];
            let designed =
                solve_design(cfg, &comm_center, &radar, cfg.eta, &mask, solver_seed(channel_seed))?;
            let mut flat = HybridBeamformer {
                f_rf: designed.f_rf.clone(),
                f_bb: vec![designed.f_bb[0].clone(); carrier.n_subcarriers()],
                f_bb_corrected: None,
                mask: designed.mask.clone(),
            };
            let eff_flat: Vec<CMat> =
                (0..channel.n_subcarriers()).map(|m| flat.effective(m)).collect();
            let flat_uncorrected = spectral_efficiency_for(&channel, &eff_flat, snr);

            flat.apply_beam_split_correction(&carrier);
            let eff_corr: Vec<CMat> = (0..channel.n_subcarriers())
                .map(|m| flat.effective_corrected(m))
                .collect::<Result<Vec<_>>>()?;
            let flat_corrected = spectral_efficiency_for(&channel, &eff_corr, snr);

            Ok([unconstrained, per_subcarrier, flat_uncorrected, flat_corrected])
        })?;
        for row in &per_trial {
            for (ci, &value) in row.iter().enumerate() {
                table[ci][bi].push(value);
            }
        }
    }

    let mut curves = Vec::new();
    for (ci, name) in names.iter().enumerate() {
        let mut curve = Curve::new(format!("{name}.csv"), "bandwidth_hz,se_mean,se_stderr");
        for (bi, &bw) in cfg.sweep_bandwidth_hz.iter().enumerate() {
            curve.rows.push(stat_row(bw, &table[ci][bi])?);
        }
        curves.push(curve);
    }
    Ok(curves)
}

fn phase_shifters(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    let n = cfg.tx_subarrays.0 * cfg.tx_subarrays.1;
    let q = cfg.tx_antennas.0 * cfg.tx_antennas.1;
    let n_rf = cfg.rf_chains;
    let window = cfg.resolved_solver_overlap();
    let rows = [
        ("per-antenna-fully", PhaseShifterArchitecture::PerAntennaFully),
        ("per-antenna-partial", PhaseShifterArchitecture::PerAntennaPartial),
        ("per-subarray-fully", PhaseShifterArchitecture::PerSubarrayFully),
        ("per-subarray-partial", PhaseShifterArchitecture::PerSubarrayPartial),
        ("per-subarray-overlapped", PhaseShifterArchitecture::PerSubarrayOverlapped { window }),
    ];
    let mut curve = Curve::new("counts.csv", "architecture,phase_shifters");
    for (name, arch) in rows {
        curve
            .rows
            .push(format!("{name},{}", crate::geometry::phase_shifter_count(arch, n, q, n_rf)));
    }
    Ok(vec![curve])
}
