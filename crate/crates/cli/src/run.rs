//! Experiment runners. Every runner computes all rows first and then writes
//! its files sequentially, so output does not depend on the thread count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kickedtop::chain::{self, ChainParams};
use kickedtop::floquet::{self, TrotterVariant};
use kickedtop::observables::{self, steps_for_horizon};
use kickedtop::otoc::{self, FitWindow};
use kickedtop::semiclassical;
use kickedtop::spectral;
use kickedtop::spin::{coherent_state, Spin, TopParams};
use kickedtop::twodesign::{self, QuenchEnsemble};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, TopConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(kickedtop::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<kickedtop::Error> for CliError {
    fn from(e: kickedtop::Error) -> Self {
        CliError::Numerical(e)
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Contents of the JSON sidecar.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub kind: ExperimentKind,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub config: &'a ExperimentConfig,
}

/// Files produced by one run.
#[derive(Debug)]
pub struct RunReport {
    pub csv_files: Vec<PathBuf>,
    pub sidecar: PathBuf,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Validates, runs and writes `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate().map_err(CliError::Config)?;
    let threads = if cfg.threads == 0 { std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1) } else { cfg.threads };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    let start = Instant::now();
    let tables = pool.install(|| compute(cfg))?;
    let wall = start.elapsed().as_secs_f64();

    let out = Path::new(&cfg.output);
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut written = Vec::new();
    for (name, table) in tables {
        let path = out.join(&name);
        fs::write(&path, table).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    let sidecar = out.join(format!("{}.json", cfg.kind.stem()));
    let meta = Sidecar {
        kind: cfg.kind,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        threads,
        wall_time_seconds: wall,
        files: written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect(),
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&sidecar, json + "\n").map_err(|e| io_err(&sidecar, e))?;
    Ok(RunReport { csv_files: written, sidecar })
}

fn top_params(t: &TopConfig, tau: f64) -> Result<TopParams, CliError> {
    let spin = Spin::new(t.spin)?;
    let p = TopParams { spin, tau, h_x: t.h_x, h_z: t.h_z, j_x: t.j_x, j_z: t.j_z };
    p.validate()?;
    Ok(p)
}

fn compute(cfg: &ExperimentConfig) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    let stem = cfg.kind.stem();
    let single = |t: Vec<u8>| Ok(vec![(format!("{stem}.csv"), t)]);
    match cfg.kind {
        ExperimentKind::ThresholdSweep => single(threshold_sweep(cfg)?),
        ExperimentKind::Spectrum => single(spectrum(cfg)?),
        ExperimentKind::Otoc => otoc_run(cfg),
        ExperimentKind::Poincare => poincare(cfg),
        ExperimentKind::ChainMap => single(chain_map(cfg)?),
        ExperimentKind::Twodesign => single(two_design(cfg)?),
        ExperimentKind::RandomizedOtoc => single(randomized(cfg)?),
    }
}

#[derive(Serialize)]
struct SweepRow {
    tau: f64,
    t: f64,
    dm_bar: f64,
    qe_bar: f64,
    fidelity_bar: f64,
}

fn threshold_sweep(cfg: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let top = cfg.top.as_ref().unwrap();
    let grid = cfg.grid.as_ref().unwrap();
    let st = cfg.state.as_ref().unwrap();
    let horizon = grid.horizon.unwrap();
    let per_tau: Vec<Vec<SweepRow>> = grid
        .taus
        .par_iter()
        .map(|&tau| -> Result<Vec<SweepRow>, CliError> {
            let p = top_params(top, tau)?;
            let psi0 = coherent_state(p.spin, st.theta, st.phi);
            let n = steps_for_horizon(horizon, tau);
            let e = observables::trotter_errors(&psi0, &p, n, top.variant)?;
            let dm = observables::temporal_average(&e.magnetization);
            let qe = observables::temporal_average(&e.accuracy);
            let fid = observables::temporal_average(&e.fidelity);
            Ok((0..n)
                .map(|k| SweepRow { tau, t: (k + 1) as f64 * tau, dm_bar: dm[k], qe_bar: qe[k], fidelity_bar: fid[k] })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    csv_bytes(&per_tau.into_iter().flatten().collect::<Vec<_>>())
}

#[derive(Serialize)]
struct SpectrumRow {
    tau: f64,
    variant: TrotterVariant,
    dim: usize,
    pr: f64,
    pr_cue: f64,
    pr_coe: f64,
    spacing_ratio: f64,
    coincident_phases: usize,
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let top = cfg.top.as_ref().unwrap();
    let taus = &cfg.grid.as_ref().unwrap().taus;
    let out: Vec<SpectrumRow> = taus
        .iter()
        .map(|&tau| -> Result<SpectrumRow, CliError> {
            let p = top_params(top, tau)?;
            let u = floquet::trotter_operator(&p, top.variant)?;
            let spec = floquet::diagonalize_unitary(&u)?;
            let d = p.dim();
            let pr = spectral::participation_ratio(&spectral::target_eigenbasis(&p)?, &spec);
            let r = spectral::spacing_ratio(&spec);
            let df = d as f64;
            Ok(SpectrumRow {
                tau,
                variant: top.variant,
                dim: d,
                pr,
                pr_cue: (df + 1.0) / (2.0 * df),
                pr_coe: (df + 2.0) / (3.0 * df),
                spacing_ratio: r.mean,
                coincident_phases: r.floored,
            })
        })
        .collect::<Result<_, _>>()?;
    csv_bytes(&out)
}

#[derive(Serialize)]
struct OtocRow {
    tau: f64,
    t: f64,
    c: f64,
    f_re: f64,
    f_im: f64,
}

#[derive(Serialize)]
struct OtocSummary {
    tau: f64,
    lambda: Option<f64>,
    lambda_err: Option<f64>,
    fit_start: Option<f64>,
    fit_end: Option<f64>,
    c_coe: f64,
    c_infinite_time: f64,
}

fn otoc_run(cfg: &ExperimentConfig) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    let top = cfg.top.as_ref().unwrap();
    let grid = cfg.grid.as_ref().unwrap();
    let oc = cfg.otoc.as_ref().unwrap();
    let horizon = grid.horizon.unwrap();
    let spin = Spin::new(top.spin)?;
    let (w, v) = otoc::default_operators(spin, oc.phi);
    let f0 = otoc::sz_second_moment(spin);
    let mut series_rows = Vec::new();
    let mut summary = Vec::new();
    for &tau in &grid.taus {
        let p = top_params(top, tau)?;
        let n = steps_for_horizon(horizon, tau);
        let s = otoc::otoc_variant(&p, n, &w, &v, top.variant)?;
        for k in 0..s.len() {
            series_rows.push(OtocRow { tau, t: s.times[k], c: s.c_values[k], f_re: s.f_values[k].re, f_im: s.f_values[k].im });
        }
        let fit = if oc.fit == Some(true) { otoc::fit_growth_rate(&s, FitWindow::Auto { spin: top.spin }).ok() } else { None };
        let u = floquet::trotter_operator(&p, top.variant)?;
        let spec = floquet::diagonalize_unitary(&u)?;
        let inf = otoc::infinite_time_average_f(&spec, &w, &v);
        let c_coe = otoc::coe_saturation_c(&p, oc.phi)?;
        summary.push(OtocSummary {
            tau,
            lambda: fit.map(|f| f.lambda),
            lambda_err: fit.map(|f| f.lambda_err),
            fit_start: fit.map(|f| f.window.0),
            fit_end: fit.map(|f| f.window.1),
            c_coe,
            c_infinite_time: otoc::c_from_f(f0, kickedtop::linalg::c64::new(inf.f_bar, 0.0)),
        });
    }
    Ok(vec![("otoc.csv".into(), csv_bytes(&series_rows)?), ("otoc_summary.csv".into(), csv_bytes(&summary)?)])
}

fn poincare(cfg: &ExperimentConfig) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    let top = cfg.top.as_ref().unwrap();
    let pc = cfg.poincare.as_ref().unwrap();
    let seeds = semiclassical::seed_grid(pc.n_theta, pc.n_phi);
    let mut out = Vec::new();
    for &tau in &cfg.grid.as_ref().unwrap().taus {
        let p = top_params(top, tau)?;
        let clouds = semiclassical::poincare_section(&seeds, &p, pc.iterations)?;
        let mut buf = Vec::new();
        semiclassical::write_poincare_csv(&mut buf, &clouds)?;
        out.push((format!("poincare_tau_{tau}.csv"), buf));
    }
    Ok(out)
}

fn chain_map(cfg: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let c = cfg.chain.as_ref().unwrap();
    let base = ChainParams { n: c.n, alpha: 0.0, h_x: c.h_x, j_z: c.j_z, pairs: c.pairs };
    let diag = chain::chain_heat_map_with(&base, &c.alphas, &cfg.grid.as_ref().unwrap().taus, c.periods)?;
    let mut buf = Vec::new();
    chain::write_heat_map_csv(&mut buf, &diag)?;
    Ok(buf)
}

#[derive(Serialize)]
struct TwodesignRow {
    eta: usize,
    size: usize,
    frame_potential: f64,
    cue_expectation: f64,
    frame_excess: f64,
    cue_frame_mean: f64,
    cue_frame_std: f64,
    spacing_ratio: f64,
    spacing_ratio_err: f64,
    cue_spacing_ratio: f64,
    cue_spacing_ratio_err: f64,
}

fn two_design(cfg: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let t = cfg.twodesign.as_ref().unwrap();
    let seed = cfg.seed.unwrap();
    let spin = Spin::new(t.spin)?;
    let d = spin.dim();
    let cue_frame = twodesign::cue_frame_reference(d, t.size, t.cue_repetitions, seed.wrapping_add(1));
    let cue_r = spectral::empirical_spacing_ratio(spectral::Ensemble::Cue, d, t.size, seed.wrapping_add(2));
    let expect = twodesign::cue_frame_expectation(d, t.size);
    let mut out = Vec::new();
    for &eta in &t.etas {
        let e = QuenchEnsemble::generate(spin, t.quench_tau, eta, t.size, seed)?;
        let f = e.frame_potential();
        let r = e.spacing_ratio()?;
        out.push(TwodesignRow {
            eta,
            size: t.size,
            frame_potential: f,
            cue_expectation: expect,
            frame_excess: f - expect,
            cue_frame_mean: cue_frame.mean,
            cue_frame_std: cue_frame.std,
            spacing_ratio: r.mean,
            spacing_ratio_err: r.std_err,
            cue_spacing_ratio: cue_r.mean,
            cue_spacing_ratio_err: cue_r.std_err,
        });
    }
    csv_bytes(&out)
}

fn randomized(cfg: &ExperimentConfig) -> Result<Vec<u8>, CliError> {
    let top = cfg.top.as_ref().unwrap();
    let grid = cfg.grid.as_ref().unwrap();
    let st = cfg.state.as_ref().unwrap();
    let rc = cfg.randomized.as_ref().unwrap();
    let phi = cfg.otoc.as_ref().unwrap().phi;
    let spin = Spin::new(top.spin)?;
    let (w, v) = otoc::default_operators(spin, phi);
    let mut buf = Vec::new();
    let mut all = Vec::new();
    for &tau in &grid.taus {
        let p = top_params(top, tau)?;
        let n = steps_for_horizon(grid.horizon.unwrap(), tau);
        let rcfg = twodesign::RandomizedConfig {
            n_unitaries: rc.n_unitaries,
            eta: rc.eta,
            quench_tau: rc.quench_tau,
            seed: cfg.seed.unwrap(),
            psi0: Some(coherent_state(spin, st.theta, st.phi).into_inner()),
        };
        all.extend(twodesign::randomized_comparison(&p, n, &w, &v, &rcfg)?);
    }
    twodesign::write_randomized_csv(&mut buf, &all)?;
    Ok(buf)
}
