//! Dispatch of the five scenarios.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{default_stride, BreakdownConfig, Engine, ResolvedConfig, Sampling, ScenarioKind};
use super::output::{
    write_branch, write_branch_stability, write_bytes, write_csv, write_json, write_timeseries,
    write_timeseries_with_branch, FileEntry, N_OUT_HEADER,
};
use crate::dma::{integrate_dma, step_count, DmaIntegration, DmaModel, ModeAmplitudes};
use crate::error::{Error, Result};
use crate::gp::snapshot::encode_snapshot;
use crate::gp::{integrate_gp, CavityAmplitude, CavityMode, GpIntegration, Grid, GroundStateOptions, SplitStepper};
use crate::model::{pump_at, thomas_fermi, PumpSchedule};
use crate::observables::{ModeBasis, Observation};
use crate::stability::{build_linearization, classify_all};
use crate::steady::{InverseMap, SteadySolver, SteadyState};

/// Environment variable capping the worker threads of a run.
pub const THREADS_ENV: &str = "BEC_CAVITY_THREADS";

/// Outcome of one scenario run. Written as `summary.json`, which is not part
/// of its own manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub engine: Engine,
    pub seed: u64,
    pub wall_time_s: f64,
    pub scalars: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

pub const SUMMARY_FILE: &str = "summary.json";

struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
    scalars: BTreeMap<String, f64>,
}

impl Outputs {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn add(&mut self, entry: FileEntry) {
        self.files.push(entry);
    }

    fn scalar(&mut self, key: impl Into<String>, value: f64) {
        self.scalars.insert(key.into(), value);
    }
}

fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config(
                THREADS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
    }
}

/// Runs a scenario, writing its outputs and `summary.json` into `out_dir`.
pub fn run_scenario(cfg: &ResolvedConfig, out_dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::config("output.dir", format!("cannot create {}: {e}", out_dir.display())))?;
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
        scalars: BTreeMap::new(),
    };
    let body = |out: &mut Outputs| match cfg.kind() {
        ScenarioKind::ConstantPump | ScenarioKind::GaussianPump => run_dynamics(cfg, out),
        ScenarioKind::SteadyScan => run_steady_scan(cfg, out),
        ScenarioKind::FoldFind => run_fold_find(cfg, out),
        ScenarioKind::StabilitySweep => run_stability_sweep(cfg, out),
    };
    match thread_limit()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(THREADS_ENV, e.to_string()))?
            .install(|| body(&mut out))?,
        None => body(&mut out)?,
    }
    let summary = RunSummary {
        scenario: cfg.kind().id().to_string(),
        engine: cfg.config.engine,
        seed: cfg.config.seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        scalars: out.scalars,
        files: out.files,
    };
    write_json(&summary, &out_dir.join(SUMMARY_FILE))?;
    Ok(summary)
}

fn solver(cfg: &ResolvedConfig) -> Result<SteadySolver> {
    SteadySolver::new(cfg.params, cfg.config.steady.options())
}

/// Relative deviation `|n − b| / b`, zero when both vanish.
fn relative_deviation(n: f64, branch: f64) -> f64 {
    let d = (n - branch).abs();
    if d == 0.0 {
        0.0
    } else {
        d / branch.abs()
    }
}

/// First sample time whose deviation from `branch` exceeds the threshold for
/// `sustain` consecutive samples.
pub fn breakdown_time(times: &[f64], n_ph: &[f64], branch: &[f64], cfg: &BreakdownConfig) -> Option<f64> {
    let mut run = 0;
    for i in 0..times.len().min(n_ph.len()).min(branch.len()) {
        if relative_deviation(n_ph[i], branch[i]) > cfg.threshold {
            run += 1;
            if run == cfg.sustain {
                return Some(times[i + 1 - cfg.sustain]);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Follows the steady branch through the sampled pump values, starting from
/// `start` and always taking the state nearest in photon number to the
/// previous one.
pub fn follow_branch(table: &InverseMap, etas: &[f64], start: f64) -> Result<Vec<f64>> {
    let states: Vec<Vec<SteadyState>> = etas.par_iter().map(|&e| table.solve(e)).collect::<Result<_>>()?;
    let mut prev = start;
    states
        .iter()
        .zip(etas)
        .map(|(s, &eta)| {
            let next = s
                .iter()
                .map(|x| x.n_st)
                .min_by(|a, b| (a - prev).abs().total_cmp(&(b - prev).abs()))
                .ok_or(Error::NoConvergence {
                    method: "branch following",
                    iterations: 0,
                    residual: eta,
                })?;
            prev = next;
            Ok(next)
        })
        .collect()
}

/// Lowest steady state at the start of the run, used as the initial condition
/// of the pump ramp.
fn initial_steady(cfg: &ResolvedConfig, schedule: &PumpSchedule) -> Result<SteadyState> {
    let eta0 = pump_at(schedule, cfg.config.integration.t_start);
    solver(cfg)?
        .solve(eta0)?
        .into_iter()
        .next()
        .ok_or(Error::NoConvergence {
            method: "initial steady state",
            iterations: 0,
            residual: eta0,
        })
}

fn record_series(out: &mut Outputs, tag: &str, rows: &[Observation]) {
    let (i_max, max) = rows
        .iter()
        .enumerate()
        .map(|(i, o)| (i, o.n_ph))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    out.scalar(format!("max_n_ph_{tag}"), max);
    out.scalar(format!("t_max_n_ph_{tag}"), rows[i_max].t);
    let last = rows.last().expect("nonempty series");
    for (k, p) in last.populations.iter().enumerate() {
        out.scalar(format!("final_p{k}_{tag}"), *p);
    }
    let drift = rows.iter().map(|o| (o.norm - 1.0).abs()).fold(0.0, f64::max);
    out.scalar(format!("max_norm_drift_{tag}"), drift);
}

fn run_dynamics(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let schedule = cfg.schedule.expect("validated schedule");
    let it = &cfg.config.integration;
    let t_end = it.t_end.expect("validated t_end");
    let steps = step_count(t_end - it.t_start, it.dt);
    let stride = it.sample_stride.unwrap_or_else(|| default_stride(steps));
    out.scalar("sample_stride", stride as f64);
    let ramp = cfg.kind() == ScenarioKind::GaussianPump;
    let start = if ramp {
        Some(initial_steady(cfg, &schedule)?)
    } else {
        None
    };

    let mut series: Vec<(&str, Vec<Observation>)> = Vec::new();
    if cfg.config.engine.runs_dma() {
        let model = DmaModel::new(cfg.params);
        let z0 = start
            .as_ref()
            .map_or_else(ModeAmplitudes::ground, SteadyState::amplitudes);
        let opts = DmaIntegration {
            t_start: it.t_start,
            t_end,
            dt: it.dt,
            sample_stride: stride,
            renormalize_above: Some(1e-12),
        };
        let traj = integrate_dma(&model, &z0, &schedule, &opts)?;
        out.scalar("renormalizations_dma", traj.renormalizations as f64);
        series.push(("dma", Observation::from_dma(&traj)));
    }
    if cfg.config.engine.runs_gp() {
        let p = cfg.params;
        let grid = match cfg.config.grid {
            Some(g) => Grid::for_params(g.half_length, g.n_points, &p),
            None => Grid::default_for(&p),
        }
        .map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::config(format!("grid.{field}"), reason),
            other => other,
        })?;
        out.scalar("grid_half_length", grid.half_length());
        out.scalar("grid_points", grid.len() as f64);
        let tf = thomas_fermi(p.omega, p.g);
        out.scalar("tf_mu", tf.mu);
        out.scalar("tf_ratio", tf.tf_ratio);
        let mut stepper = SplitStepper::new(grid.clone(), p)?;
        let gs_opts = GroundStateOptions {
            tol: it.ground_state_tol,
            ..GroundStateOptions::default()
        };
        let trap = stepper.ground_state(&gs_opts)?;
        out.scalar("ground_mu_gp", trap.mu);
        let basis = ModeBasis::new(&grid, &trap.field)?;
        // The ramp starts in the lattice of the lowest steady state.
        let psi0 = match &start {
            Some(s) if s.n_st > 0.0 => {
                stepper
                    .ground_state(&GroundStateOptions {
                        lattice_photons: s.n_st,
                        ..gs_opts
                    })?
                    .field
            }
            _ => trap.field.clone(),
        };
        let alpha0 = match &start {
            Some(s) => {
                let eta0 = pump_at(&schedule, it.t_start);
                let delta = DmaModel::new(p).effective_detuning(&s.amplitudes());
                CavityAmplitude(Complex64::new(eta0, 0.0) / Complex64::new(p.kappa, delta))
            }
            None => CavityAmplitude::vacuum(),
        };
        let opts = GpIntegration {
            t_start: it.t_start,
            t_end,
            dt: it.dt,
            sample_stride: stride,
            cavity: it.cavity,
            alpha0,
            snapshot_times: it.snapshot_times.clone(),
        };
        let traj = integrate_gp(&mut stepper, &psi0, &basis, &schedule, &opts)?;
        if matches!(it.cavity, CavityMode::FullOde { .. }) {
            out.scalar("full_cavity_ode", 1.0);
        }
        for (k, snap) in traj.snapshots.iter().enumerate() {
            let name = format!("psi_gp_{k:03}.bin");
            let entry = write_bytes(&encode_snapshot(snap), &out.path(&name))?;
            out.add(entry);
        }
        series.push(("gp", Observation::from_gp(&traj)));
    }

    let overlay = if ramp {
        let s0 = start.as_ref().expect("ramp start state");
        let kappa = cfg.params.kappa;
        let cap = (schedule.peak() / kappa).powi(2) * (1.0 + 1e-6) + f64::EPSILON;
        let table = InverseMap::new(solver(cfg)?, cap, cfg.config.steady.overlay_points)?;
        let etas: Vec<f64> = series[0].1.iter().map(|o| o.eta).collect();
        Some(follow_branch(&table, &etas, s0.n_st)?)
    } else {
        None
    };

    for (tag, rows) in &series {
        let name = format!("timeseries_{tag}.csv");
        let entry = match &overlay {
            Some(branch) => write_timeseries_with_branch(rows, branch, &out.path(&name))?,
            None => write_timeseries(rows, &out.path(&name))?,
        };
        out.add(entry);
        record_series(out, tag, rows);
        if let Some(branch) = &overlay {
            let times: Vec<f64> = rows.iter().map(|o| o.t).collect();
            let n: Vec<f64> = rows.iter().map(|o| o.n_ph).collect();
            let t_c = breakdown_time(&times, &n, branch, &cfg.config.breakdown);
            out.scalar(
                format!("breakdown_detected_{tag}"),
                if t_c.is_some() { 1.0 } else { 0.0 },
            );
            if let Some(t_c) = t_c {
                out.scalar(format!("t_c_{tag}"), t_c);
            }
            let before = t_c.unwrap_or(f64::INFINITY);
            let dev = (0..rows.len())
                .filter(|&i| times[i] < before)
                .map(|i| relative_deviation(n[i], branch[i]))
                .fold(0.0, f64::max);
            out.scalar(format!("max_tracking_error_{tag}"), dev);
        }
    }
    if series.len() == 2 {
        let (dma, gp) = (&series[0].1, &series[1].1);
        let dp = |k: usize| {
            dma.iter()
                .zip(gp)
                .map(|(a, b)| (a.populations[k] - b.populations[k]).abs())
                .fold(0.0, f64::max)
        };
        out.scalar("max_abs_dp0", dp(0));
        out.scalar("max_abs_dp1", dp(1));
    }
    Ok(())
}

fn run_steady_scan(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let solver = solver(cfg)?;
    let st = &cfg.config.steady;
    let kappa = cfg.params.kappa;
    let n_max = st.etas.iter().map(|e| (e / kappa).powi(2)).fold(0.0, f64::max).max(1.0);
    let m = st.scan_points;
    for (i, &eta) in st.etas.iter().enumerate() {
        let rows = (0..=m).map(|k| {
            let n_tr = n_max * k as f64 / m as f64;
            [n_tr, solver.n_out(n_tr, eta)]
        });
        let entry = write_csv(&out.path(&format!("n_out_{i:02}.csv")), &N_OUT_HEADER, rows)?;
        out.add(entry);
        out.scalar(format!("eta_{i:02}"), eta);
        out.scalar(format!("count_{i:02}"), solver.count(eta)? as f64);
    }
    let trace = solver.trace(st.eta_min, st.eta_max, st.eta_step)?;
    let curve = trace.joined_curve();
    out.add(write_branch(&curve, &out.path("branch.csv"))?);
    out.scalar("branches", trace.branches.len() as f64);
    out.scalar("branch_gaps", trace.gaps as f64);
    out.scalar("branch_points", curve.len() as f64);
    Ok(())
}

fn run_fold_find(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let st = &cfg.config.steady;
    let [lo, hi] = st.fold_bracket;
    let report = solver(cfg)?.folds(lo, hi, st.fold_resolution)?;
    out.add(write_json(&report, &out.path("fold_report.json"))?);
    out.scalar("eta_1", report.eta_1);
    out.scalar("eta_2", report.eta_2);
    out.scalar("n_st1", report.n_st1);
    out.scalar("n_st2", report.n_st2);
    Ok(())
}

/// Indices of `m` samples out of `len`, ascending and distinct.
pub fn sample_indices(len: usize, m: usize, sampling: Sampling, seed: u64) -> Result<Vec<usize>> {
    if m < 2 || len < m {
        return Err(Error::config(
            "steady.sweep_points",
            format!("cannot draw {m} distinct samples from {len} branch points"),
        ));
    }
    let mut idx = match sampling {
        Sampling::Even => (0..m)
            .map(|k| (k * (len - 1) + (m - 1) / 2) / (m - 1))
            .collect::<Vec<_>>(),
        Sampling::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, len, m).into_vec()
        }
    };
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

fn run_stability_sweep(cfg: &ResolvedConfig, out: &mut Outputs) -> Result<()> {
    let st = &cfg.config.steady;
    let trace = solver(cfg)?.trace(st.eta_min, st.eta_max, st.eta_step)?;
    let curve = trace.joined_curve();
    let picked: Vec<SteadyState> = sample_indices(curve.len(), st.sweep_points, st.sampling, cfg.config.seed)?
        .into_iter()
        .map(|i| curve[i])
        .collect();
    let reports = classify_all(&picked, &cfg.params, st.tol_imag)?;
    out.add(write_branch_stability(&picked, &reports, &out.path("stability.csv"))?);

    let null = picked
        .iter()
        .map(|s| {
            let lin = build_linearization(s, &cfg.params);
            lin.null_mode_residual(&s.z0) / lin.m_mat.frobenius_norm()
        })
        .fold(0.0, f64::max);
    out.scalar("max_null_residual_rel", null);
    let unstable: Vec<f64> = picked
        .iter()
        .zip(&reports)
        .filter(|(_, r)| !r.stable)
        .map(|(s, _)| s.n_st)
        .collect();
    out.scalar("samples", picked.len() as f64);
    out.scalar("unstable_count", unstable.len() as f64);
    if !unstable.is_empty() {
        out.scalar("n_unstable_min", unstable.iter().copied().fold(f64::INFINITY, f64::min));
        out.scalar(
            "n_unstable_max",
            unstable.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
    }
    out.scalar(
        "max_i_m",
        reports.iter().map(|r| r.i_m).fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(())
}
