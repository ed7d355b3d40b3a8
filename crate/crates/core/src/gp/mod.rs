//! Split-step Gross-Pitaevskii propagation with a self-consistent cavity lattice.
//!
//! The dimensionless equation is
//! `i∂ψ/∂t̃ = (−∂²/∂x̃² + ω²x̃² + Ũ₀ n_ph cos²x̃ + g|ψ|²)ψ` on a periodic box.
//! The photon number either follows the condensate algebraically or is
//! taken from a co-integrated cavity amplitude.

pub mod snapshot;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dma::lorentzian_photons;
use crate::error::{Error, Result};
use crate::model::{pump_at, thomas_fermi, Params, PumpSchedule};
use crate::observables::ModeBasis;

pub use snapshot::{decode_snapshot, encode_snapshot, Snapshot, SNAPSHOT_MAGIC};

/// Smallest accepted grid size.
pub const MIN_POINTS: usize = 256;
/// Coarsest accepted spacing; the lattice period is π.
pub const MAX_DX: f64 = PI / 16.0;

pub const DEFAULT_HALF_LENGTH: f64 = 32.0 * PI;
pub const DEFAULT_POINTS: usize = 4096;
pub const DEFAULT_GP_DT: f64 = 5e-4;
/// Free space required between the Thomas-Fermi edge and the box boundary.
pub const EDGE_MARGIN: f64 = 40.0;

/// Uniform periodic grid on `[−L, L)` with its FFT-ordered momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_length: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
}

impl Grid {
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn momenta(&self) -> &[f64] {
        &self.k
    }

    /// Spacing of the momentum grid, `π/L`.
    pub fn dk(&self) -> f64 {
        PI / self.half_length
    }

    /// `∫ f dx̃` by the rectangle rule (spectrally accurate for periodic f).
    pub fn integrate(&self, f: impl Iterator<Item = f64>) -> f64 {
        f.sum::<f64>() * self.dx
    }

    /// Builds a grid and checks that the box holds the Thomas-Fermi cloud:
    /// `L ≥ 2 R_TF` and `L ≥ edge radius + EDGE_MARGIN`.
    pub fn for_params(half_length: f64, n_points: usize, params: &Params) -> Result<Grid> {
        let grid = make_grid(half_length, n_points)?;
        let tf = thomas_fermi(params.omega, params.g);
        if let (Some(r), Some(edge)) = (tf.r_tf, tf.edge_radius) {
            if half_length < 2.0 * r {
                return Err(Error::param(
                    "half_length",
                    format!("box half-length {half_length} is smaller than 2 R_TF = {:.4}", 2.0 * r),
                ));
            }
            if half_length < edge + EDGE_MARGIN {
                return Err(Error::param(
                    "half_length",
                    format!(
                        "box half-length {half_length} leaves less than {EDGE_MARGIN} beyond the cloud edge at {edge:.4}"
                    ),
                ));
            }
        }
        Ok(grid)
    }

    /// The default `L = 32π, n = 4096` grid, doubled (same spacing) until it
    /// passes [`Grid::for_params`].
    pub fn default_for(params: &Params) -> Result<Grid> {
        let (mut l, mut n) = (DEFAULT_HALF_LENGTH, DEFAULT_POINTS);
        for _ in 0..8 {
            match Grid::for_params(l, n, params) {
                Ok(g) => return Ok(g),
                Err(_) => {
                    l *= 2.0;
                    n *= 2;
                }
            }
        }
        Grid::for_params(l, n, params)
    }
}

pub fn make_grid(half_length: f64, n_points: usize) -> Result<Grid> {
    if !(half_length > 0.0 && half_length.is_finite()) {
        return Err(Error::param("half_length", "must be positive and finite"));
    }
    if n_points < MIN_POINTS || !n_points.is_power_of_two() {
        return Err(Error::param(
            "n_points",
            format!("must be a power of two no smaller than {MIN_POINTS}, got {n_points}"),
        ));
    }
    let dx = 2.0 * half_length / n_points as f64;
    if dx > MAX_DX {
        return Err(Error::param(
            "n_points",
            format!("spacing {dx:.4} exceeds π/16; the lattice is under-resolved"),
        ));
    }
    let x = (0..n_points).map(|j| -half_length + j as f64 * dx).collect();
    let dk = PI / half_length;
    let half = n_points / 2;
    let k = (0..n_points)
        .map(|j| if j < half { j as f64 } else { j as f64 - n_points as f64 } * dk)
        .collect();
    Ok(Grid { half_length, dx, x, k })
}

/// Condensate wavefunction samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensateField {
    pub psi: Vec<Complex64>,
}

impl CondensateField {
    /// Normalizes `psi` to unit norm; fails on a zero or non-finite field.
    pub fn new(psi: Vec<Complex64>, grid: &Grid) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::param("psi", "length differs from the grid"));
        }
        let mut f = CondensateField { psi };
        let n = f.norm(grid);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param("psi", "field must be finite and nonzero"));
        }
        f.scale(1.0 / n.sqrt());
        Ok(f)
    }

    pub fn from_real(values: impl IntoIterator<Item = f64>, grid: &Grid) -> Result<Self> {
        Self::new(values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), grid)
    }

    /// `Σ|ψ|² dx`.
    pub fn norm(&self, grid: &Grid) -> f64 {
        grid.integrate(self.psi.iter().map(|c| c.norm_sqr()))
    }

    pub fn normalize(&mut self, grid: &Grid) {
        let n = self.norm(grid);
        self.scale(1.0 / n.sqrt());
    }

    fn scale(&mut self, s: f64) {
        self.psi.iter_mut().for_each(|c| *c *= s);
    }

    pub fn density(&self) -> impl Iterator<Item = f64> + '_ {
        self.psi.iter().map(|c| c.norm_sqr())
    }
}

/// `⟨cos²x̃⟩ = ∫ |ψ|² cos²x̃ dx̃`.
pub fn overlap_cos2(field: &CondensateField, grid: &Grid) -> f64 {
    grid.integrate(
        field
            .psi
            .iter()
            .zip(grid.positions())
            .map(|(c, &x)| c.norm_sqr() * x.cos().powi(2)),
    )
}

/// Effective detuning seen by the cavity for a given lattice overlap.
pub fn detuning_from_overlap(cos2: f64, params: &Params) -> f64 {
    params.delta_c_prime + params.atom_number * params.u0 * (cos2 - 0.5)
}

/// Photon number of the adiabatically eliminated cavity.
pub fn photon_number_gp(field: &CondensateField, grid: &Grid, eta: f64, params: &Params) -> f64 {
    let d = detuning_from_overlap(overlap_cos2(field, grid), params);
    lorentzian_photons(eta, params.kappa, d)
}

/// Mean cavity amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityAmplitude(pub Complex64);

impl CavityAmplitude {
    pub fn vacuum() -> Self {
        CavityAmplitude(Complex64::new(0.0, 0.0))
    }

    pub fn photons(&self) -> f64 {
        self.0.norm_sqr()
    }
}

/// `dα/dt̃ = −i(Δ̃c + NŨ₀⟨cos²x̃⟩)α − κ̃α + η̃`.
pub fn cavity_rhs(alpha: CavityAmplitude, cos2: f64, eta: f64, params: &Params) -> Complex64 {
    let rotation = params.delta_c() + params.atom_number * params.u0 * cos2;
    Complex64::new(-params.kappa, -rotation) * alpha.0 + eta
}

/// Exact update of the linear cavity equation over `h` with the overlap and
/// pump held fixed.
fn cavity_exact_step(alpha: Complex64, cos2: f64, eta: f64, h: f64, params: &Params) -> Complex64 {
    let rate = Complex64::new(params.kappa, detuning_from_overlap(cos2, params));
    let decay = (-rate * h).exp();
    alpha * decay + eta / rate * (1.0 - decay)
}

/// How the photon number is obtained during real-time propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CavityMode {
    /// Photon number from the instantaneous overlap.
    Adiabatic,
    /// Cavity amplitude co-integrated with `substeps` exact sub-updates per step.
    FullOde { substeps: usize },
}

/// Largest accepted `κ̃·h` for a cavity substep.
pub const MAX_CAVITY_STEP: f64 = 0.1;

/// FFT workspace and the fixed parts of the potential for one grid.
pub struct SplitStepper {
    grid: Grid,
    params: Params,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    trap: Vec<f64>,
    cos2: Vec<f64>,
    kinetic_cache: Option<(f64, Vec<Complex64>)>,
}

impl std::fmt::Debug for SplitStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStepper")
            .field("points", &self.grid.len())
            .field("params", &self.params)
            .finish()
    }
}

impl SplitStepper {
    pub fn new(grid: Grid, params: Params) -> Result<Self> {
        params.validate()?;
        let mut planner = FftPlanner::new();
        let n = grid.len();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let trap = grid.positions().iter().map(|&x| (params.omega * x).powi(2)).collect();
        let cos2 = grid.positions().iter().map(|&x| x.cos().powi(2)).collect();
        Ok(SplitStepper {
            grid,
            params,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            trap,
            cos2,
            kinetic_cache: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    /// `−∂²ψ` evaluated spectrally.
    pub fn laplacian(&mut self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut buf = psi.to_vec();
        self.forward(&mut buf);
        for (c, &k) in buf.iter_mut().zip(self.grid.k.iter()) {
            *c *= k * k;
        }
        self.inverse(&mut buf);
        buf
    }

    /// `∫|∂ψ|² dx̃` from the Fourier coefficients.
    pub fn kinetic_energy(&mut self, psi: &[Complex64]) -> f64 {
        let mut buf = psi.to_vec();
        self.forward(&mut buf);
        let n = buf.len() as f64;
        let s: f64 = buf
            .iter()
            .zip(self.grid.k.iter())
            .map(|(c, &k)| k * k * c.norm_sqr())
            .sum();
        s * self.grid.dx / n
    }

    /// Local potential `ω²x̃² + Ũ₀ n_ph cos²x̃ + g|ψ|²` at sample `j`.
    fn potential(&self, j: usize, n_ph: f64, density: f64) -> f64 {
        self.trap[j] + self.params.u0 * n_ph * self.cos2[j] + self.params.g * density
    }

    fn potential_phase(&self, psi: &mut [Complex64], h: f64, n_ph: f64) {
        for (j, c) in psi.iter_mut().enumerate() {
            let v = self.potential(j, n_ph, c.norm_sqr());
            *c *= Complex64::from_polar(1.0, -v * h);
        }
    }

    fn kinetic_phase(&mut self, psi: &mut [Complex64], dt: f64) {
        let stale = !matches!(&self.kinetic_cache, Some((h, _)) if *h == dt);
        if stale {
            let phases = self
                .grid
                .k
                .iter()
                .map(|&k| Complex64::from_polar(1.0, -k * k * dt))
                .collect();
            self.kinetic_cache = Some((dt, phases));
        }
        self.forward(psi);
        if let Some((_, phases)) = &self.kinetic_cache {
            for (c, p) in psi.iter_mut().zip(phases.iter()) {
                *c *= p;
            }
        }
        self.inverse(psi);
    }

    /// One Strang step with the photon number frozen at `n_ph`.
    pub fn split_step(&mut self, field: &mut CondensateField, dt: f64, n_ph: f64) {
        self.potential_phase(&mut field.psi, 0.5 * dt, n_ph);
        self.kinetic_phase(&mut field.psi, dt);
        self.potential_phase(&mut field.psi, 0.5 * dt, n_ph);
    }

    pub fn overlap_cos2(&self, field: &CondensateField) -> f64 {
        self.grid
            .integrate(field.psi.iter().zip(self.cos2.iter()).map(|(c, w)| c.norm_sqr() * w))
    }

    /// `Ĥψ` for the GP operator at photon number `n_ph`.
    pub fn apply_hamiltonian(&mut self, psi: &[Complex64], n_ph: f64) -> Vec<Complex64> {
        let mut out = self.laplacian(psi);
        for (j, (o, c)) in out.iter_mut().zip(psi.iter()).enumerate() {
            *o += self.potential(j, n_ph, c.norm_sqr()) * c;
        }
        out
    }

    /// Imaginary-time step `exp(−Ĥ h)` in Strang form, followed by renormalization.
    fn imaginary_step(&mut self, field: &mut CondensateField, h: f64, n_ph: f64) {
        let damp = |s: &Self, psi: &mut [Complex64], h: f64| {
            for (j, c) in psi.iter_mut().enumerate() {
                *c *= (-s.potential(j, n_ph, c.norm_sqr()) * h).exp();
            }
        };
        damp(self, &mut field.psi, 0.5 * h);
        self.forward(&mut field.psi);
        for (c, &k) in field.psi.iter_mut().zip(self.grid.k.iter()) {
            *c *= (-k * k * h).exp();
        }
        self.inverse(&mut field.psi);
        damp(self, &mut field.psi, 0.5 * h);
        field.normalize(&self.grid);
    }
}

/// Options for the ground-state solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateOptions {
    /// Energy-change tolerance; the residual must also fall below `10·tol`.
    pub tol: f64,
    /// Imaginary-time step of the warm-up phase.
    pub imag_dt: f64,
    pub warmup_steps: usize,
    pub max_iterations: usize,
    /// Photon number of a frozen lattice; zero for the bare trap.
    pub lattice_photons: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            tol: 1e-10,
            imag_dt: 1e-3,
            warmup_steps: 500,
            max_iterations: 50_000,
            lattice_photons: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub field: CondensateField,
    pub mu: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Initial guess: Thomas-Fermi profile, oscillator Gaussian, or a flat field.
fn initial_guess(grid: &Grid, params: &Params) -> Result<CondensateField> {
    let tf = thomas_fermi(params.omega, params.g);
    let (w, g) = (params.omega, params.g);
    let values: Vec<f64> = if g > 0.0 && w > 0.0 {
        grid.positions()
            .iter()
            .map(|&x| ((tf.mu - w * w * x * x).max(0.0) / g).sqrt() + 1e-6 * (-w * x * x / 2.0).exp())
            .collect()
    } else if w > 0.0 {
        grid.positions().iter().map(|&x| (-w * x * x / 2.0).exp()).collect()
    } else {
        vec![1.0; grid.len()]
    };
    CondensateField::from_real(values, grid)
}

impl SplitStepper {
    /// Ground state of the GP operator with the lattice frozen at
    /// `opts.lattice_photons`.
    ///
    /// A short imaginary-time warm-up is followed by preconditioned gradient
    /// descent `ψ ← ψ − τ P(Ĥψ − μψ)`, `P = (1 + |μ| + k²)⁻¹`, renormalizing
    /// every iterate.
    pub fn ground_state(&mut self, opts: &GroundStateOptions) -> Result<GroundState> {
        if !(opts.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        let grid = self.grid.clone();
        let n_ph = opts.lattice_photons;
        let mut field = initial_guess(&grid, &self.params)?;
        for _ in 0..opts.warmup_steps {
            self.imaginary_step(&mut field, opts.imag_dt, n_ph);
        }

        const STEP: f64 = 0.5;
        let mut prev_energy = f64::INFINITY;
        let mut residual = f64::INFINITY;
        for it in 0..opts.max_iterations {
            let h_psi = self.apply_hamiltonian(&field.psi, n_ph);
            let mu = grid.integrate(field.psi.iter().zip(h_psi.iter()).map(|(a, b)| (a.conj() * b).re));
            let mut r: Vec<Complex64> = h_psi.iter().zip(field.psi.iter()).map(|(h, p)| h - mu * p).collect();
            residual = grid.integrate(r.iter().map(|c| c.norm_sqr())).sqrt();
            let energy = crate::observables::energy_with(self, &field, n_ph);
            if residual < 10.0 * opts.tol && (energy - prev_energy).abs() < opts.tol {
                return Ok(GroundState {
                    field,
                    mu,
                    energy,
                    residual,
                    iterations: it,
                });
            }
            prev_energy = energy;
            let shift = 1.0 + mu.abs();
            self.forward(&mut r);
            for (c, &k) in r.iter_mut().zip(grid.k.iter()) {
                *c /= shift + k * k;
            }
            self.inverse(&mut r);
            for (p, d) in field.psi.iter_mut().zip(r.iter()) {
                *p -= STEP * d;
            }
            field.normalize(&grid);
        }
        Err(Error::NoConvergence {
            method: "ground state",
            iterations: opts.max_iterations,
            residual,
        })
    }
}

/// Ground state of the bare trap (no lattice).
pub fn ground_state_imag_time(grid: &Grid, params: &Params, tol: f64) -> Result<CondensateField> {
    let mut stepper = SplitStepper::new(grid.clone(), *params)?;
    let opts = GroundStateOptions {
        tol,
        ..GroundStateOptions::default()
    };
    Ok(stepper.ground_state(&opts)?.field)
}

/// Options for [`integrate_gp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpIntegration {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_stride: usize,
    pub cavity: CavityMode,
    /// Initial cavity amplitude in `FullOde` mode.
    pub alpha0: CavityAmplitude,
    /// Times at which field snapshots are taken (nearest following step).
    pub snapshot_times: Vec<f64>,
}

impl GpIntegration {
    pub fn new(t_end: f64) -> Self {
        GpIntegration {
            t_start: 0.0,
            t_end,
            dt: DEFAULT_GP_DT,
            sample_stride: 20,
            cavity: CavityMode::Adiabatic,
            alpha0: CavityAmplitude::vacuum(),
            snapshot_times: Vec::new(),
        }
    }
}

/// Sampled GP trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct GpTrajectory {
    pub times: Vec<f64>,
    pub pump_values: Vec<f64>,
    pub photon_numbers: Vec<f64>,
    pub detunings: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub populations: Vec<[f64; 3]>,
    pub norms: Vec<f64>,
    pub alpha: Option<Vec<Complex64>>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
}

impl GpTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Real-time propagation from `psi0`.
///
/// In adiabatic mode the photon number for the first half potential step comes
/// from the current density and pump, and is refreshed after the kinetic step
/// with the pump at the end of the step. In full mode the cavity amplitude is
/// advanced across the step with the overlap interpolated linearly between
/// its values before and after the kinetic step.
pub fn integrate_gp(
    stepper: &mut SplitStepper,
    psi0: &CondensateField,
    basis: &ModeBasis,
    schedule: &PumpSchedule,
    opts: &GpIntegration,
) -> Result<GpTrajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if !(opts.t_end > opts.t_start) {
        return Err(Error::param("t_end", "must exceed t_start"));
    }
    if opts.sample_stride == 0 {
        return Err(Error::param("sample_stride", "must be at least 1"));
    }
    schedule.validate()?;
    let grid = stepper.grid.clone();
    if psi0.psi.len() != grid.len() || basis.len() != grid.len() {
        return Err(Error::param("psi0", "field, basis and grid sizes differ"));
    }
    if (psi0.norm(&grid) - 1.0).abs() > 1e-9 {
        return Err(Error::param("psi0", "initial field must be normalized"));
    }
    let steps = crate::dma::step_count(opts.t_end - opts.t_start, opts.dt);
    let dt = (opts.t_end - opts.t_start) / steps as f64;
    let substeps = match opts.cavity {
        CavityMode::Adiabatic => 0,
        CavityMode::FullOde { substeps } => {
            let h = dt / substeps.max(1) as f64;
            if substeps == 0 || stepper.params.kappa * h > MAX_CAVITY_STEP {
                return Err(Error::param(
                    "substeps",
                    format!(
                        "cavity substep κ·h = {:.3} exceeds {MAX_CAVITY_STEP}",
                        stepper.params.kappa * h
                    ),
                ));
            }
            substeps
        }
    };
    let params = stepper.params;
    let full = substeps > 0;

    let mut traj = GpTrajectory {
        times: Vec::new(),
        pump_values: Vec::new(),
        photon_numbers: Vec::new(),
        detunings: Vec::new(),
        overlaps: Vec::new(),
        populations: Vec::new(),
        norms: Vec::new(),
        alpha: full.then(Vec::new),
        snapshots: Vec::new(),
        dt,
    };
    let mut pending: Vec<f64> = opts.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.reverse();

    let mut field = psi0.clone();
    let mut alpha = opts.alpha0.0;
    let photons = |cos2: f64, eta: f64, alpha: Complex64| {
        if full {
            alpha.norm_sqr()
        } else {
            lorentzian_photons(eta, params.kappa, detuning_from_overlap(cos2, &params))
        }
    };
    let record = |traj: &mut GpTrajectory,
                  pending: &mut Vec<f64>,
                  t: f64,
                  field: &CondensateField,
                  alpha: Complex64,
                  cos2: f64| {
        let eta = pump_at(schedule, t);
        traj.times.push(t);
        traj.pump_values.push(eta);
        traj.photon_numbers.push(photons(cos2, eta, alpha));
        traj.detunings.push(detuning_from_overlap(cos2, &params));
        traj.overlaps.push(cos2);
        traj.populations.push(basis.populations(field));
        traj.norms.push(field.norm(&grid));
        if let Some(a) = traj.alpha.as_mut() {
            a.push(alpha);
        }
        while pending.last().is_some_and(|&s| s <= t + 1e-12) {
            pending.pop();
            traj.snapshots.push(Snapshot::from_field(t, &grid, field));
        }
    };

    let mut cos2 = stepper.overlap_cos2(&field);
    record(&mut traj, &mut pending, opts.t_start, &field, alpha, cos2);
    for step in 1..=steps {
        let t = opts.t_start + (step - 1) as f64 * dt;
        let n_first = photons(cos2, pump_at(schedule, t), alpha);
        stepper.potential_phase(&mut field.psi, 0.5 * dt, n_first);
        stepper.kinetic_phase(&mut field.psi, dt);
        let cos2_next = stepper.overlap_cos2(&field);
        if full {
            let h = dt / substeps as f64;
            for s in 0..substeps {
                let frac = (s as f64 + 0.5) / substeps as f64;
                let c = cos2 + (cos2_next - cos2) * frac;
                let eta = pump_at(schedule, t + frac * dt);
                alpha = cavity_exact_step(alpha, c, eta, h, &params);
            }
        }
        let t_next = opts.t_start + step as f64 * dt;
        let n_second = photons(cos2_next, pump_at(schedule, t_next), alpha);
        stepper.potential_phase(&mut field.psi, 0.5 * dt, n_second);
        cos2 = cos2_next;
        if step % opts.sample_stride == 0 || step == steps {
            record(&mut traj, &mut pending, t_next, &field, alpha, cos2);
        }
    }
    Ok(traj)
}
