//! Three-mode (discrete-mode) reduction of the condensate.
//!
//! The condensate is expanded on the standing-wave modes `φ₀ = Ψ_g`,
//! `φ₁ = √2 cos(2x̃) Ψ_g`, `φ₂ = √2 cos(4x̃) Ψ_g`. The cavity field is
//! eliminated adiabatically, so the amplitudes obey
//! `i dZ/dt̃ = (H₁ + n_ph(Z) H₂) Z` with an algebraic photon number.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat3;
use crate::model::{pump_at, Params, PumpSchedule};

const SQRT2: f64 = std::f64::consts::SQRT_2;
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Normalized mode amplitudes `(Z₀, Z₁, Z₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeAmplitudes(pub [Complex64; 3]);

impl ModeAmplitudes {
    /// All atoms in the ground mode.
    pub fn ground() -> Self {
        ModeAmplitudes([
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
    }

    /// Normalizes `z`; fails on a zero or non-finite vector.
    pub fn normalized(z: [Complex64; 3]) -> Result<Self> {
        let n = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param("z", "mode amplitudes must be finite and nonzero"));
        }
        Ok(ModeAmplitudes(z.map(|c| c / n)))
    }

    pub fn from_real(z: [f64; 3]) -> Result<Self> {
        Self::normalized(z.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn conj(&self) -> Self {
        ModeAmplitudes(self.0.map(|c| c.conj()))
    }
}

/// The matrices `H₁ = diag(0, 4, 16)` and `H₂ = (Ũ₀/4)[[0,√2,0],[√2,0,1],[0,1,0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmaGenerators {
    pub h1: Mat3,
    pub h2: Mat3,
}

impl DmaGenerators {
    /// `H₁ + n H₂`.
    pub fn hamiltonian(&self, n_ph: f64) -> Mat3 {
        let mut h = self.h1;
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += n_ph * self.h2[i][j];
            }
        }
        h
    }

    /// `Z†H₂Z`, real because `H₂` is real symmetric.
    pub fn h2_expectation(&self, z: &ModeAmplitudes) -> f64 {
        let z = &z.0;
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.h2[i][j] * (z[i].conj() * z[j]).re;
            }
        }
        acc
    }

    /// Spectral radius of `H₂`, `(Ũ₀/4)√3`.
    pub fn h2_spectral_radius(&self) -> f64 {
        self.h2[1][2].abs() * 3f64.sqrt()
    }
}

pub fn build_generators(params: &Params) -> DmaGenerators {
    let c = params.u0 / 4.0;
    DmaGenerators {
        h1: [[0.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 16.0]],
        h2: [[0.0, SQRT2 * c, 0.0], [SQRT2 * c, 0.0, c], [0.0, c, 0.0]],
    }
}

/// Photon number of the driven, damped cavity at detuning `delta_eff`.
pub fn lorentzian_photons(eta: f64, kappa: f64, delta_eff: f64) -> f64 {
    eta * eta / (kappa * kappa + delta_eff * delta_eff)
}

/// The reduced model: parameters plus their generator matrices.
#[derive(Debug, Clone, Copy)]
pub struct DmaModel {
    pub params: Params,
    pub gens: DmaGenerators,
}

impl DmaModel {
    pub fn new(params: Params) -> Self {
        DmaModel {
            params,
            gens: build_generators(&params),
        }
    }

    /// `Δ̃_eff = Δ̃c′ + N Z†H₂Z`.
    pub fn effective_detuning(&self, z: &ModeAmplitudes) -> f64 {
        self.params.delta_c_prime + self.params.atom_number * self.gens.h2_expectation(z)
    }

    pub fn photon_number(&self, z: &ModeAmplitudes, eta: f64) -> f64 {
        lorentzian_photons(eta, self.params.kappa, self.effective_detuning(z))
    }

    /// `dZ/dt̃ = −i(H₁ + n_ph H₂)Z` at pump value `eta`.
    pub fn derivative(&self, z: &[Complex64; 3], eta: f64) -> [Complex64; 3] {
        let amp = ModeAmplitudes(*z);
        let n = self.photon_number(&amp, eta);
        let h = self.gens.hamiltonian(n);
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for i in 0..3 {
            let hz = h[i][0] * z[0] + h[i][1] * z[1] + h[i][2] * z[2];
            out[i] = -I * hz;
        }
        out
    }

    fn rk4_step(&self, z: &[Complex64; 3], t: f64, dt: f64, schedule: &PumpSchedule) -> [Complex64; 3] {
        let axpy = |a: &[Complex64; 3], k: &[Complex64; 3], h: f64| [a[0] + k[0] * h, a[1] + k[1] * h, a[2] + k[2] * h];
        let eta0 = pump_at(schedule, t);
        let eta_mid = pump_at(schedule, t + 0.5 * dt);
        let eta1 = pump_at(schedule, t + dt);
        let k1 = self.derivative(z, eta0);
        let k2 = self.derivative(&axpy(z, &k1, 0.5 * dt), eta_mid);
        let k3 = self.derivative(&axpy(z, &k2, 0.5 * dt), eta_mid);
        let k4 = self.derivative(&axpy(z, &k3, dt), eta1);
        let mut out = *z;
        for i in 0..3 {
            out[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
        out
    }
}

pub fn effective_detuning(z: &ModeAmplitudes, params: &Params) -> f64 {
    DmaModel::new(*params).effective_detuning(z)
}

pub fn photon_number_dma(z: &ModeAmplitudes, eta: f64, params: &Params) -> f64 {
    DmaModel::new(*params).photon_number(z, eta)
}

pub fn dma_rhs(z: &ModeAmplitudes, t: f64, schedule: &PumpSchedule, params: &Params) -> [Complex64; 3] {
    DmaModel::new(*params).derivative(&z.0, pump_at(schedule, t))
}

/// Default fixed step of the three-mode integrator.
pub const DEFAULT_DMA_DT: f64 = 5e-4;
/// Steps at or above this size are refused.
pub const MAX_DMA_DT: f64 = 0.01;

/// Options for [`integrate_dma`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmaIntegration {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Record every `sample_stride`-th step (the initial state is always recorded).
    pub sample_stride: usize,
    /// Renormalize when `|‖z‖² − 1|` exceeds this; `None` disables it.
    pub renormalize_above: Option<f64>,
}

impl DmaIntegration {
    pub fn new(t_end: f64) -> Self {
        DmaIntegration {
            t_start: 0.0,
            t_end,
            dt: DEFAULT_DMA_DT,
            sample_stride: 20,
            renormalize_above: Some(1e-12),
        }
    }
}

/// Sampled three-mode trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct DmaTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModeAmplitudes>,
    pub photon_numbers: Vec<f64>,
    pub detunings: Vec<f64>,
    pub pump_values: Vec<f64>,
    /// Number of times the norm safeguard fired.
    pub renormalizations: usize,
    pub dt: f64,
}

impl DmaTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &ModeAmplitudes {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Number of fixed steps covering `span` with steps no larger than `dt`.
pub(crate) fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Classical fourth-order Runge–Kutta integration of the three-mode model.
/// The photon number is re-evaluated at every stage.
pub fn integrate_dma(
    model: &DmaModel,
    z0: &ModeAmplitudes,
    schedule: &PumpSchedule,
    opts: &DmaIntegration,
) -> Result<DmaTrajectory> {
    if !(opts.dt > 0.0) || opts.dt >= MAX_DMA_DT {
        return Err(Error::param(
            "dt",
            format!("must satisfy 0 < dt < {MAX_DMA_DT}, got {}", opts.dt),
        ));
    }
    if !(opts.t_end > opts.t_start) {
        return Err(Error::param("t_end", "must exceed t_start"));
    }
    if opts.sample_stride == 0 {
        return Err(Error::param("sample_stride", "must be at least 1"));
    }
    if (z0.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::param("z0", "initial amplitudes must be normalized"));
    }
    schedule.validate()?;

    let steps = step_count(opts.t_end - opts.t_start, opts.dt);
    let dt = (opts.t_end - opts.t_start) / steps as f64;
    let cap = steps / opts.sample_stride + 2;
    let mut traj = DmaTrajectory {
        times: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        photon_numbers: Vec::with_capacity(cap),
        detunings: Vec::with_capacity(cap),
        pump_values: Vec::with_capacity(cap),
        renormalizations: 0,
        dt,
    };
    let record = |traj: &mut DmaTrajectory, t: f64, z: &[Complex64; 3]| {
        let amp = ModeAmplitudes(*z);
        let eta = pump_at(schedule, t);
        let delta = model.effective_detuning(&amp);
        traj.times.push(t);
        traj.states.push(amp);
        traj.detunings.push(delta);
        traj.photon_numbers
            .push(lorentzian_photons(eta, model.params.kappa, delta));
        traj.pump_values.push(eta);
    };

    let mut z = z0.0;
    record(&mut traj, opts.t_start, &z);
    for step in 1..=steps {
        let t = opts.t_start + (step - 1) as f64 * dt;
        z = model.rk4_step(&z, t, dt, schedule);
        if let Some(limit) = opts.renormalize_above {
            let n2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            if (n2 - 1.0).abs() > limit {
                let s = n2.sqrt();
                z.iter_mut().for_each(|c| *c /= s);
                traj.renormalizations += 1;
            }
        }
        if step % opts.sample_stride == 0 || step == steps {
            record(&mut traj, opts.t_start + step as f64 * dt, &z);
        }
    }
    Ok(traj)
}
