//! Measured quantities shared by both engines.

use num_complex::Complex64;
use serde::Serialize;

use crate::dma::{DmaTrajectory, ModeAmplitudes};
use crate::error::{Error, Result};
use crate::gp::{CondensateField, GpTrajectory, Grid, SplitStepper};
use crate::model::Params;

/// The three standing-wave modes `φ₀ = Ψ_g`, `φₙ = √2 cos(2n x̃) Ψ_g`.
///
/// The modes are only approximately orthonormal; no orthogonalization is
/// applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    modes: [Vec<Complex64>; 3],
    dx: f64,
}

impl ModeBasis {
    pub fn new(grid: &Grid, ground: &CondensateField) -> Result<Self> {
        if ground.psi.len() != grid.len() {
            return Err(Error::param("ground", "length differs from the grid"));
        }
        let mode = |n: usize| -> Vec<Complex64> {
            grid.positions()
                .iter()
                .zip(ground.psi.iter())
                .map(|(&x, &g)| {
                    if n == 0 {
                        g
                    } else {
                        g * (std::f64::consts::SQRT_2 * (2.0 * n as f64 * x).cos())
                    }
                })
                .collect()
        };
        Ok(ModeBasis {
            modes: [mode(0), mode(1), mode(2)],
            dx: grid.dx(),
        })
    }

    pub fn len(&self) -> usize {
        self.modes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes[0].is_empty()
    }

    pub fn mode(&self, n: usize) -> &[Complex64] {
        &self.modes[n]
    }

    /// `⟨φₙ|ψ⟩`.
    pub fn project(&self, n: usize, field: &CondensateField) -> Complex64 {
        self.modes[n]
            .iter()
            .zip(field.psi.iter())
            .map(|(m, p)| m.conj() * p)
            .sum::<Complex64>()
            * self.dx
    }

    /// `Pₙ = |⟨φₙ|ψ⟩|²`; the caller guarantees matching lengths.
    pub fn populations(&self, field: &CondensateField) -> [f64; 3] {
        [0, 1, 2].map(|n| self.project(n, field).norm_sqr())
    }
}

pub fn populations(field: &CondensateField, basis: &ModeBasis, grid: &Grid) -> Result<[f64; 3]> {
    if field.psi.len() != grid.len() || basis.len() != grid.len() || basis.dx != grid.dx() {
        return Err(Error::param("grid", "field, basis and grid do not match"));
    }
    Ok(basis.populations(field))
}

pub fn dma_populations(z: &ModeAmplitudes) -> [f64; 3] {
    z.0.map(|c| c.norm_sqr())
}

/// `∫ |∂ψ|² + (ω²x̃² + Ũ₀ n_ph cos²x̃)|ψ|² + (g/2)|ψ|⁴ dx̃`, kinetic part spectral.
pub fn gp_energy(field: &CondensateField, n_ph: f64, params: &Params, grid: &Grid) -> Result<f64> {
    if field.psi.len() != grid.len() {
        return Err(Error::param("psi", "length differs from the grid"));
    }
    let mut stepper = SplitStepper::new(grid.clone(), *params)?;
    Ok(energy_with(&mut stepper, field, n_ph))
}

pub(crate) fn energy_with(stepper: &mut SplitStepper, field: &CondensateField, n_ph: f64) -> f64 {
    let kinetic = stepper.kinetic_energy(&field.psi);
    let p = *stepper.params();
    let grid = stepper.grid();
    let local = grid.integrate(field.psi.iter().zip(grid.positions()).map(|(c, &x)| {
        let d = c.norm_sqr();
        ((p.omega * x).powi(2) + p.u0 * n_ph * x.cos().powi(2)) * d + 0.5 * p.g * d * d
    }));
    kinetic + local
}

/// Mean spacing of the local maxima that rise above the series mean, or
/// `None` with fewer than two such maxima.
pub fn oscillation_period(times: &[f64], values: &[f64]) -> Option<f64> {
    let n = times.len().min(values.len());
    if n < 3 {
        return None;
    }
    let mean = values[..n].iter().sum::<f64>() / n as f64;
    let peaks: Vec<f64> = (1..n - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1] && values[i] > mean)
        .map(|i| times[i])
        .collect();
    match peaks.as_slice() {
        [first, .., last] => Some((last - first) / (peaks.len() - 1) as f64),
        _ => None,
    }
}

/// One sampled row of a time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub t: f64,
    pub eta: f64,
    pub n_ph: f64,
    pub delta_eff: f64,
    pub populations: [f64; 3],
    pub norm: f64,
    pub energy: Option<f64>,
}

impl Observation {
    pub fn from_dma(traj: &DmaTrajectory) -> Vec<Observation> {
        (0..traj.len())
            .map(|i| Observation {
                t: traj.times[i],
                eta: traj.pump_values[i],
                n_ph: traj.photon_numbers[i],
                delta_eff: traj.detunings[i],
                populations: dma_populations(&traj.states[i]),
                norm: traj.states[i].norm_sqr(),
                energy: None,
            })
            .collect()
    }

    pub fn from_gp(traj: &GpTrajectory) -> Vec<Observation> {
        (0..traj.len())
            .map(|i| Observation {
                t: traj.times[i],
                eta: traj.pump_values[i],
                n_ph: traj.photon_numbers[i],
                delta_eff: traj.detunings[i],
                populations: traj.populations[i],
                norm: traj.norms[i],
                energy: None,
            })
            .collect()
    }
}
