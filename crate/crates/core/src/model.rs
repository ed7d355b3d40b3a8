//! Parameter sets, conversion to recoil units, pump schedules and
//! Thomas–Fermi diagnostics.
//!
//! Every dimensionless quantity in this crate is measured in recoil units:
//! energies and rates in units of `ω_r = ħk²/2m`, times in units of `1/ω_r`
//! and lengths in units of `ξ = λ/2π`, so the cavity lattice reads `cos² x̃`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Laboratory-unit inputs. Frequencies are angular (rad/s), `interaction_1d`
/// is in J·m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub atom_mass: f64,
    pub wavelength: f64,
    pub axial_trap_frequency: f64,
    pub atom_photon_coupling: f64,
    pub atom_pump_detuning: f64,
    pub cavity_pump_detuning: f64,
    pub cavity_decay: f64,
    pub pump_amplitude: f64,
    pub interaction_1d: f64,
    pub atom_number: f64,
}

impl PhysicalParams {
    /// Recoil frequency `ħk²/2m` in rad/s.
    pub fn recoil_frequency(&self) -> f64 {
        let k = 2.0 * std::f64::consts::PI / self.wavelength;
        HBAR * k * k / (2.0 * self.atom_mass)
    }

    /// Maximal light shift per photon, `U₀ = −g₀²/Δa`, in rad/s.
    pub fn light_shift_per_photon(&self) -> f64 {
        -self.atom_photon_coupling * self.atom_photon_coupling / self.atom_pump_detuning
    }

    fn validate(&self) -> Result<()> {
        if !(self.atom_mass > 0.0) {
            return Err(Error::param("atom_mass", "must be positive"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::param("wavelength", "must be positive"));
        }
        if !(self.cavity_decay > 0.0) {
            return Err(Error::param("cavity_decay", "must be positive"));
        }
        if !(self.atom_number >= 1.0) {
            return Err(Error::param("atom_number", "must be at least 1"));
        }
        if self.atom_pump_detuning == 0.0 || !self.atom_pump_detuning.is_finite() {
            return Err(Error::param(
                "atom_pump_detuning",
                "must be finite and nonzero (U0 = -g0^2/Delta_a)",
            ));
        }
        if !(self.axial_trap_frequency >= 0.0) {
            return Err(Error::param("axial_trap_frequency", "must be nonnegative"));
        }
        if !(self.interaction_1d >= 0.0) {
            return Err(Error::param("interaction_1d", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Dimensionless parameter set shared by every engine.
///
/// The detuning is stored as `Δ̃c′ = Δ̃c + NŨ₀/2`, the cavity-pump detuning
/// seen by a condensate at rest in its ground mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub u0: f64,
    pub delta_c_prime: f64,
    pub kappa: f64,
    pub omega: f64,
    pub g: f64,
    pub atom_number: f64,
}

impl Params {
    pub fn new(u0: f64, delta_c_prime: f64, kappa: f64, omega: f64, g: f64, atom_number: f64) -> Result<Self> {
        let p = Params {
            u0,
            delta_c_prime,
            kappa,
            omega,
            g,
            atom_number,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds the parameter set from the bare detuning `Δ̃c`.
    pub fn from_bare_detuning(u0: f64, delta_c: f64, kappa: f64, omega: f64, g: f64, atom_number: f64) -> Result<Self> {
        Self::new(u0, delta_c + 0.5 * atom_number * u0, kappa, omega, g, atom_number)
    }

    /// The bare detuning `Δ̃c = Δ̃c′ − NŨ₀/2`.
    pub fn delta_c(&self) -> f64 {
        self.delta_c_prime - 0.5 * self.atom_number * self.u0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("u0", self.u0),
            ("delta_c_prime", self.delta_c_prime),
            ("kappa", self.kappa),
            ("omega", self.omega),
            ("g", self.g),
            ("atom_number", self.atom_number),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.kappa <= 0.0 {
            return Err(Error::param("kappa", "must be positive"));
        }
        if self.atom_number < 1.0 {
            return Err(Error::param("atom_number", "must be at least 1"));
        }
        if self.g < 0.0 {
            return Err(Error::param("g", "must be nonnegative"));
        }
        if self.omega < 0.0 {
            return Err(Error::param("omega", "must be nonnegative"));
        }
        Ok(())
    }

    /// Constant-pump reference setup: `N = 4.8e4`, `Ũ₀ = 0.25`,
    /// `(κ̃, Δ̃c′) = (400, 400)`, `ω = 0.01`.
    pub fn constant_pump_reference(g: f64) -> Self {
        Params {
            u0: 0.25,
            delta_c_prime: 400.0,
            kappa: 400.0,
            omega: 0.01,
            g,
            atom_number: 4.8e4,
        }
    }

    /// Steady-state reference setup: `(κ̃, Δ̃c′) = (400, 1200)`, `ω = 0.01`, `g = 10`.
    pub fn bistable_reference() -> Self {
        Params {
            u0: 0.25,
            delta_c_prime: 1200.0,
            kappa: 400.0,
            omega: 0.01,
            g: 10.0,
            atom_number: 4.8e4,
        }
    }
}

/// Converts laboratory inputs to recoil units. Returns the parameter set and
/// the dimensionless pump amplitude `η̃` separately.
pub fn nondimensionalize(p: &PhysicalParams) -> Result<(Params, f64)> {
    p.validate()?;
    let omega_r = p.recoil_frequency();
    let xi = p.wavelength / (2.0 * std::f64::consts::PI);
    let u0 = p.light_shift_per_photon() / omega_r;
    let delta_c = p.cavity_pump_detuning / omega_r;
    let kappa = p.cavity_decay / omega_r;
    let eta = p.pump_amplitude / omega_r;
    let omega = (p.atom_mass * p.axial_trap_frequency.powi(2) * xi * xi / (2.0 * HBAR * omega_r)).sqrt();
    let g = p.atom_number * p.interaction_1d / (HBAR * omega_r * xi);
    let params = Params::from_bare_detuning(u0, delta_c, kappa, omega, g, p.atom_number)?;
    Ok((params, eta.abs()))
}

/// Time profile of the pump amplitude `η̃(t̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PumpSchedule {
    Constant {
        eta: f64,
    },
    /// `η̃_max · exp(−(t̃ − center)²/σ²)`.
    Gaussian {
        eta_max: f64,
        center: f64,
        sigma: f64,
    },
}

impl PumpSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PumpSchedule::Constant { eta } => {
                if !(eta >= 0.0 && eta.is_finite()) {
                    return Err(Error::param("eta", "must be finite and nonnegative"));
                }
            }
            PumpSchedule::Gaussian { eta_max, center, sigma } => {
                if !(eta_max >= 0.0 && eta_max.is_finite()) {
                    return Err(Error::param("eta_max", "must be finite and nonnegative"));
                }
                if !center.is_finite() {
                    return Err(Error::param("center", "must be finite"));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::param("sigma", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Largest pump value the schedule ever reaches.
    pub fn peak(&self) -> f64 {
        match *self {
            PumpSchedule::Constant { eta } => eta,
            PumpSchedule::Gaussian { eta_max, .. } => eta_max,
        }
    }
}

/// Pump amplitude at time `t`.
pub fn pump_at(s: &PumpSchedule, t: f64) -> f64 {
    match *s {
        PumpSchedule::Constant { eta } => eta,
        PumpSchedule::Gaussian { eta_max, center, sigma } => {
            let u = (t - center) / sigma;
            eta_max * (-u * u).exp()
        }
    }
}

/// Thomas–Fermi diagnostics of the trapped condensate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TfReport {
    /// `μ = (3gω/4)^{2/3}`.
    pub mu: f64,
    /// `R_TF = (4g/3ω)^{1/3}`; absent when `g = 0` or `ω = 0`.
    pub r_tf: Option<f64>,
    /// `√μ/ω`, where the inverted-parabola density of `−∂² + ω²x̃²` vanishes.
    pub edge_radius: Option<f64>,
    /// `g / √(2πω)`; the regime needs this ≫ 1.
    pub tf_ratio: f64,
    pub tf_valid: bool,
    /// `μ` well below the first mode gap 4.
    pub dma_safe: bool,
}

/// Cut applied to `g / √(2πω)` for `tf_valid`.
pub const TF_RATIO_CUT: f64 = 10.0;
/// Cut applied to `μ` for `dma_safe` (a tenth of the first mode gap).
pub const DMA_MU_CUT: f64 = 0.4;

pub fn thomas_fermi(omega: f64, g: f64) -> TfReport {
    let mu = (0.75 * g * omega).powf(2.0 / 3.0);
    let r_tf = if g > 0.0 && omega > 0.0 {
        Some((4.0 * g / (3.0 * omega)).cbrt())
    } else {
        None
    };
    let edge_radius = r_tf.map(|_| mu.sqrt() / omega);
    let scale = (2.0 * std::f64::consts::PI * omega).sqrt();
    let tf_ratio = if scale > 0.0 {
        g / scale
    } else if g > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    TfReport {
        mu,
        r_tf,
        edge_radius,
        tf_ratio,
        tf_valid: g > 0.0 && tf_ratio > TF_RATIO_CUT,
        dma_safe: mu < DMA_MU_CUT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn rubidium(omega_r: f64) -> PhysicalParams {
        // mass chosen so that ħk²/2m equals the requested recoil frequency
        let wavelength = 780e-9;
        let k = 2.0 * PI / wavelength;
        PhysicalParams {
            atom_mass: HBAR * k * k / (2.0 * omega_r),
            wavelength,
            axial_trap_frequency: 2.0 * PI * 40.0,
            atom_photon_coupling: 2.0 * PI * 10.6e6,
            atom_pump_detuning: -2.0 * PI * 32e9,
            cavity_pump_detuning: 2.0 * PI * 1.0e6,
            cavity_decay: 2.0 * PI * 1.3e6,
            pump_amplitude: 2.0 * PI * 0.5e6,
            interaction_1d: 1e-38,
            atom_number: 4.8e4,
        }
    }

    #[test]
    fn kappa_in_recoil_units() {
        let p = rubidium(2.0 * PI * 3.75e3);
        let (params, _) = nondimensionalize(&p).unwrap();
        assert_relative_eq!(params.kappa, 1.3e6 / 3.75e3, max_relative = 1e-12);
        assert_relative_eq!(params.kappa, 346.666_666_666_666_7, max_relative = 1e-12);
    }

    #[test]
    fn zero_pump_maps_to_zero() {
        let mut p = rubidium(2.0 * PI * 3.75e3);
        p.pump_amplitude = 0.0;
        assert_eq!(nondimensionalize(&p).unwrap().1, 0.0);
    }

    #[test]
    fn atom_detuning_sign_flips_u0() {
        let p = rubidium(2.0 * PI * 3.75e3);
        let mut q = p;
        q.atom_pump_detuning = -p.atom_pump_detuning;
        let (a, _) = nondimensionalize(&p).unwrap();
        let (b, _) = nondimensionalize(&q).unwrap();
        assert_eq!(a.u0, -b.u0);
        assert!(a.u0 != 0.0);
    }

    #[test]
    fn rejects_bad_physical_inputs() {
        let p = rubidium(2.0 * PI * 3.75e3);
        let mut q = p;
        q.atom_pump_detuning = 0.0;
        assert!(nondimensionalize(&q).is_err());
        let mut q = p;
        q.atom_mass = 0.0;
        assert!(nondimensionalize(&q).is_err());
        let mut q = p;
        q.wavelength = -1.0;
        assert!(nondimensionalize(&q).is_err());
    }

    #[test]
    fn primed_detuning_offset_is_exact() {
        let p = rubidium(2.0 * PI * 3.75e3);
        let (params, _) = nondimensionalize(&p).unwrap();
        let omega_r = p.recoil_frequency();
        let bare = p.cavity_pump_detuning / omega_r;
        assert_eq!(params.delta_c_prime, bare + 0.5 * params.atom_number * params.u0);
    }

    #[test]
    fn frequency_inputs_scale_homogeneously() {
        let p = rubidium(2.0 * PI * 3.75e3);
        let c = 3.0;
        let mut q = p;
        q.cavity_pump_detuning *= c;
        q.cavity_decay *= c;
        q.pump_amplitude *= c;
        q.atom_photon_coupling *= c.sqrt();
        let (a, ea) = nondimensionalize(&p).unwrap();
        let (b, eb) = nondimensionalize(&q).unwrap();
        assert_relative_eq!(b.kappa, c * a.kappa, max_relative = 1e-12);
        assert_relative_eq!(b.u0, c * a.u0, max_relative = 1e-12);
        assert_relative_eq!(b.delta_c(), c * a.delta_c(), max_relative = 1e-12);
        assert_relative_eq!(eb, c * ea, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_pump_profile() {
        let s = PumpSchedule::Gaussian {
            eta_max: 1440.0,
            center: 50.0,
            sigma: 31.25,
        };
        assert_eq!(pump_at(&s, 50.0), 1440.0);
        assert_relative_eq!(pump_at(&s, 81.25), 1440.0 / std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(pump_at(&s, 81.25), 529.75, max_relative = 2e-4);
        let c = PumpSchedule::Constant { eta: 2400.0 };
        for t in [-3.0, 0.0, 17.5, 1e6] {
            assert_eq!(pump_at(&c, t), 2400.0);
        }
    }

    #[test]
    fn thomas_fermi_reference_values() {
        let tf = thomas_fermi(0.01, 100.0);
        assert_relative_eq!(tf.mu, 0.75f64.powf(2.0 / 3.0), max_relative = 1e-14);
        assert_relative_eq!(tf.mu, 0.8255, max_relative = 1e-4);
        assert_relative_eq!(tf.r_tf.unwrap(), 23.71, max_relative = 1e-3);
        assert!(tf.tf_valid);

        let tf = thomas_fermi(0.01, 10.0);
        let r = tf.r_tf.unwrap();
        assert_relative_eq!(r, 11.01, max_relative = 1e-3);
        assert!(r > 3.0 * PI);

        let tf = thomas_fermi(0.01, 0.0);
        assert_eq!(tf.mu, 0.0);
        assert!(tf.r_tf.is_none());
        assert!(!tf.tf_valid);
        assert!(thomas_fermi(0.0, 5.0).r_tf.is_none());
    }

    #[test]
    fn edge_radius_normalizes_the_profile() {
        for g in [10.0, 50.0, 100.0] {
            let tf = thomas_fermi(0.01, g);
            let r = tf.edge_radius.unwrap();
            assert_relative_eq!(0.01 * 0.01 * r * r, tf.mu, max_relative = 1e-12);
            // ∫ (μ − ω²x²)/g over the cloud = 4μR/3g
            assert_relative_eq!(4.0 * tf.mu * r / (3.0 * g), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_dimensionless_params() {
        assert!(Params::new(0.25, 400.0, 0.0, 0.01, 10.0, 4.8e4).is_err());
        assert!(Params::new(0.25, 400.0, 400.0, 0.01, -1.0, 4.8e4).is_err());
        assert!(Params::new(0.25, 400.0, 400.0, -0.01, 1.0, 4.8e4).is_err());
        assert!(Params::new(0.25, 400.0, 400.0, 0.01, 1.0, 0.5).is_err());
        assert!(Params::new(f64::NAN, 400.0, 400.0, 0.01, 1.0, 10.0).is_err());
        let p = Params::from_bare_detuning(0.25, -4800.0, 400.0, 0.01, 10.0, 4.8e4).unwrap();
        assert_eq!(p.delta_c_prime, 1200.0);
        assert_eq!(p.delta_c(), -4800.0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gaussian_pump_is_symmetric(
                eta_max in 0.0f64..5000.0,
                center in -100.0f64..100.0,
                sigma in 0.1f64..100.0,
                delta in 0.0f64..300.0,
            ) {
                let s = PumpSchedule::Gaussian { eta_max, center, sigma };
                let a = pump_at(&s, center + delta);
                let b = pump_at(&s, center - delta);
                prop_assert!((a - b).abs() <= 1e-12 * eta_max.max(1.0));
                prop_assert!(a >= 0.0);
            }
        }
    }
}
