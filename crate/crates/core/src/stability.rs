//! Linear stability of three-mode steady states.
//!
//! Small deviations `u` from `e^{−iE₀t}(z0 + u)` obey a real 6×6 linear
//! system coupling `u` and `ū` through the photon-number gradient. The
//! state is dynamically stable when every eigenfrequency is real.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dma::DmaModel;
use crate::error::{Error, Result};
use crate::linalg::{char_poly_abs, mat3_vec, real_eigenvalues, Mat3, SquareMatrix};
use crate::model::Params;
use crate::steady::SteadyState;

/// `A = H₁ + n H₂`, rank-one `B = (H₂z0) wᵀ`, and
/// `M = [[A + B − E₀, −B], [B, −A − B + E₀]]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationMatrices {
    pub a_mat: Mat3,
    pub b_mat: Mat3,
    #[serde(skip)]
    pub m_mat: SquareMatrix,
    /// Photon-number gradient `∂n/∂Z_j` at the steady state.
    pub gradient: [f64; 3],
}

impl LinearizationMatrices {
    /// `‖M (z0; z0)‖`.
    pub fn null_mode_residual(&self, z0: &[f64; 3]) -> f64 {
        let v: Vec<f64> = z0.iter().chain(z0.iter()).copied().collect();
        self.m_mat.mul_vec(&v).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn build_linearization(s: &SteadyState, params: &Params) -> LinearizationMatrices {
    let model = DmaModel::new(*params);
    let a = model.gens.hamiltonian(s.n_st);
    let h2z = mat3_vec(&model.gens.h2, &s.z0);
    let delta = model.effective_detuning(&s.amplitudes());
    let k2 = params.kappa * params.kappa;
    let slope = -2.0 * delta * s.n_st / (k2 + delta * delta);
    let w = h2z.map(|v| slope * params.atom_number * v);
    let b: Mat3 = std::array::from_fn(|i| std::array::from_fn(|j| h2z[i] * w[j]));

    let mut m = SquareMatrix::zeros(6);
    for i in 0..3 {
        for j in 0..3 {
            let diag = if i == j { s.e0 } else { 0.0 };
            m[(i, j)] = a[i][j] + b[i][j] - diag;
            m[(i, j + 3)] = -b[i][j];
            m[(i + 3, j)] = b[i][j];
            m[(i + 3, j + 3)] = -a[i][j] - b[i][j] + diag;
        }
    }
    LinearizationMatrices {
        a_mat: a,
        b_mat: b,
        m_mat: m,
        gradient: w,
    }
}

/// Characteristic-polynomial acceptance: `|det(M − ΩI)| ≤ CHAR_POLY_TOL · scale⁶`.
pub const CHAR_POLY_TOL: f64 = 1e-6;

/// Spectral scale used for tolerances, `max(‖M‖_F, 1)`.
pub fn spectral_scale(m: &SquareMatrix) -> f64 {
    m.frobenius_norm().max(1.0)
}

/// All six eigenvalues of `M`, each validated against the characteristic
/// polynomial.
pub fn eigenvalues_6x6(m: &SquareMatrix) -> Result<Vec<Complex64>> {
    if m.dim() != 6 {
        return Err(Error::param(
            "matrix",
            format!("expected 6×6, got {n}×{n}", n = m.dim()),
        ));
    }
    let vals = real_eigenvalues(m)?;
    let bound = CHAR_POLY_TOL * spectral_scale(m).powi(6);
    for &v in &vals {
        let r = char_poly_abs(m, v);
        if !(r <= bound) {
            return Err(Error::NoConvergence {
                method: "6x6 eigenvalues",
                iterations: 0,
                residual: r,
            });
        }
    }
    Ok(vals)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Complex64>,
    /// Largest imaginary part of the spectrum.
    pub i_m: f64,
    pub stable: bool,
    /// Absolute threshold applied to `i_m`.
    pub tol: f64,
}

/// Default relative threshold on `i_m`.
pub const DEFAULT_TOL_IMAG: f64 = 1e-8;

/// `stable ⇔ max Im Ω ≤ tol_rel · max(max|Ω|, 1)`.
pub fn classify(s: &SteadyState, params: &Params, tol_rel: f64) -> Result<StabilityReport> {
    let lin = build_linearization(s, params);
    let eigenvalues = eigenvalues_6x6(&lin.m_mat)?;
    let i_m = eigenvalues.iter().map(|v| v.im).fold(f64::NEG_INFINITY, f64::max);
    let scale = eigenvalues.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tol = tol_rel * scale;
    Ok(StabilityReport {
        eigenvalues,
        i_m,
        stable: i_m <= tol,
        tol,
    })
}

/// Classifies many states in parallel, preserving order.
pub fn classify_all(states: &[SteadyState], params: &Params, tol_rel: f64) -> Result<Vec<StabilityReport>> {
    states.par_iter().map(|s| classify(s, params, tol_rel)).collect()
}

/// True when every eigenvalue has its conjugate in the list within `tol`.
pub fn conjugate_closed(vals: &[Complex64], tol: f64) -> bool {
    vals.iter().all(|v| vals.iter().any(|w| (w - v.conj()).norm() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dma::{integrate_dma, DmaIntegration, ModeAmplitudes};
    use crate::model::PumpSchedule;
    use crate::steady::{SteadyOptions, SteadySolver};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bistable() -> Params {
        Params::bistable_reference()
    }

    fn states_at(eta: f64) -> Vec<SteadyState> {
        SteadySolver::new(bistable(), SteadyOptions::default())
            .unwrap()
            .solve(eta)
            .unwrap()
    }

    #[test]
    fn unpumped_state_is_trivially_stable() {
        let s = states_at(0.0)[0];
        let lin = build_linearization(&s, &bistable());
        assert!(lin.b_mat.iter().flatten().all(|&v| v == 0.0));
        let r = classify(&s, &bistable(), DEFAULT_TOL_IMAG).unwrap();
        assert_eq!(r.i_m, 0.0);
        assert!(r.stable);
        let mut re: Vec<f64> = r.eigenvalues.iter().map(|v| v.re).collect();
        re.sort_by(f64::total_cmp);
        assert_eq!(re, vec![-16.0, -4.0, 0.0, 0.0, 4.0, 16.0]);
    }

    #[test]
    fn null_vector_and_structure() {
        for eta in [300.0, 720.0, 1200.0, 1500.0] {
            for s in states_at(eta) {
                let lin = build_linearization(&s, &bistable());
                assert!(lin.null_mode_residual(&s.z0) <= 1e-10 * lin.m_mat.frobenius_norm());
                let model = DmaModel::new(bistable());
                assert_eq!(lin.a_mat, model.gens.hamiltonian(s.n_st));
                // B has rank one: every 2×2 minor vanishes
                let b = lin.b_mat;
                let scale = b.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
                for (i, j, k, l) in [(0, 1, 0, 1), (0, 2, 1, 2), (1, 2, 0, 2)] {
                    assert!((b[i][k] * b[j][l] - b[i][l] * b[j][k]).abs() <= 1e-12 * scale * scale);
                }
            }
        }
    }

    /// Gradient of the photon number by central differences of the DMA map.
    #[test]
    fn photon_gradient_matches_finite_differences() {
        let model = DmaModel::new(bistable());
        for s in states_at(1200.0) {
            let lin = build_linearization(&s, &bistable());
            for j in 0..3 {
                let h = 1e-6;
                let shifted = |d: f64| {
                    let mut z = s.amplitudes();
                    z.0[j] += d;
                    model.photon_number(&z, s.eta)
                };
                // a real shift moves Z and Z̄ together, which doubles ∂n/∂Z_j
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h) / 2.0;
                assert!(
                    (fd - lin.gradient[j]).abs() < 1e-5 * lin.gradient[j].abs().max(1.0),
                    "{fd} vs {}",
                    lin.gradient[j]
                );
            }
        }
    }

    #[test]
    fn middle_state_is_unstable() {
        let st = states_at(1200.0);
        assert_eq!(st.len(), 3);
        let r: Vec<StabilityReport> = classify_all(&st, &bistable(), DEFAULT_TOL_IMAG).unwrap();
        assert!(r[0].stable && r[2].stable);
        assert!(!r[1].stable);
        assert!(r[1].eigenvalues.iter().filter(|v| v.im.abs() > 0.0).count() >= 2);
        for rep in &r {
            assert!(conjugate_closed(&rep.eigenvalues, 1e-9));
        }
    }

    #[test]
    fn negative_slope_states_are_unstable() {
        let s = SteadySolver::new(bistable(), SteadyOptions::default()).unwrap();
        let trace = s.trace(900.0, 1500.0, 5.0).unwrap();
        let curve = trace.joined_curve();
        let mut checked = 0;
        for w in curve.windows(3) {
            if w[2].eta < w[0].eta {
                let r = classify(&w[1], &bistable(), DEFAULT_TOL_IMAG).unwrap();
                assert!(!r.stable, "η = {}, n = {}", w[1].eta, w[1].n_st);
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn rejects_wrong_size() {
        assert!(eigenvalues_6x6(&SquareMatrix::zeros(5)).is_err());
    }

    #[test]
    fn random_spectra_are_conjugate_closed_and_validated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..6).map(|_| rng.gen_range(-5.0..5.0)).collect())
                .collect();
            let m = SquareMatrix::from_rows(&rows);
            let vals = eigenvalues_6x6(&m).unwrap();
            assert_eq!(vals.len(), 6);
            assert!(conjugate_closed(&vals, 1e-9));
            let bound = CHAR_POLY_TOL * spectral_scale(&m).powi(6);
            assert!(vals.iter().all(|&v| char_poly_abs(&m, v) <= bound));
        }
    }

    /// Deviation from the co-rotating steady orbit, with the global phase
    /// removed by aligning to `z0`.
    fn deviation(z: &ModeAmplitudes, z0: &[f64; 3]) -> f64 {
        let overlap: Complex64 = (0..3).map(|i| z.0[i] * z0[i]).sum();
        let phase = if overlap.norm() > 0.0 {
            overlap.conj() / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        (0..3).map(|i| (z.0[i] * phase - z0[i]).norm_sqr()).sum::<f64>().sqrt()
    }

    fn perturbed_run(s: &SteadyState, t_end: f64) -> (Vec<f64>, Vec<f64>) {
        let model = DmaModel::new(bistable());
        let z = ModeAmplitudes::from_real([s.z0[0] + 1e-6, s.z0[1] - 1e-6, s.z0[2] + 1e-6]).unwrap();
        let mut o = DmaIntegration::new(t_end);
        o.sample_stride = 20;
        let traj = integrate_dma(&model, &z, &PumpSchedule::Constant { eta: s.eta }, &o).unwrap();
        let d = traj.states.iter().map(|z| deviation(z, &s.z0)).collect();
        (traj.times, d)
    }

    #[test]
    fn unstable_growth_matches_largest_imaginary_part() {
        let s = states_at(1200.0)[1];
        let r = classify(&s, &bistable(), DEFAULT_TOL_IMAG).unwrap();
        let (t, d) = perturbed_run(&s, 40.0);
        let window: Vec<(f64, f64)> = t
            .iter()
            .zip(&d)
            .skip_while(|(_, &d)| d < 1e-5)
            .take_while(|(_, &d)| d < 1e-3)
            .map(|(&t, &d)| (t, d.ln()))
            .collect();
        assert!(window.len() > 10, "no linear window");
        let n = window.len() as f64;
        let (mt, ml) = window.iter().fold((0.0, 0.0), |a, w| (a.0 + w.0 / n, a.1 + w.1 / n));
        let slope = window.iter().map(|w| (w.0 - mt) * (w.1 - ml)).sum::<f64>()
            / window.iter().map(|w| (w.0 - mt).powi(2)).sum::<f64>();
        assert!((slope / r.i_m - 1.0).abs() < 0.2, "growth {slope} vs i_m {}", r.i_m);
    }

    #[test]
    fn stable_state_stays_close() {
        for s in [states_at(1200.0)[0], states_at(1200.0)[2], states_at(720.0)[0]] {
            let (_, d) = perturbed_run(&s, 50.0);
            let worst = d.iter().cloned().fold(0.0, f64::max);
            assert!(worst < 1e-3, "n = {}: {worst:e}", s.n_st);
        }
    }
}
