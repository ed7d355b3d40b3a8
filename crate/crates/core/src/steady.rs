//! Self-consistent steady states of the three-mode model.
//!
//! A steady state solves `H(n) z = E₀ z` with `z` the ground state of
//! `H(n) = H₁ + n H₂` and `n` equal to the photon number that `z` itself
//! produces. For a trial photon number `n_tr` the map
//! `n_tr ↦ n_out(n_tr)` takes the ground state of `H(n_tr)` and evaluates
//! the Lorentzian; roots of `n_out(n) − n` on `[0, η̃²/κ̃²]` are the steady
//! states.

use rayon::prelude::*;
use serde::Serialize;

use crate::dma::{DmaModel, ModeAmplitudes};
use crate::error::{Error, Result};
use crate::linalg::{dot3, mat3_vec, norm3, symmetric_eigen3, Mat3, Vec3};
use crate::model::Params;

/// Relative gap below which the two lowest eigenvalues count as degenerate.
const DEGENERACY: f64 = 1e-12;

/// Lowest eigenpair of a real symmetric matrix.
///
/// The eigenvector has its largest-magnitude component positive (the first
/// one on ties). For a degenerate ground level the unit vector returned is
/// the projection of the first coordinate axis onto the ground eigenspace
/// that does not vanish.
pub fn ground_state_3x3(h: &Mat3) -> (f64, Vec3) {
    let (values, vectors) = symmetric_eigen3(h);
    let scale = values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let degenerate = (values[1] - values[0]).abs() <= DEGENERACY * scale;
    let mut z = vectors[0];
    if degenerate {
        let dim = if (values[2] - values[0]).abs() <= DEGENERACY * scale {
            3
        } else {
            2
        };
        for axis in 0..3 {
            let mut p = [0.0; 3];
            for v in vectors.iter().take(dim) {
                let c = v[axis];
                for i in 0..3 {
                    p[i] += c * v[i];
                }
            }
            let n = norm3(&p);
            if n > 1e-8 {
                z = p.map(|x| x / n);
                break;
            }
        }
    }
    let lead = (0..3).fold(0, |best, i| if z[i].abs() > z[best].abs() + 1e-14 { i } else { best });
    if z[lead] < 0.0 {
        z = z.map(|x| -x);
    }
    // one Rayleigh-quotient pass tightens the eigenvalue to the vector
    let hz = mat3_vec(h, &z);
    (dot3(&z, &hz), z)
}

/// One self-consistent steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub eta: f64,
    pub n_st: f64,
    pub e0: f64,
    pub z0: Vec3,
    /// `|n_out(n_st) − n_st|` at acceptance.
    pub residual: f64,
}

impl SteadyState {
    pub fn amplitudes(&self) -> ModeAmplitudes {
        ModeAmplitudes(self.z0.map(|x| num_complex::Complex64::new(x, 0.0)))
    }

    /// `‖H(n_st) z0 − E₀ z0‖`.
    pub fn eigen_residual(&self, model: &DmaModel) -> f64 {
        let h = model.gens.hamiltonian(self.n_st);
        let hz = mat3_vec(&h, &self.z0);
        norm3(&[0, 1, 2].map(|i| hz[i] - self.e0 * self.z0[i]))
    }
}

/// Scan and root-polishing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SteadyOptions {
    pub scan_points: usize,
    /// Relative bracket width at which bisection stops.
    pub tol: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            scan_points: 4000,
            tol: 1e-10,
        }
    }
}

impl SteadyOptions {
    pub fn validate(&self) -> Result<()> {
        if self.scan_points < 1000 {
            return Err(Error::param("scan_points", "must be at least 1000"));
        }
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            return Err(Error::param("tol", "must lie in (0, 1e-3)"));
        }
        Ok(())
    }
}

/// Steady-state solver bound to one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct SteadySolver {
    pub model: DmaModel,
    pub opts: SteadyOptions,
}

/// A value of `f` this close to zero at a scan point counts as a crossing.
const TANGENCY: f64 = 1e-12;

impl SteadySolver {
    pub fn new(params: Params, opts: SteadyOptions) -> Result<Self> {
        params.validate()?;
        opts.validate()?;
        Ok(SteadySolver {
            model: DmaModel::new(params),
            opts,
        })
    }

    fn ground(&self, n_tr: f64) -> (f64, Vec3) {
        ground_state_3x3(&self.model.gens.hamiltonian(n_tr))
    }

    fn photons_of(&self, z: &Vec3, eta: f64) -> f64 {
        let amp = ModeAmplitudes(z.map(|x| num_complex::Complex64::new(x, 0.0)));
        self.model.photon_number(&amp, eta)
    }

    pub fn n_out(&self, n_tr: f64, eta: f64) -> f64 {
        self.photons_of(&self.ground(n_tr).1, eta)
    }

    fn state_at(&self, n: f64, eta: f64) -> SteadyState {
        let (e0, z0) = self.ground(n);
        let out = self.photons_of(&z0, eta);
        SteadyState {
            eta,
            n_st: n,
            e0,
            z0,
            residual: (out - n).abs(),
        }
    }

    /// Every steady state at pump `eta`, sorted by photon number.
    pub fn solve(&self, eta: f64) -> Result<Vec<SteadyState>> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", "must be finite and nonnegative"));
        }
        if eta == 0.0 {
            return Ok(vec![self.state_at(0.0, 0.0)]);
        }
        let n_max = eta * eta / (self.model.params.kappa * self.model.params.kappa);
        let m = self.opts.scan_points;
        let f = |n: f64| self.n_out(n, eta) - n;
        let ns: Vec<f64> = (0..=m).map(|i| n_max * i as f64 / m as f64).collect();
        let fs: Vec<f64> = ns.iter().map(|&n| f(n)).collect();
        let sign = |v: f64, n: f64| {
            if v.abs() <= TANGENCY * n.max(1.0) {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        };
        let signs: Vec<i8> = fs.iter().zip(&ns).map(|(&v, &n)| sign(v, n)).collect();

        let mut roots = Vec::new();
        for i in 0..=m {
            if signs[i] == 0 {
                roots.push(ns[i]);
            } else if i < m && signs[i] * signs[i + 1] < 0 {
                roots.push(self.bisect(&f, ns[i], ns[i + 1], fs[i]));
            }
        }
        if roots.is_empty() {
            return Err(Error::NoConvergence {
                method: "steady-state scan",
                iterations: m,
                residual: fs.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
            });
        }
        Ok(roots.into_iter().map(|n| self.state_at(n, eta)).collect())
    }

    fn bisect(&self, f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
        let lo_positive = f_lo > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= self.opts.tol * mid.max(1.0) || mid <= lo || mid >= hi {
                break;
            }
            let v = f(mid);
            if v == 0.0 {
                return mid;
            }
            if (v > 0.0) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if f(lo).abs() <= f(hi).abs() {
            lo
        } else {
            hi
        }
    }

    pub fn count(&self, eta: f64) -> Result<usize> {
        Ok(self.solve(eta)?.len())
    }
}

pub fn n_out_map(n_tr: f64, eta: f64, params: &Params) -> f64 {
    let model = DmaModel::new(*params);
    let (_, z) = ground_state_3x3(&model.gens.hamiltonian(n_tr));
    model.photon_number(&ModeAmplitudes(z.map(|x| num_complex::Complex64::new(x, 0.0))), eta)
}

pub fn find_steady_states(eta: f64, params: &Params, opts: &SteadyOptions) -> Result<Vec<SteadyState>> {
    SteadySolver::new(*params, *opts)?.solve(eta)
}

/// A connected family of steady states, ordered by increasing `η̃`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub states: Vec<SteadyState>,
    /// The branch began after a gap: its neighbour along the curve is not at
    /// an adjacent pump sample.
    pub after_gap: bool,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// True when `n_st` never decreases along increasing `η̃`.
    pub fn is_monotone(&self) -> bool {
        self.states.windows(2).all(|w| w[1].n_st >= w[0].n_st)
    }
}

/// Result of a pump sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BranchTrace {
    /// Every state found, grouped by pump sample.
    pub samples: Vec<(f64, Vec<SteadyState>)>,
    pub branches: Vec<Branch>,
    /// Branch boundaries caused by gaps rather than folds.
    pub gaps: usize,
}

/// Pump samples `lo, lo + step, …` up to and including `hi`.
pub fn pump_samples(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param("step", "need step > 0 and a finite range lo ≤ hi"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=count).map(|i| lo + i as f64 * step).collect();
    if hi - out[out.len() - 1] > 1e-9 * step {
        out.push(hi);
    }
    Ok(out)
}

impl SteadySolver {
    /// Solves every pump sample (in parallel) and links states into branches.
    pub fn trace(&self, lo: f64, hi: f64, step: f64) -> Result<BranchTrace> {
        let etas = pump_samples(lo, hi, step)?;
        let samples: Vec<(f64, Vec<SteadyState>)> = etas
            .par_iter()
            .map(|&eta| self.solve(eta).map(|s| (eta, s)))
            .collect::<Result<_>>()?;
        Ok(link_branches(samples))
    }
}

/// `(sample index, state)` for every state, sorted by photon number.
fn by_photon_number(samples: &[(f64, Vec<SteadyState>)]) -> Vec<(usize, SteadyState)> {
    let mut all: Vec<(usize, SteadyState)> = samples
        .iter()
        .enumerate()
        .flat_map(|(i, (_, s))| s.iter().map(move |x| (i, *x)))
        .collect();
    all.sort_by(|a, b| a.1.n_st.total_cmp(&b.1.n_st).then(a.0.cmp(&b.0)));
    all
}

/// Links states into branches.
///
/// `η̃² = G(n_st)` is single-valued in `n_st`, so sorting all states by photon
/// number walks the solution curve. A branch ends where the walk turns
/// around in `η̃` (a fold) or skips a pump sample (a gap).
pub fn link_branches(samples: Vec<(f64, Vec<SteadyState>)>) -> BranchTrace {
    let walk = by_photon_number(&samples);
    let mut branches: Vec<Branch> = Vec::new();
    let mut gaps = 0;
    let mut current: Vec<SteadyState> = Vec::new();
    let mut direction = 0i64;
    let mut after_gap = false;
    let mut close = |states: &mut Vec<SteadyState>, after_gap: bool| {
        if states.is_empty() {
            return;
        }
        let mut states = std::mem::take(states);
        if states.len() > 1 && states[0].eta > states[states.len() - 1].eta {
            states.reverse();
        }
        branches.push(Branch { states, after_gap });
    };
    for (k, (i, state)) in walk.iter().enumerate() {
        if k > 0 {
            let step = *i as i64 - walk[k - 1].0 as i64;
            let continues = step.abs() == 1 && (direction == 0 || step == direction);
            if continues {
                direction = step;
            } else {
                close(&mut current, after_gap);
                after_gap = step.abs() > 1;
                if after_gap {
                    gaps += 1;
                }
                direction = 0;
            }
        }
        current.push(*state);
    }
    close(&mut current, after_gap);
    BranchTrace {
        samples,
        branches,
        gaps,
    }
}

impl BranchTrace {
    /// Every state along the solution curve, in order of photon number.
    pub fn joined_curve(&self) -> Vec<SteadyState> {
        by_photon_number(&self.samples).into_iter().map(|(_, s)| s).collect()
    }
}

pub fn trace_branch(lo: f64, hi: f64, step: f64, params: &Params, opts: &SteadyOptions) -> Result<BranchTrace> {
    SteadySolver::new(*params, *opts)?.trace(lo, hi, step)
}

/// Tabulated `G(n) = n (κ̃² + Δ̃_eff(z(n))²)` on `[0, n_cap]`.
///
/// `n_out(n) − n` has the sign of `η̃² − G(n)`, so one table brackets the
/// steady states of every pump value with `η̃²/κ̃² ≤ n_cap`.
#[derive(Debug, Clone)]
pub struct InverseMap {
    solver: SteadySolver,
    ns: Vec<f64>,
    gs: Vec<f64>,
}

impl InverseMap {
    pub fn new(solver: SteadySolver, n_cap: f64, points: usize) -> Result<Self> {
        if !(n_cap > 0.0) || points < 2 {
            return Err(Error::param("n_cap", "need a positive cap and at least two points"));
        }
        let ns: Vec<f64> = (0..=points).map(|i| n_cap * i as f64 / points as f64).collect();
        let gs = ns.iter().map(|&n| solver.inverse(n)).collect();
        Ok(InverseMap { solver, ns, gs })
    }

    pub fn n_cap(&self) -> f64 {
        *self.ns.last().expect("table is nonempty")
    }

    /// Steady states at `eta`, sorted by photon number.
    pub fn solve(&self, eta: f64) -> Result<Vec<SteadyState>> {
        let kappa = self.solver.model.params.kappa;
        if eta * eta / (kappa * kappa) > self.n_cap() {
            return Err(Error::param("eta", "pump exceeds the tabulated range"));
        }
        if eta == 0.0 {
            return self.solver.solve(0.0);
        }
        let target = eta * eta;
        let mut roots = Vec::new();
        for i in 0..self.ns.len() - 1 {
            let (a, b) = (target - self.gs[i], target - self.gs[i + 1]);
            if a == 0.0 {
                roots.push(self.ns[i]);
            } else if a * b < 0.0 {
                let f = |n: f64| target - self.solver.inverse(n);
                roots.push(self.solver.bisect(&f, self.ns[i], self.ns[i + 1], a));
            }
        }
        Ok(roots.into_iter().map(|n| self.solver.state_at(n, eta)).collect())
    }
}

impl SteadySolver {
    /// `G(n) = n (κ̃² + Δ̃_eff²)` for the ground state of `H(n)`.
    pub fn inverse(&self, n: f64) -> f64 {
        let (_, z) = self.ground(n);
        let amp = ModeAmplitudes(z.map(|x| num_complex::Complex64::new(x, 0.0)));
        let d = self.model.effective_detuning(&amp);
        n * (self.model.params.kappa.powi(2) + d * d)
    }
}

/// The two folds bounding the three-state window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldReport {
    /// Upper fold, where the lower and middle states merge.
    pub eta_1: f64,
    /// Lower fold, where the middle and upper states merge.
    pub eta_2: f64,
    pub n_st1: f64,
    pub n_st2: f64,
    /// Width of the final pump bracket around each fold.
    pub resolution: f64,
}

/// Samples in the coarse count scan of [`SteadySolver::folds`].
pub const FOLD_SCAN_POINTS: usize = 128;

impl SteadySolver {
    /// Locates both folds in `[lo, hi]` by bisecting on the number of steady
    /// states until the pump bracket is narrower than `resolution`.
    pub fn folds(&self, lo: f64, hi: f64, resolution: f64) -> Result<FoldReport> {
        if !(hi > lo && lo >= 0.0) || !(resolution > 0.0) {
            return Err(Error::param("bracket", "need 0 ≤ lo < hi and resolution > 0"));
        }
        let etas: Vec<f64> = (0..=FOLD_SCAN_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / FOLD_SCAN_POINTS as f64)
            .collect();
        let counts: Vec<usize> = etas.par_iter().map(|&e| self.count(e)).collect::<Result<_>>()?;
        let not_found = Error::FoldNotFound { lo, hi };
        let rise = (0..FOLD_SCAN_POINTS).find(|&i| counts[i] == 1 && counts[i + 1] >= 3);
        let fall = (0..FOLD_SCAN_POINTS)
            .rev()
            .find(|&i| counts[i] >= 3 && counts[i + 1] == 1);
        let (Some(rise), Some(fall)) = (rise, fall) else {
            return Err(not_found);
        };
        let (eta_2, n_st2) = self.refine_fold(etas[rise], etas[rise + 1], resolution, true)?;
        let (eta_1, n_st1) = self.refine_fold(etas[fall], etas[fall + 1], resolution, false)?;
        Ok(FoldReport {
            eta_1,
            eta_2,
            n_st1,
            n_st2,
            resolution,
        })
    }

    /// Bisects a 1 ↔ 3 count change. Returns the bracket midpoint and the mean
    /// photon number of the closest pair at the three-state end.
    fn refine_fold(&self, mut lo: f64, mut hi: f64, resolution: f64, three_above: bool) -> Result<(f64, f64)> {
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            let many = self.count(mid)? >= 3;
            if many == three_above {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let inside = if three_above { hi } else { lo };
        let states = self.solve(inside)?;
        let pair = states
            .windows(2)
            .min_by(|a, b| (a[1].n_st - a[0].n_st).total_cmp(&(b[1].n_st - b[0].n_st)))
            .ok_or(Error::FoldNotFound { lo, hi })?;
        Ok((0.5 * (lo + hi), 0.5 * (pair[0].n_st + pair[1].n_st)))
    }
}

/// Default pump resolution of the fold search.
pub const DEFAULT_FOLD_RESOLUTION: f64 = 1e-3;

pub fn find_folds(params: &Params, lo: f64, hi: f64, opts: &SteadyOptions) -> Result<FoldReport> {
    SteadySolver::new(*params, *opts)?.folds(lo, hi, DEFAULT_FOLD_RESOLUTION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bistable() -> Params {
        Params::bistable_reference()
    }

    fn solver() -> SteadySolver {
        SteadySolver::new(bistable(), SteadyOptions::default()).unwrap()
    }

    /// Smallest root of the characteristic cubic by the trigonometric formula.
    fn cubic_lowest_root(h: &Mat3) -> f64 {
        let q = (h[0][0] + h[1][1] + h[2][2]) / 3.0;
        let p1 = h[0][1].powi(2) + h[0][2].powi(2) + h[1][2].powi(2);
        let p2 = (h[0][0] - q).powi(2) + (h[1][1] - q).powi(2) + (h[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            return q;
        }
        let b: Mat3 = std::array::from_fn(|i| std::array::from_fn(|j| (h[i][j] - if i == j { q } else { 0.0 }) / p));
        let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
            + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
        let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
    }

    fn residual(h: &Mat3, e: f64, z: &Vec3) -> f64 {
        let hz = mat3_vec(h, z);
        norm3(&[0, 1, 2].map(|i| hz[i] - e * z[i]))
    }

    #[test]
    fn ground_state_of_diagonal_and_degenerate_matrices() {
        let (e, z) = ground_state_3x3(&[[0.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 16.0]]);
        assert_eq!((e, z), (0.0, [1.0, 0.0, 0.0]));
        let (e, z) = ground_state_3x3(&[[0.0; 3]; 3]);
        assert_eq!((e, z), (0.0, [1.0, 0.0, 0.0]));
        // degenerate pair spanning axes 1 and 2
        let (e, z) = ground_state_3x3(&[[5.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(e, 1.0);
        assert_eq!(z, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn ground_state_against_cubic_formula() {
        let m = DmaModel::new(Params::constant_pump_reference(10.0));
        let h = m.gens.hamiltonian(36.0);
        let (e, z) = ground_state_3x3(&h);
        let oracle = cubic_lowest_root(&h);
        assert!((e - oracle).abs() < 1e-12, "{e} vs {oracle}");
        assert!(residual(&h, e, &z) < 1e-12);
        assert!(z[0] > 0.0 && z[0].abs() >= z[1].abs());
    }

    #[test]
    fn ground_state_residuals_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let mut h = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    h[i][j] = rng.gen_range(-10.0..10.0);
                    h[j][i] = h[i][j];
                }
            }
            let (e, z) = ground_state_3x3(&h);
            assert!(residual(&h, e, &z) <= 1e-12 * 10.0f64.max(1.0), "{h:?}");
            assert!((e - cubic_lowest_root(&h)).abs() < 1e-9);
            assert!((norm3(&z) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn n_out_examples() {
        let p = bistable();
        assert_relative_eq!(n_out_map(0.0, 1200.0, &p), 0.9, max_relative = 1e-14);
        for n in [0.0, 1.0, 5.0, 30.0] {
            assert_eq!(n_out_map(n, 0.0, &p), 0.0);
        }
    }

    #[test]
    fn n_out_is_continuous_on_a_refinement_ladder() {
        let p = bistable();
        for n in [0.5, 2.5, 4.0, 6.2, 9.0] {
            let mut prev = f64::INFINITY;
            for k in 2..10 {
                let d = 10f64.powi(-k);
                let jump = (n_out_map(n + d, 1200.0, &p) - n_out_map(n, 1200.0, &p)).abs();
                assert!(jump <= prev * 1.01 + 1e-13, "n = {n}, δ = {d}: {jump} after {prev}");
                prev = jump;
            }
            assert!(prev < 1e-7);
        }
    }

    #[test]
    fn steady_state_counts() {
        let s = solver();
        for (eta, expected) in [(720.0, 1), (960.0, 1), (1200.0, 3), (1440.0, 1), (1680.0, 1)] {
            let states = s.solve(eta).unwrap();
            assert_eq!(states.len(), expected, "η = {eta}");
            for st in &states {
                assert!(st.residual <= 1e-8 * st.n_st.max(1.0), "{st:?}");
                assert!(st.eigen_residual(&s.model) <= 1e-10);
                let n = s.model.photon_number(&st.amplitudes(), eta);
                assert!((n - st.n_st).abs() <= 1e-8 * st.n_st.max(1.0));
            }
            assert!(states.windows(2).all(|w| w[0].n_st < w[1].n_st));
        }
        let zero = s.solve(0.0).unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!((zero[0].n_st, zero[0].e0, zero[0].z0), (0.0, 0.0, [1.0, 0.0, 0.0]));
        assert!(s.solve(-1.0).is_err());
        assert!(SteadySolver::new(
            bistable(),
            SteadyOptions {
                scan_points: 10,
                tol: 1e-10
            }
        )
        .is_err());
    }

    /// `G(n) = n (κ̃² + Δ̃_eff(z(n))²)`: a steady state at η̃ solves `G(n) = η̃²`,
    /// so folds are the interior local extrema of G.
    fn g_of_n(model: &DmaModel, n: f64) -> f64 {
        let (_, z) = ground_state_3x3(&model.gens.hamiltonian(n));
        let amp = ModeAmplitudes(z.map(|x| num_complex::Complex64::new(x, 0.0)));
        let d = model.effective_detuning(&amp);
        n * (model.params.kappa.powi(2) + d * d)
    }

    fn golden_extremum(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, maximize: bool) -> f64 {
        let sgn = if maximize { -1.0 } else { 1.0 };
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if sgn * f(c) < sgn * f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    fn fold_oracle(params: &Params) -> ((f64, f64), (f64, f64)) {
        let model = DmaModel::new(*params);
        let ns: Vec<f64> = (0..=20_000).map(|i| 20.0 * i as f64 / 20_000.0).collect();
        let gs: Vec<f64> = ns.iter().map(|&n| g_of_n(&model, n)).collect();
        let imax = (1..ns.len() - 1)
            .find(|&i| gs[i] > gs[i - 1] && gs[i] > gs[i + 1])
            .unwrap();
        let imin = (imax..ns.len() - 1)
            .find(|&i| gs[i] < gs[i - 1] && gs[i] < gs[i + 1])
            .unwrap();
        let n1 = golden_extremum(|n| g_of_n(&model, n), ns[imax - 1], ns[imax + 1], true);
        let n2 = golden_extremum(|n| g_of_n(&model, n), ns[imin - 1], ns[imin + 1], false);
        ((g_of_n(&model, n1).sqrt(), n1), (g_of_n(&model, n2).sqrt(), n2))
    }

    #[test]
    fn folds_match_extrema_of_the_inverse_map() {
        let ((eta1, n1), (eta2, n2)) = fold_oracle(&bistable());
        let rep = solver().folds(900.0, 1500.0, DEFAULT_FOLD_RESOLUTION).unwrap();
        assert!((rep.eta_1 - eta1).abs() < 2e-3, "{rep:?} vs {eta1}");
        assert!((rep.eta_2 - eta2).abs() < 2e-3, "{rep:?} vs {eta2}");
        assert!((rep.n_st1 - n1).abs() < 5e-3, "{} vs {n1}", rep.n_st1);
        assert!((rep.n_st2 - n2).abs() < 5e-3, "{} vs {n2}", rep.n_st2);
        assert!(rep.eta_2 < rep.eta_1 && rep.n_st1 < rep.n_st2);
    }

    #[test]
    fn merging_pair_closes_towards_the_fold() {
        let s = solver();
        let rep = s.folds(900.0, 1500.0, DEFAULT_FOLD_RESOLUTION).unwrap();
        let gap = |eta: f64| {
            let st = s.solve(eta).unwrap();
            assert_eq!(st.len(), 3);
            st[1].n_st - st[0].n_st
        };
        let gaps: Vec<f64> = [10.0, 1.0, 0.1].iter().map(|d| gap(rep.eta_1 - d)).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn linear_limit_has_no_fold() {
        let mut p = bistable();
        p.u0 = 1e-9;
        let s = SteadySolver::new(p, SteadyOptions::default()).unwrap();
        assert!(matches!(s.folds(500.0, 2000.0, 0.5), Err(Error::FoldNotFound { .. })));
    }

    #[test]
    fn traced_curve_has_the_folded_shape() {
        let s = solver();
        let trace = s.trace(0.0, 1680.0, 4.0).unwrap();
        let ((eta1, _), (eta2, _)) = fold_oracle(&bistable());
        for (eta, states) in &trace.samples {
            let inside = *eta > eta2 + 4.0 && *eta < eta1 - 4.0;
            let outside = *eta < eta2 - 4.0 || *eta > eta1 + 4.0;
            if inside {
                assert_eq!(states.len(), 3, "η = {eta}");
                assert!(
                    (states[1].e0 - states[0].e0) * (states[1].e0 - states[2].e0) < 0.0,
                    "η = {eta}"
                );
            } else if outside {
                assert_eq!(states.len(), 1, "η = {eta}");
            }
        }
        let curve = trace.joined_curve();
        let total: usize = trace.samples.iter().map(|s| s.1.len()).sum();
        assert_eq!(curve.len(), total);
        // continuous in n along the joined curve, E₀ jumps bounded by the step
        let max_dn = curve
            .windows(2)
            .map(|w| (w[1].n_st - w[0].n_st).abs())
            .fold(0.0, f64::max);
        let max_de = curve.windows(2).map(|w| (w[1].e0 - w[0].e0).abs()).fold(0.0, f64::max);
        assert!(max_dn < 1.0, "max |Δn| {max_dn}");
        assert!(max_de < 0.2, "max |ΔE₀| {max_de}");
        // the curve goes up, back and up again
        let turns = curve
            .windows(2)
            .zip(curve.windows(2).skip(1))
            .filter(|(a, b)| (a[1].eta - a[0].eta).signum() != (b[1].eta - b[0].eta).signum())
            .count();
        assert_eq!(turns, 2);
        // lower, middle and upper branches meeting at the two folds
        assert_eq!(trace.branches.len(), 3);
        assert_eq!(trace.gaps, 0);
        assert!(trace.branches[0].is_monotone() && !trace.branches[1].is_monotone() && trace.branches[2].is_monotone());
        assert_eq!(curve.first().unwrap().eta, 0.0);
        assert_eq!(curve.last().unwrap().eta, 1680.0);
    }

    #[test]
    fn low_pump_sweep_is_one_monotone_branch() {
        let trace = solver().trace(0.0, 890.0, 10.0).unwrap();
        assert_eq!(trace.branches.len(), 1);
        assert!(trace.branches[0].is_monotone());
        assert_eq!(trace.gaps, 0);
    }

    #[test]
    fn tabulated_inverse_reproduces_the_scan() {
        let s = solver();
        let table = InverseMap::new(s, 1700.0f64.powi(2) / 160_000.0, 20_000).unwrap();
        for eta in [0.0, 300.0, 720.0, 1100.0, 1200.0, 1300.0, 1680.0] {
            let a = s.solve(eta).unwrap();
            let b = table.solve(eta).unwrap();
            assert_eq!(a.len(), b.len(), "η = {eta}");
            for (x, y) in a.iter().zip(&b) {
                assert!((x.n_st - y.n_st).abs() < 1e-8 * x.n_st.max(1.0));
                assert!(y.residual <= 1e-8 * y.n_st.max(1.0));
            }
        }
        assert!(table.solve(1800.0).is_err());
    }

    #[test]
    fn pump_sample_grid() {
        assert_eq!(pump_samples(0.0, 10.0, 2.5).unwrap(), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert_eq!(pump_samples(0.0, 10.0, 4.0).unwrap(), vec![0.0, 4.0, 8.0, 10.0]);
        assert!(pump_samples(0.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn n_out_stays_inside_the_bound(n in 0.0f64..40.0, eta in 1.0f64..3000.0) {
            let out = n_out_map(n, eta, &bistable());
            prop_assert!(out > 0.0 && out < eta * eta / 160_000.0);
        }

        #[test]
        fn generic_counts_are_odd(eta in 1.0f64..2000.0) {
            let c = solver().count(eta).unwrap();
            prop_assert!(c % 2 == 1, "η = {} gives {} states", eta, c);
        }
    }
}
