//! Scenario configuration files.

use serde::{Deserialize, Serialize};

use crate::dma::DEFAULT_DMA_DT;
use crate::error::{Error, Result};
use crate::gp::CavityMode;
use crate::model::{nondimensionalize, Params, PhysicalParams, PumpSchedule};
use crate::stability::DEFAULT_TOL_IMAG;
use crate::steady::{SteadyOptions, DEFAULT_FOLD_RESOLUTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ConstantPump,
    GaussianPump,
    SteadyScan,
    FoldFind,
    StabilitySweep,
}

impl ScenarioKind {
    pub fn id(self) -> &'static str {
        match self {
            ScenarioKind::ConstantPump => "constant-pump",
            ScenarioKind::GaussianPump => "gaussian-pump",
            ScenarioKind::SteadyScan => "steady-scan",
            ScenarioKind::FoldFind => "fold-find",
            ScenarioKind::StabilitySweep => "stability-sweep",
        }
    }

    fn is_dynamic(self) -> bool {
        matches!(self, ScenarioKind::ConstantPump | ScenarioKind::GaussianPump)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Dma,
    Gp,
    Both,
}

impl Engine {
    pub fn runs_dma(self) -> bool {
        matches!(self, Engine::Dma | Engine::Both)
    }

    pub fn runs_gp(self) -> bool {
        matches!(self, Engine::Gp | Engine::Both)
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dma" => Ok(Engine::Dma),
            "gp" => Ok(Engine::Gp),
            "both" => Ok(Engine::Both),
            other => Err(Error::config(
                "engine",
                format!("expected dma, gp or both, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_length: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationConfig {
    pub t_start: f64,
    pub t_end: Option<f64>,
    /// Shared by both engines so that `engine = both` samples identical times.
    pub dt: f64,
    /// Defaults to [`default_stride`].
    pub sample_stride: Option<usize>,
    pub cavity: CavityMode,
    pub snapshot_times: Vec<f64>,
    pub ground_state_tol: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            t_start: 0.0,
            t_end: None,
            dt: DEFAULT_DMA_DT,
            sample_stride: None,
            cavity: CavityMode::Adiabatic,
            snapshot_times: Vec::new(),
            ground_state_tol: 1e-10,
        }
    }
}

/// Rows kept by the default sampling stride.
pub const TARGET_ROWS: usize = 5000;
/// Smallest default stride.
pub const MIN_DEFAULT_STRIDE: usize = 20;

/// Stride that keeps a run near [`TARGET_ROWS`] samples, and never below
/// [`MIN_DEFAULT_STRIDE`].
pub fn default_stride(steps: usize) -> usize {
    steps.div_ceil(TARGET_ROWS).max(MIN_DEFAULT_STRIDE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    Even,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyConfig {
    pub scan_points: usize,
    pub tol: f64,
    /// Pump values of the `n_out` curves.
    pub etas: Vec<f64>,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_step: f64,
    pub fold_bracket: [f64; 2],
    pub fold_resolution: f64,
    pub sweep_points: usize,
    pub sampling: Sampling,
    pub tol_imag: f64,
    /// Samples of the tabulated inverse map used for branch overlays.
    pub overlay_points: usize,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        let opts = SteadyOptions::default();
        SteadyConfig {
            scan_points: opts.scan_points,
            tol: opts.tol,
            etas: vec![720.0, 960.0, 1200.0, 1440.0, 1680.0],
            eta_min: 500.0,
            eta_max: 1700.0,
            eta_step: 1.0,
            fold_bracket: [500.0, 2000.0],
            fold_resolution: DEFAULT_FOLD_RESOLUTION,
            sweep_points: 50,
            sampling: Sampling::Even,
            tol_imag: DEFAULT_TOL_IMAG,
            overlay_points: 20_000,
        }
    }
}

impl SteadyConfig {
    pub fn options(&self) -> SteadyOptions {
        SteadyOptions {
            scan_points: self.scan_points,
            tol: self.tol,
        }
    }
}

/// Breakdown detector: the first sample whose relative deviation from the
/// followed branch exceeds `threshold` for `sustain` consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakdownConfig {
    pub threshold: f64,
    pub sustain: usize,
}

impl Default for BreakdownConfig {
    fn default() -> Self {
        BreakdownConfig {
            threshold: 0.1,
            sustain: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub params: Option<Params>,
    /// SI inputs; mutually exclusive with `params`.
    #[serde(default)]
    pub physical: Option<PhysicalParams>,
    #[serde(default)]
    pub schedule: Option<PumpSchedule>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default)]
    pub breakdown: BreakdownConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

/// A validated configuration with parameters resolved to dimensionless form.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: ScenarioConfig,
    pub params: Params,
    pub schedule: Option<PumpSchedule>,
}

/// Parses and validates a JSON scenario file.
pub fn parse_config(text: &str) -> Result<ResolvedConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<root>".to_string() } else { path };
        Error::config(field, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| Error::config("<root>", e.to_string()))?;
    cfg.resolve()
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

/// Re-tags a parameter error with its location in the config file.
fn within(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::config(format!("{prefix}.{field}"), reason),
        other => other,
    }
}

impl ScenarioConfig {
    pub fn resolve(self) -> Result<ResolvedConfig> {
        let (params, mut schedule) = match (self.params, self.physical) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "physical",
                    "give either `params` or `physical`, not both",
                ))
            }
            (None, None) => return Err(Error::config("params", "missing parameter set")),
            (Some(p), None) => {
                p.validate().map_err(|e| within("params", e))?;
                (p, self.schedule)
            }
            (None, Some(ph)) => {
                let (p, eta) = nondimensionalize(&ph).map_err(|e| within("physical", e))?;
                (p, self.schedule.or(Some(PumpSchedule::Constant { eta })))
            }
        };
        if let Some(s) = &schedule {
            s.validate().map_err(|e| within("schedule", e))?;
        }

        if self.scenario.is_dynamic() {
            let s = schedule.ok_or_else(|| Error::config("schedule", "required by this scenario"))?;
            if self.scenario == ScenarioKind::GaussianPump && !matches!(s, PumpSchedule::Gaussian { .. }) {
                return Err(Error::config(
                    "schedule.kind",
                    "gaussian-pump needs a gaussian schedule",
                ));
            }
            let it = &self.integration;
            let t_end = it
                .t_end
                .ok_or_else(|| Error::config("integration.t_end", "required by this scenario"))?;
            if !it.t_start.is_finite() || !(t_end > it.t_start) || !t_end.is_finite() {
                return Err(Error::config("integration.t_end", "must be finite and exceed t_start"));
            }
            positive("integration.dt", it.dt)?;
            positive("integration.ground_state_tol", it.ground_state_tol)?;
            if it.sample_stride == Some(0) {
                return Err(Error::config("integration.sample_stride", "must be at least 1"));
            }
            if let CavityMode::FullOde { substeps: 0 } = it.cavity {
                return Err(Error::config("integration.cavity.substeps", "must be at least 1"));
            }
            if it.snapshot_times.iter().any(|t| !t.is_finite()) {
                return Err(Error::config("integration.snapshot_times", "must be finite"));
            }
            if let Some(g) = self.grid {
                positive("grid.half_length", g.half_length)?;
            }
        } else {
            // Only the time scenarios use a schedule.
            schedule = None;
            let st = &self.steady;
            st.options().validate().map_err(|e| within("steady", e))?;
            match self.scenario {
                ScenarioKind::FoldFind => {
                    let [lo, hi] = st.fold_bracket;
                    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                        return Err(Error::config("steady.fold_bracket", "need 0 ≤ lo < hi"));
                    }
                    positive("steady.fold_resolution", st.fold_resolution)?;
                }
                _ => {
                    if !(st.eta_min >= 0.0 && st.eta_max > st.eta_min && st.eta_max.is_finite()) {
                        return Err(Error::config("steady.eta_max", "need 0 ≤ eta_min < eta_max"));
                    }
                    positive("steady.eta_step", st.eta_step)?;
                    if (st.eta_max - st.eta_min) / st.eta_step > 1e6 {
                        return Err(Error::config("steady.eta_step", "more than 10⁶ pump samples"));
                    }
                }
            }
            if self.scenario == ScenarioKind::SteadyScan {
                if st.etas.is_empty() {
                    return Err(Error::config("steady.etas", "need at least one pump value"));
                }
                if st.etas.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
                    return Err(Error::config(
                        "steady.etas",
                        "pump values must be finite and nonnegative",
                    ));
                }
            }
            if self.scenario == ScenarioKind::StabilitySweep {
                if st.sweep_points < 2 {
                    return Err(Error::config("steady.sweep_points", "need at least two points"));
                }
                positive("steady.tol_imag", st.tol_imag)?;
            }
        }
        if self.scenario == ScenarioKind::GaussianPump {
            positive("breakdown.threshold", self.breakdown.threshold)?;
            if self.breakdown.sustain == 0 {
                return Err(Error::config("breakdown.sustain", "must be at least 1"));
            }
            if self.steady.overlay_points < 2 {
                return Err(Error::config("steady.overlay_points", "need at least two points"));
            }
        }
        Ok(ResolvedConfig {
            config: self,
            params,
            schedule,
        })
    }
}

impl ResolvedConfig {
    /// Replaces the engine, as done by a command-line override.
    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.config.engine = engine;
        self
    }

    pub fn kind(&self) -> ScenarioKind {
        self.config.scenario
    }
}
