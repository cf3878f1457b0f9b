//! Experiment configuration: a TOML file with one table per concern. Parsing
//! is strict (unknown keys are errors, with line/column locations from the
//! TOML parser) and round-trips exactly: `parse(serialize(c)) == c`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ssl_core::oracle::{OracleBase, ScoreOracle, StaticTarget};
use ssl_core::samplers::{AnnealLevel, AnnealSchedule, InitDist};
use ssl_core::sde::{DiffusionModel, DiffusionSchedule, Family};
use ssl_core::targets::{BumpTarget, Density, GaussianMixture};
use ssl_core::Error;

/// A config problem with enough context to fix the file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

/// Which experiment the file describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Langevin chains against a static target.
    Lmc,
    /// Langevin down a ladder of smoothed targets.
    Anneal,
    /// Reverse-diffusion predictor from the model prior.
    Predictor,
    /// Predictor with Langevin corrector legs.
    Pc,
    /// Oracle chain coupled to its bad-set splice under shared noise.
    Coupled,
    /// The dented-Gaussian family: small score error, large sampling error.
    Counterexample,
    /// Theory-bound evaluation (no sampling).
    Bounds,
    /// Annealing-ladder construction (no sampling).
    Schedule,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Lmc => "lmc",
            Kind::Anneal => "anneal",
            Kind::Predictor => "predictor",
            Kind::Pc => "pc",
            Kind::Coupled => "coupled",
            Kind::Counterexample => "counterexample",
            Kind::Bounds => "bounds",
            Kind::Schedule => "schedule",
        }
    }
}

/// Sampling target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `sum_i weights[i] N(means[i], variances[i] I)`.
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variances: Vec<f64>,
    },
    /// Standard Gaussian with a well dug at distance `l` (1-d).
    Bump { l: f64 },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::GaussianMixture { means, .. } => {
                means.first().map_or(0, Vec::len)
            }
            TargetSpec::Bump { .. } => 1,
        }
    }

    pub fn mixture(&self) -> ConfigResult<GaussianMixture> {
        match self {
            TargetSpec::GaussianMixture { weights, means, variances } => {
                Ok(GaussianMixture::new(weights.clone(), means.clone(), variances.clone())?)
            }
            TargetSpec::Bump { .. } => Err(ConfigError(
                "this experiment needs a gaussian_mixture target".into(),
            )),
        }
    }

    pub fn oracle_base(&self) -> ConfigResult<OracleBase> {
        match self {
            TargetSpec::GaussianMixture { .. } => {
                Ok(OracleBase::static_mixture(self.mixture()?))
            }
            TargetSpec::Bump { l } => Ok(OracleBase::static_bump(BumpTarget::new(*l)?)),
        }
    }
}

/// Forward diffusion (needed by `predictor` and `pc`; optional elsewhere).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub horizon: f64,
    pub schedule: DiffusionSchedule,
}

impl ModelSpec {
    pub fn build(&self) -> ConfigResult<DiffusionModel> {
        Ok(DiffusionModel::new(self.family, self.schedule, self.horizon)?)
    }
}

/// Score oracle: the exact score or one of the perturbation modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Exact,
    /// Constant error of norm `eps1` in a seed-chosen direction.
    ConstantShift { eps1: f64, seed: u64 },
    /// Sinusoidal error field with sup norm calibrated into `[eps1/2, eps1]`.
    SmoothField { eps1: f64, seed: u64 },
    /// Compactly supported error with L2(p) norm `eps_l2` (1-d).
    Localized { eps_l2: f64, center: f64, width: f64 },
    /// Reports the dented-Gaussian score instead of the Gaussian one (1-d).
    BumpMismatch { l: f64 },
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::Exact
    }
}

impl OracleSpec {
    pub fn build(&self, base: OracleBase) -> ConfigResult<ScoreOracle> {
        Ok(match *self {
            OracleSpec::Exact => ScoreOracle::exact(base),
            OracleSpec::ConstantShift { eps1, seed } => {
                ScoreOracle::constant_shift(base, eps1, seed)?
            }
            OracleSpec::SmoothField { eps1, seed } => {
                ScoreOracle::smooth_field(base, eps1, seed)?
            }
            OracleSpec::Localized { eps_l2, center, width } => {
                ScoreOracle::l2_localized(base, eps_l2, center, width, 0.0)?
            }
            OracleSpec::BumpMismatch { l } => {
                // This mode hard-wires its base: the reported score belongs to
                // the dented Gaussian while the target stays standard normal.
                let standard = match &base {
                    OracleBase::Static(StaticTarget::Mixture(m)) => {
                        m.num_components() == 1
                            && m.dim() == 1
                            && m.means()[0][0] == 0.0
                            && m.variances()[0] == 1.0
                    }
                    _ => false,
                };
                if !standard {
                    return Err(ConfigError(
                        "bump_mismatch oracle requires the 1-d standard normal target".into(),
                    ));
                }
                ScoreOracle::bump_mismatch(l)?
            }
        })
    }
}

/// Chain count, step plan, and initial distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub chains: usize,
    pub step_size: f64,
    pub steps: usize,
    /// Ignored by `predictor`/`pc` (they start from the model prior).
    pub init: Option<InitDist>,
}

impl SamplerSpec {
    pub fn init_or(&self, fallback: InitDist) -> InitDist {
        self.init.clone().unwrap_or(fallback)
    }

    pub fn require_init(&self) -> ConfigResult<InitDist> {
        self.init
            .clone()
            .ok_or_else(|| ConfigError("this experiment needs [sampler.init]".into()))
    }
}

/// What to record along a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSpec {
    /// Drift-norm diagnostics every this many steps (0 = never).
    pub diag_stride: usize,
    /// Step counts at which to summarize full states (0 = initial).
    pub snapshots: Vec<usize>,
    /// Pool moments over states strictly after this step count.
    pub moments_after: Option<usize>,
    /// Histogram TV of final states against the target (1-d mixtures only).
    pub histogram_tv: bool,
    /// Nearest-mean mode masses of final states (mixtures only).
    pub mode_masses: bool,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec {
            diag_stride: 0,
            snapshots: Vec::new(),
            moments_after: None,
            histogram_tv: false,
            mode_masses: false,
        }
    }
}

/// Annealing ladder: explicit levels, or the closed-form construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSpec {
    pub levels: Option<Vec<AnnealLevel>>,
    pub auto: Option<AutoScheduleSpec>,
}

/// Inputs of the geometric-ladder construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoScheduleSpec {
    pub dim: usize,
    pub sigma_min_sq: f64,
    pub c_ls: f64,
    pub m1: f64,
    pub eps_tv: f64,
    #[serde(default = "one")]
    pub ratio_c: f64,
    #[serde(default = "one")]
    pub l: f64,
}

fn one() -> f64 {
    1.0
}

impl AutoScheduleSpec {
    pub fn build(&self) -> ConfigResult<AnnealSchedule> {
        let opts = ssl_core::bounds::ScheduleOptions { ratio_c: self.ratio_c, l: self.l };
        Ok(ssl_core::bounds::noise_schedule(
            self.dim,
            self.sigma_min_sq,
            self.c_ls,
            self.m1,
            self.eps_tv,
            &opts,
        )?)
    }
}

impl AnnealSpec {
    pub fn schedule(&self) -> ConfigResult<AnnealSchedule> {
        match (&self.levels, &self.auto) {
            (Some(levels), None) => Ok(AnnealSchedule::new(levels.clone())?),
            (None, Some(auto)) => auto.build(),
            _ => Err(ConfigError(
                "[anneal] needs exactly one of `levels` and `auto`".into(),
            )),
        }
    }
}

/// Corrector placement for `pc` runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorPlacement {
    /// A corrector leg after every predictor step.
    #[default]
    Every,
    /// One corrector leg after the final predictor step.
    Last,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcSpec {
    pub corrector_step_size: f64,
    pub corrector_steps: usize,
    #[serde(default)]
    pub placement: CorrectorPlacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledSpec {
    /// Error-norm threshold defining the bad set and the splice.
    pub threshold: f64,
    /// Score smoothness constant for the chi-square budget of the spliced
    /// chain (>= 1 for the budget to be sound).
    pub l: f64,
    /// Log-Sobolev constant of the target for the same budget.
    pub c_ls: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    /// Well distances to sweep.
    pub l_values: Vec<f64>,
}

/// Which bound family to evaluate and its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "which", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundsSpec {
    /// Langevin chi-square recursion.
    Lmc {
        dim: usize,
        l: f64,
        c_ls: f64,
        eps1: f64,
        step_size: f64,
        steps: usize,
        chi0_sq: f64,
    },
    /// Predictor chi-square recursion along the `[model]` diffusion.
    /// `chi0_sq` falls back to the prior bound when omitted.
    Predictor {
        dim: usize,
        l: f64,
        l_s: f64,
        c_ls: f64,
        m2: f64,
        eps1: f64,
        step_size: f64,
        steps: usize,
        chi0_sq: Option<f64>,
    },
    /// Full corrector run plan for a TV/chi-square accuracy pair.
    CorrectorBudget {
        eps_tv: f64,
        eps_chi: f64,
        k_chi: f64,
        dim: usize,
        l: f64,
        c_ls: f64,
        c_t_mult: f64,
    },
    /// Chi-square of a smoothing kernel against the smoothed target.
    WarmStart { m1: f64, c_ls: f64, dim: usize, sigma2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    /// Artifact directory; omit for stdout-only evaluation kinds.
    pub output: Option<String>,
    pub target: Option<TargetSpec>,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
    pub sampler: Option<SamplerSpec>,
    #[serde(default)]
    pub measure: MeasureSpec,
    pub anneal: Option<AnnealSpec>,
    pub pc: Option<PcSpec>,
    pub coupled: Option<CoupledSpec>,
    pub counterexample: Option<CounterexampleSpec>,
    pub bounds: Option<BoundsSpec>,
    pub schedule: Option<AutoScheduleSpec>,
}

impl ExperimentConfig {
    /// Empty config of the given kind; callers fill in the sections they use.
    pub fn bare(kind: Kind, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            seed,
            output: None,
            target: None,
            model: None,
            oracle: OracleSpec::default(),
            sampler: None,
            measure: MeasureSpec::default(),
            anneal: None,
            pc: None,
            coupled: None,
            counterexample: None,
            bounds: None,
            schedule: None,
        }
    }

    pub fn from_str(text: &str) -> ConfigResult<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn need<'a, T>(&self, field: &'a Option<T>, name: &str) -> ConfigResult<&'a T> {
        field
            .as_ref()
            .ok_or_else(|| ConfigError(format!("kind `{}` needs [{name}]", self.kind.name())))
    }

    pub fn target(&self) -> ConfigResult<&TargetSpec> {
        self.need(&self.target, "target")
    }

    pub fn model(&self) -> ConfigResult<&ModelSpec> {
        self.need(&self.model, "model")
    }

    pub fn sampler(&self) -> ConfigResult<&SamplerSpec> {
        self.need(&self.sampler, "sampler")
    }

    /// Structural checks beyond parsing: required sections per kind and
    /// agreeing dimensions.
    pub fn validate(&self) -> ConfigResult<()> {
        match self.kind {
            Kind::Lmc => {
                self.target()?;
                self.sampler()?.require_init()?;
            }
            Kind::Anneal => {
                self.target()?.mixture()?;
                self.sampler()?;
                self.need(&self.anneal, "anneal")?.schedule()?;
            }
            Kind::Predictor => {
                self.target()?.mixture()?;
                self.model()?.build()?;
                self.sampler()?;
            }
            Kind::Pc => {
                self.target()?.mixture()?;
                self.model()?.build()?;
                self.sampler()?;
                self.need(&self.pc, "pc")?;
            }
            Kind::Coupled => {
                self.target()?;
                self.sampler()?.require_init()?;
                self.need(&self.coupled, "coupled")?;
            }
            Kind::Counterexample => {
                let spec = self.need(&self.counterexample, "counterexample")?;
                if spec.l_values.is_empty() {
                    return Err(ConfigError("[counterexample] needs l_values".into()));
                }
            }
            Kind::Bounds => {
                let spec = self.need(&self.bounds, "bounds")?;
                if matches!(spec, BoundsSpec::Predictor { .. }) {
                    self.model()?.build()?;
                }
            }
            Kind::Schedule => {
                self.need(&self.schedule, "schedule")?;
            }
        }
        if let (Some(t), Some(s)) = (&self.target, &self.sampler) {
            let td = t.dim();
            if td != 0 {
                if let Some(init) = &s.init {
                    if init.dim() != td {
                        return Err(ConfigError(format!(
                            "target dimension {td} does not match init dimension {}",
                            init.dim()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
