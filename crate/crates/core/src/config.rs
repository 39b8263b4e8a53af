//! Experiment configuration: a TOML document with one table per command.
//!
//! ```toml
//! seed = 7
//! trials = 1000
//!
//! [model]
//! beta = 0.0
//! x0 = 0.3
//! xi0 = 1.0
//!
//! [[symbol]]
//! order = 1.0
//! coefficient = "1 + 0.5*sin(x)"
//! h = [-1.0, 1.0]
//!
//! [[symbol]]
//! order = 0.0
//! coefficient = "0.3*cos(2*x)"
//!
//! [[symbol]]
//! order = -1.0
//! coefficient = "0.2"
//!
//! [recover]
//! n = 48
//! x0_grid = [-1.0, -0.5, 0.0, 0.5, 1.0]
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packets::{PacketProfile, WavePacketFamily, DEFAULT_SHARPNESS};
use crate::recovery::{
    plan_orders, AverageNodes, LambdaRules, MeasurementModel, Mode, OrderPlan, RecoveryOptions, SubtractMode,
    DEFAULT_LAMBDA_MARGIN,
};
use crate::stats::Target;
use crate::symbols::{Coefficient, HomogeneousTerm, LowFrequencyCutoff, Observable, SymbolExpansion};

const MODULE: &str = "cli_io";

fn default_trials() -> usize {
    1000
}
fn default_xi0() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_sharpness() -> f64 {
    DEFAULT_SHARPNESS
}
fn default_h() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_margin() -> f64 {
    DEFAULT_LAMBDA_MARGIN
}
fn default_term() -> usize {
    1
}
fn default_xi0_list() -> Vec<f64> {
    vec![1.0]
}
fn default_truncation() -> usize {
    128
}
fn default_burn_in() -> usize {
    1
}
fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub model: ModelConfig,
    #[serde(rename = "symbol")]
    pub symbols: Vec<SymbolTermConfig>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub plan: PlanConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recover: Option<RecoverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_stats: Option<NoiseStatsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_scaling: Option<VarianceScalingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonconvergence: Option<NonconvergenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticsConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub beta: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_xi0")]
    pub xi0: f64,
    #[serde(default = "default_true")]
    pub noise: bool,
    /// Sharpness `k` of the bridge `exp(−k/u)` in the packet profile.
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    /// `[inner, outer]` radii of the low-frequency cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolTermConfig {
    pub order: f64,
    pub coefficient: String,
    /// Angular factor `[h(−1), h(+1)]`.
    #[serde(default = "default_h")]
    pub h: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub strict_boundary: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_overrides: Vec<LambdaOverride>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            margin: DEFAULT_LAMBDA_MARGIN,
            strict_boundary: false,
            lambda_overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaOverride {
    pub term: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverConfig {
    pub n: f64,
    pub x0_grid: Vec<f64>,
    #[serde(default = "default_xi0_list")]
    pub xi0: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub average_nodes: AverageNodes,
    #[serde(default = "default_subtract")]
    pub subtract: SubtractMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_threshold: Option<f64>,
}

fn default_subtract() -> SubtractMode {
    SubtractMode::Oracle
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseStatsConfig {
    pub nodes: Vec<f64>,
    pub lambda: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

/// Which estimator an experiment drives. `mode` and `lambda` default to the
/// plan's choice for `term`; giving both skips the plan entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default = "default_term")]
    pub term: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub average_nodes: AverageNodes,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            term: 1,
            mode: None,
            lambda: None,
            average_nodes: AverageNodes::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceScalingConfig {
    pub grid: Vec<f64>,
    #[serde(default)]
    pub target: TargetConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonconvergenceConfig {
    pub grid: Vec<f64>,
    pub c: f64,
    #[serde(default)]
    pub target: TargetConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub grid: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub ns: Vec<f64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Tube exponent; half the noise decay rate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsConfig {
    pub grid: Vec<f64>,
    #[serde(default)]
    pub target: TargetConfig,
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::config(MODULE, format!("{name} must be finite (got {v})")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(MODULE, format!("config parse error: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(MODULE, format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(MODULE, format!("config serialization failed: {e}")))
    }

    /// Checks that hold for every command: finite numbers, a well-formed
    /// symbol with strictly decreasing orders.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        check_finite("model parameters", &[m.beta, m.x0, m.xi0, m.sharpness])?;
        if m.xi0.abs() != 1.0 {
            return Err(Error::config(MODULE, format!("xi0 must be +1 or -1 (got {})", m.xi0)));
        }
        if self.trials == 0 {
            return Err(Error::config(MODULE, "trials must be positive"));
        }
        for o in &self.plan.lambda_overrides {
            if o.term == 0 || o.term > self.symbols.len() {
                return Err(Error::config(MODULE, format!("lambda override names unknown term {}", o.term)));
            }
        }
        check_finite("plan margin", &[self.plan.margin])?;
        self.observable()?;
        Ok(())
    }

    pub fn profile(&self) -> Result<Arc<PacketProfile>> {
        PacketProfile::shared(self.model.sharpness)
    }

    pub fn observable(&self) -> Result<Observable> {
        if self.symbols.is_empty() {
            return Err(Error::config(MODULE, "at least one [[symbol]] term is required"));
        }
        let cutoff = match self.model.cutoff {
            Some([a, b]) => LowFrequencyCutoff::new(a, b)?,
            None => LowFrequencyCutoff::default(),
        };
        let terms = self
            .symbols
            .iter()
            .map(|s| {
                check_finite("symbol order and angular factors", &[s.order, s.h[0], s.h[1]])?;
                Ok(HomogeneousTerm::new(s.order, Coefficient::parse(&s.coefficient, s.h[0], s.h[1])?)?.with_cutoff(cutoff))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Observable::new(SymbolExpansion::new(terms)?))
    }

    pub fn model(&self) -> Result<MeasurementModel> {
        let m = MeasurementModel::new(self.observable()?, self.model.beta, self.model.x0, self.model.xi0, self.profile()?);
        Ok(if self.model.noise { m } else { m.without_noise() })
    }

    pub fn orders(&self) -> Vec<f64> {
        self.symbols.iter().map(|s| s.order).collect()
    }

    pub fn lambda_rules(&self) -> LambdaRules {
        let mut overrides = vec![None; self.symbols.len()];
        for o in &self.plan.lambda_overrides {
            if let Some(slot) = overrides.get_mut(o.term.wrapping_sub(1)) {
                *slot = Some(o.lambda);
            }
        }
        LambdaRules {
            margin: self.plan.margin,
            strict_boundary: self.plan.strict_boundary,
            overrides,
        }
    }

    pub fn plan(&self) -> Result<OrderPlan> {
        plan_orders(&self.orders(), self.model.beta, &self.lambda_rules())
    }

    pub fn recovery_options(&self, r: &RecoverConfig) -> Result<RecoveryOptions> {
        check_finite("recover.n", &[r.n])?;
        check_finite("recover.x0_grid", &r.x0_grid)?;
        if !(r.n >= 1.0) {
            return Err(Error::config(MODULE, "recover.n must be at least 1"));
        }
        if r.xi0.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::config(MODULE, "recover.xi0 entries must be +1 or -1"));
        }
        if r.x0_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config(MODULE, "recover.x0_grid must be strictly increasing"));
        }
        Ok(RecoveryOptions {
            n: r.n,
            average_nodes: r.average_nodes,
            subtract: r.subtract,
            alert_threshold: r.alert_threshold,
            seed: self.seed,
        })
    }

    /// Resolves a target, consulting the plan only when needed.
    pub fn target(&self, t: &TargetConfig) -> Result<Target> {
        let model = self.model()?;
        if t.term == 0 || t.term > self.symbols.len() {
            return Err(Error::config(
                MODULE,
                format!("target term {} is not in 1..={}", t.term, self.symbols.len()),
            ));
        }
        match (t.mode, t.lambda) {
            (Some(mode), Some(lambda)) => {
                if !(lambda > 1.0 && lambda.is_finite()) {
                    return Err(Error::config(MODULE, format!("target lambda must exceed 1 (got {lambda})")));
                }
                Ok(Target {
                    model,
                    term: t.term,
                    mode,
                    lambda,
                    average_nodes: t.average_nodes,
                })
            }
            _ => {
                let plan = self.plan()?;
                let mut target = Target::from_plan(model, &plan, t.term, t.average_nodes)?;
                if let Some(mode) = t.mode {
                    if mode != target.mode {
                        return Err(Error::config(
                            MODULE,
                            format!(
                                "term {} is {} in the plan; give lambda too to force {} mode",
                                t.term,
                                target.mode.as_str(),
                                mode.as_str()
                            ),
                        ));
                    }
                }
                if let Some(l) = t.lambda {
                    let bound_plan = plan_orders(
                        &self.orders(),
                        self.model.beta,
                        &LambdaRules {
                            overrides: (1..=self.symbols.len()).map(|j| (j == t.term).then_some(l)).collect(),
                            ..self.lambda_rules()
                        },
                    )?;
                    target.lambda = bound_plan.lambda(t.term);
                }
                Ok(target)
            }
        }
    }

    pub fn family(&self, lambda: f64) -> Result<WavePacketFamily> {
        WavePacketFamily::new(self.model.x0, self.model.xi0, lambda, self.profile()?)
    }
}
