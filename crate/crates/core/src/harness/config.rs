use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::CandidateOptions;
use crate::error::{Error, Result};
use crate::interaction::PruningStrategy;

/// Environment variable that overrides `paths.data`.
pub const DATA_DIR_ENV: &str = "JOINTIE_DATA_DIR";
/// Environment variable that overrides `paths.output`.
pub const OUTPUT_DIR_ENV: &str = "JOINTIE_OUTPUT_DIR";

/// The five multi-task settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Separate coreference and relation models.
    Pipeline,
    /// Shared encoder, entity-level relation extraction.
    Joint,
    /// Shared encoder, mention-level relation extraction.
    JointM,
    /// Joint-M plus graph propagation into the coreference embeddings.
    Gp,
    /// Joint-M plus graph compatibility.
    Gc,
}

impl Setting {
    pub const ALL: [Setting; 5] = [
        Setting::Pipeline,
        Setting::Joint,
        Setting::JointM,
        Setting::Gp,
        Setting::Gc,
    ];

    /// Whether relations are scored between mention candidates and then
    /// aggregated, rather than between pooled entities.
    pub fn mention_level(self) -> bool {
        matches!(self, Setting::JointM | Setting::Gp | Setting::Gc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Pipeline => "pipeline",
            Setting::Joint => "joint",
            Setting::JointM => "joint_m",
            Setting::Gp => "gp",
            Setting::Gc => "gc",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s
            .trim()
            .trim_start_matches('+')
            .to_ascii_lowercase()
            .replace('-', "_");
        match key.as_str() {
            "pipeline" => Ok(Setting::Pipeline),
            "joint" => Ok(Setting::Joint),
            "joint_m" | "jointm" => Ok(Setting::JointM),
            "gp" => Ok(Setting::Gp),
            "gc" => Ok(Setting::Gc),
            _ => Err(Error::Config(format!(
                "unknown setting {s:?} (expected pipeline, joint, joint_m, gp or gc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    #[default]
    Toy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub dim: usize,
    pub max_input_length: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Toy,
            dim: 32,
            max_input_length: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden width of the mention scorer and the relation priors.
    pub ffn_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { ffn_hidden: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub encoder_lr: f64,
    pub task_lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Fraction of all steps spent in linear warmup.
    pub warmup_fraction: f64,
    /// Decay linearly after warmup; otherwise keep the peak rate.
    pub linear_decay: bool,
    /// Global gradient-norm clip; 0 disables clipping.
    pub max_grad_norm: f64,
    /// Documents per optimisation step.
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            encoder_lr: 5e-5,
            task_lr: 2e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            warmup_fraction: 0.1,
            linear_decay: true,
            max_grad_norm: 1.0,
            batch_size: 4,
            epochs: 72,
        }
    }
}

/// Multipliers applied to each loss term before summation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub coref: f64,
    pub mention: f64,
    pub relation: f64,
    pub contrastive: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            coref: 1.0,
            mention: 1.0,
            relation: 1.0,
            contrastive: 1.0,
        }
    }
}

/// Graph-compatibility hyperparameters; required for the `gc` setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcConfig {
    pub lambda: f64,
    pub margin: f64,
    pub prune_k: usize,
    #[serde(default)]
    pub pruning: PruningStrategy,
    /// Initial value of every type weight; defaults to `1 / |R|`.
    #[serde(default)]
    pub beta_init: Option<f64>,
    #[serde(default)]
    pub freeze_beta: bool,
}

/// Graph-propagation options; only valid for the `gp` setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Start the per-type transforms at zero.
    pub zero_init: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluate on dev every this many epochs (and after the last one).
    pub every: usize,
    /// Stop as soon as dev RE F1 reaches this value.
    pub stop_at_dev_f1: Option<f64>,
    /// Hold out this fraction of train as dev when the dataset has no dev split.
    pub dev_fraction: f64,
    /// After selecting the best epoch on the held-out dev set, retrain on the
    /// full training set for that many epochs.
    pub final_retrain: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            every: 1,
            stop_at_dev_f1: None,
            dev_fraction: 0.1,
            final_retrain: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Everything that defines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingConfig {
    pub setting: Setting,
    /// One run per seed; the best run on dev is kept.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub candidates: CandidateOptions,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub loss: LossWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gc: Option<GcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<GpConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

impl SettingConfig {
    /// Defaults for `setting`, with the reference graph-compatibility
    /// values filled in for `gc`.
    pub fn new(setting: Setting) -> Self {
        SettingConfig {
            setting,
            seeds: default_seeds(),
            encoder: EncoderConfig::default(),
            model: ModelConfig::default(),
            candidates: CandidateOptions::default(),
            optim: OptimConfig::default(),
            loss: LossWeights::default(),
            gc: (setting == Setting::Gc).then_some(GcConfig {
                lambda: 1e-3,
                margin: 2.0,
                prune_k: 24,
                pruning: PruningStrategy::Saliency,
                beta_init: None,
                freeze_beta: false,
            }),
            gp: (setting == Setting::Gp).then(GpConfig::default),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: SettingConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML file, applies path overrides from the environment and
    /// validates the result.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: SettingConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.apply_env_overrides();
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply_env_overrides(&mut self) {
        if let Some(v) = std::env::var_os(DATA_DIR_ENV) {
            self.paths.data = Some(PathBuf::from(v));
        }
        if let Some(v) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.paths.output = Some(PathBuf::from(v));
        }
    }

    /// Switches to another setting. Sections that only apply to the old
    /// setting are dropped, and `gc` gets the default values if it has
    /// no section yet.
    pub fn with_setting(mut self, setting: Setting) -> Self {
        let defaults = SettingConfig::new(setting);
        self.setting = setting;
        if setting == Setting::Gc {
            self.gc = self.gc.or(defaults.gc);
        } else {
            self.gc = None;
        }
        if setting == Setting::Gp {
            self.gp = self.gp.or(defaults.gp);
        } else {
            self.gp = None;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        match (self.setting, &self.gc) {
            (Setting::Gc, None) => {
                return fail("setting gc needs a [gc] section with lambda, margin and prune_k".into())
            }
            (Setting::Gc, Some(gc)) => {
                if !non_negative(gc.lambda) || !positive(gc.margin) || gc.prune_k == 0 {
                    return fail(format!(
                        "[gc] needs lambda >= 0, margin > 0 and prune_k >= 1 (got {}, {}, {})",
                        gc.lambda, gc.margin, gc.prune_k
                    ));
                }
            }
            (s, Some(_)) => return fail(format!("[gc] only applies to setting gc, not {s}")),
            _ => {}
        }
        if self.gp.is_some() && self.setting != Setting::Gp {
            return fail(format!("[gp] only applies to setting gp, not {}", self.setting));
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.encoder.dim == 0 || self.encoder.max_input_length == 0 || self.model.ffn_hidden == 0 {
            return fail(
                "encoder.dim, encoder.max_input_length and model.ffn_hidden must be positive".into(),
            );
        }
        let c = &self.candidates;
        if c.max_span_width == 0 || !positive(c.ratio) || c.cap == 0 {
            return fail("candidates need max_span_width >= 1, ratio > 0 and cap >= 1".into());
        }
        let o = &self.optim;
        if !positive(o.encoder_lr) || !positive(o.task_lr) {
            return fail("learning rates must be positive".into());
        }
        if o.batch_size == 0 || o.epochs == 0 {
            return fail("batch_size and epochs must be positive".into());
        }
        if !(0.0..1.0).contains(&o.warmup_fraction) {
            return fail("warmup_fraction must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !positive(o.eps) {
            return fail("need 0 <= beta1, beta2 < 1 and eps > 0".into());
        }
        if !non_negative(o.weight_decay) || !non_negative(o.max_grad_norm) {
            return fail("weight_decay and max_grad_norm must be non-negative".into());
        }
        let w = &self.loss;
        if [w.coref, w.mention, w.relation, w.contrastive]
            .iter()
            .any(|&x| !non_negative(x))
        {
            return fail("loss weights must be non-negative".into());
        }
        if self.eval.every == 0 {
            return fail("eval.every must be positive".into());
        }
        if !(self.eval.dev_fraction > 0.0 && self.eval.dev_fraction < 1.0) {
            return fail("eval.dev_fraction must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// Both reject NaN.
fn positive(x: f64) -> bool {
    x > 0.0
}

fn non_negative(x: f64) -> bool {
    x >= 0.0
}
