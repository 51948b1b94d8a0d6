//! Run configuration: a TOML document where every field is optional. The
//! resolved form, with every default materialized, is echoed into the run
//! report so results are reproducible from the report alone.
//!
//! Stage seeds derive from the master `seed`: the input generator uses it
//! directly, the splitter uses `seed + 1`, and the detector seeds default
//! to `seed + 2` (isolation forest) and `seed + 3` (one-class SVM) unless
//! set explicitly.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{IngestSchema, SyntheticSpec};
use crate::iforest::IForestParams;
use crate::ocsvm::{GammaParam, OcSvmParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelSelection {
    Iforest,
    Ocsvm,
    Both,
}

impl ModelSelection {
    pub fn includes_iforest(self) -> bool {
        matches!(self, Self::Iforest | Self::Both)
    }

    pub fn includes_ocsvm(self) -> bool {
        matches!(self, Self::Ocsvm | Self::Both)
    }
}

/// Which rows the fitted models are evaluated on: the held-out test subset
/// (leak-free default) or the complete dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvalScope {
    Test,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputConfig {
    Csv { path: PathBuf, schema: IngestSchema },
    Synthetic { spec: SyntheticSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSettings {
    pub enabled: bool,
    pub repeats: usize,
    pub warmup: usize,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self { enabled: true, repeats: 5, warmup: 2 }
    }
}

/// Fully resolved run configuration; every field concrete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSelection,
    pub eval_scope: EvalScope,
    pub split_ratio: f64,
    pub input: InputConfig,
    pub iforest: IForestParams,
    pub ocsvm: OcSvmParams,
    pub profile: ProfileSettings,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Synthetic-input config with every default materialized; the starting
    /// point for programmatic runs and tests.
    pub fn synthetic_defaults(seed: u64) -> Self {
        Self {
            seed,
            model: ModelSelection::Both,
            eval_scope: EvalScope::Test,
            split_ratio: DEFAULT_SPLIT_RATIO,
            input: InputConfig::Synthetic { spec: default_synth_spec() },
            iforest: IForestParams { seed: seed.wrapping_add(2), ..IForestParams::default() },
            ocsvm: OcSvmParams { seed: seed.wrapping_add(3), ..OcSvmParams::default() },
            profile: ProfileSettings::default(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "split ratio {} outside (0, 1)",
                self.split_ratio
            )));
        }
        if !(0.0..=0.5).contains(&self.iforest.contamination) {
            return Err(ConfigError::Invalid(format!(
                "contamination {} outside [0, 0.5]",
                self.iforest.contamination
            )));
        }
        if !(self.ocsvm.nu > 0.0 && self.ocsvm.nu <= 1.0) {
            return Err(ConfigError::Invalid(format!("nu {} outside (0, 1]", self.ocsvm.nu)));
        }
        if self.profile.enabled {
            if self.profile.repeats < 3 {
                return Err(ConfigError::Invalid(format!(
                    "profile repeats must be at least 3, got {}",
                    self.profile.repeats
                )));
            }
            if self.profile.warmup < 1 {
                return Err(ConfigError::Invalid("profile warmup must be at least 1".into()));
            }
        }
        Ok(())
    }
}

pub fn default_synth_spec() -> SyntheticSpec {
    SyntheticSpec { normal_count: 2000, anomaly_count: 200, dim: 4, spread: 1.0, halfwidth: 10.0 }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub model: Option<ModelSelection>,
    pub eval_scope: Option<EvalScope>,
    pub output_dir: Option<PathBuf>,
}

// ---- raw (everything optional) TOML form ----

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    seed: Option<u64>,
    model: Option<ModelSelection>,
    eval_scope: Option<EvalScope>,
    input: Option<RawInput>,
    split: Option<RawSplit>,
    iforest: Option<RawIForest>,
    ocsvm: Option<RawOcSvm>,
    profile: Option<RawProfile>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    csv: Option<RawCsvInput>,
    synthetic: Option<RawSynthetic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCsvInput {
    path: PathBuf,
    drop_columns: Option<Vec<String>>,
    label_column: Option<String>,
    type_column: Option<String>,
    label_positive: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    normal: Option<usize>,
    anomaly: Option<usize>,
    dim: Option<usize>,
    spread: Option<f64>,
    halfwidth: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    ratio: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIForest {
    trees: Option<usize>,
    subsample: Option<usize>,
    contamination: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOcSvm {
    nu: Option<f64>,
    gamma: Option<GammaParam>,
    tolerance: Option<f64>,
    max_passes: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    enabled: Option<bool>,
    repeats: Option<usize>,
    warmup: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    Ok(toml::from_str(&text)?)
}

impl RawConfig {
    /// Parses from TOML text; convenience for tests.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Materializes every default and applies CLI overrides. The config
    /// must name exactly one input source.
    pub fn resolve(self, overrides: &CliOverrides) -> Result<RunConfig, ConfigError> {
        let seed = overrides.seed.or(self.seed).unwrap_or(DEFAULT_SEED);

        let input = match self.input {
            None => return Err(ConfigError::Invalid("config needs an [input] section".into())),
            Some(RawInput { csv: Some(_), synthetic: Some(_) }) => {
                return Err(ConfigError::Invalid(
                    "config must name exactly one input source, found both csv and synthetic"
                        .into(),
                ))
            }
            Some(RawInput { csv: None, synthetic: None }) => {
                return Err(ConfigError::Invalid(
                    "config must name an input source: [input.csv] or [input.synthetic]".into(),
                ))
            }
            Some(RawInput { csv: Some(csv), .. }) => {
                let defaults = IngestSchema::default();
                InputConfig::Csv {
                    path: csv.path,
                    schema: IngestSchema {
                        drop_columns: csv.drop_columns.unwrap_or(defaults.drop_columns),
                        label_column: csv.label_column.unwrap_or(defaults.label_column),
                        type_column: csv.type_column.unwrap_or(defaults.type_column),
                        label_positive_values: csv
                            .label_positive
                            .unwrap_or(defaults.label_positive_values),
                    },
                }
            }
            Some(RawInput { synthetic: Some(synth), .. }) => {
                let d = default_synth_spec();
                InputConfig::Synthetic {
                    spec: SyntheticSpec {
                        normal_count: synth.normal.unwrap_or(d.normal_count),
                        anomaly_count: synth.anomaly.unwrap_or(d.anomaly_count),
                        dim: synth.dim.unwrap_or(d.dim),
                        spread: synth.spread.unwrap_or(d.spread),
                        halfwidth: synth.halfwidth.unwrap_or(d.halfwidth),
                    },
                }
            }
        };

        let iforest_raw = self.iforest.unwrap_or_default();
        let iforest_defaults = IForestParams::default();
        let iforest = IForestParams {
            tree_count: iforest_raw.trees.unwrap_or(iforest_defaults.tree_count),
            subsample_size: iforest_raw.subsample.unwrap_or(iforest_defaults.subsample_size),
            contamination: iforest_raw.contamination.unwrap_or(iforest_defaults.contamination),
            seed: iforest_raw.seed.unwrap_or(seed.wrapping_add(2)),
        };

        let ocsvm_raw = self.ocsvm.unwrap_or_default();
        let ocsvm_defaults = OcSvmParams::default();
        let ocsvm = OcSvmParams {
            nu: ocsvm_raw.nu.unwrap_or(ocsvm_defaults.nu),
            gamma: ocsvm_raw.gamma.unwrap_or(ocsvm_defaults.gamma),
            tolerance: ocsvm_raw.tolerance.unwrap_or(ocsvm_defaults.tolerance),
            max_passes: ocsvm_raw.max_passes.unwrap_or(ocsvm_defaults.max_passes),
            seed: ocsvm_raw.seed.unwrap_or(seed.wrapping_add(3)),
        };

        let profile_raw = self.profile.unwrap_or_default();
        let profile_defaults = ProfileSettings::default();
        let profile = ProfileSettings {
            enabled: profile_raw.enabled.unwrap_or(profile_defaults.enabled),
            repeats: profile_raw.repeats.unwrap_or(profile_defaults.repeats),
            warmup: profile_raw.warmup.unwrap_or(profile_defaults.warmup),
        };

        let config = RunConfig {
            seed,
            model: overrides.model.or(self.model).unwrap_or(ModelSelection::Both),
            eval_scope: overrides.eval_scope.or(self.eval_scope).unwrap_or(EvalScope::Test),
            split_ratio: self.split.unwrap_or_default().ratio.unwrap_or(DEFAULT_SPLIT_RATIO),
            input,
            iforest,
            ocsvm,
            profile,
            output_dir: overrides
                .output_dir
                .clone()
                .or(self.output.unwrap_or_default().dir)
                .unwrap_or_else(|| PathBuf::from("out")),
        };
        config.validate()?;
        Ok(config)
    }
}
