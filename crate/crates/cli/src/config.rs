//! Scenario configuration. Every random stream is derived from the single
//! root seed `data.seed` (or `--seed`); the seeds embedded in the noise,
//! estimator and metrics sections are overwritten on resolution.

use std::path::{Path, PathBuf};

use lsm_core::estimator::{EstimatorConfig, EstimatorMode};
use lsm_core::metrics::MetricsConfig;
use lsm_core::model::{derive_seed, FeatureMap, NoiseSpec, ParameterMatrix, SwitchingKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub experiment: Option<ExperimentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n: usize,
    pub s: usize,
    #[serde(rename = "A_true", default)]
    pub a_true: TrueParameters,
    /// Defaults to the identity map of dimension `n`.
    #[serde(default)]
    pub feature_map: Option<FeatureMap>,
    #[serde(default = "default_switching")]
    pub switching: SwitchingKind,
}

fn default_switching() -> SwitchingKind {
    SwitchingKind::IidUniform
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RandomKeyword {
    #[default]
    Random,
}

/// `"random"` or an explicit list of columns (one per mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrueParameters {
    Keyword(RandomKeyword),
    Columns(Vec<Vec<f64>>),
}

impl Default for TrueParameters {
    fn default() -> Self {
        TrueParameters::Keyword(RandomKeyword::Random)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputDist {
    #[default]
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(rename = "N")]
    pub n_samples: usize,
    #[serde(default)]
    pub input_dist: InputDist,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisFlags {
    pub theorem1: bool,
    pub lemma5: bool,
    pub lemma7: bool,
    pub proposition1: bool,
    pub bounds: bool,
}

impl Default for AnalysisFlags {
    fn default() -> Self {
        AnalysisFlags {
            theorem1: true,
            lemma5: true,
            lemma7: true,
            proposition1: true,
            bounds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub enable: AnalysisFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputConfig {
    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }
}

/// Sweep axes; an empty axis keeps the base scenario value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "N")]
    pub n_samples: Vec<usize>,
    pub noise_std: Vec<f64>,
    pub outliers: Vec<usize>,
    /// Ratio of the least to the most likely mode probability, in (0, 1].
    pub balance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Trials per sweep cell.
    pub trials: usize,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_recovery_tol")]
    pub recovery_tol: f64,
    /// Compute metrics and bounds per trial (slower).
    #[serde(default = "default_true")]
    pub analysis: bool,
}

fn default_recovery_tol() -> f64 {
    1e-6
}

fn default_true() -> bool {
    true
}

/// Command-line overrides applied before hashing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<EstimatorMode>,
    pub budget: Option<u128>,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(format!("invalid config: {m}")));
        if self.system.n == 0 || self.system.s == 0 {
            return bad("system.n and system.s must be positive".into());
        }
        let map = self.feature_map();
        if map.output_dim() != self.system.n {
            return bad(format!(
                "feature map produces n = {}, system.n = {}",
                map.output_dim(),
                self.system.n
            ));
        }
        if let TrueParameters::Columns(cols) = &self.system.a_true {
            if cols.len() != self.system.s || cols.iter().any(|c| c.len() != self.system.n) {
                return bad(format!("A_true must list {} columns of length {}", self.system.s, self.system.n));
            }
        }
        if let Some(exp) = &self.experiment {
            if exp.sweep.balance.iter().any(|&b| !(b > 0.0 && b <= 1.0)) {
                return bad("sweep balance values must lie in (0, 1]".into());
            }
            if exp.sweep.noise_std.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return bad("sweep noise_std values must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.system
            .feature_map
            .clone()
            .unwrap_or(FeatureMap::Identity { dim: self.system.n })
    }

    pub fn root_seed(&self) -> u64 {
        self.data.seed
    }

    /// Applies overrides and derives every sub-seed from the root seed.
    pub fn resolve(mut self, ov: &Overrides) -> Self {
        if let Some(seed) = ov.seed {
            self.data.seed = seed;
        }
        if let Some(mode) = ov.mode {
            self.estimator.mode = mode;
        }
        if let Some(budget) = ov.budget {
            self.estimator.bruteforce_budget = budget;
            self.metrics.subset_budget = budget;
        }
        if let Some(out) = &ov.out {
            self.output.dir = out.clone();
        }
        self.reseed(self.data.seed);
        self
    }

    pub fn reseed(&mut self, root: u64) {
        self.data.seed = root;
        self.noise.seed = derive_seed(root, 3);
        self.estimator.seed = derive_seed(root, 4);
        self.metrics.seed = derive_seed(root, 5);
    }

    pub fn true_parameters(&self) -> Result<ParameterMatrix, CliError> {
        match &self.system.a_true {
            TrueParameters::Keyword(RandomKeyword::Random) => Ok(lsm_core::model::random_parameter_matrix(
                &self.feature_map(),
                self.system.s,
                derive_seed(self.data.seed, 0),
            )),
            TrueParameters::Columns(cols) => Ok(ParameterMatrix::from_columns(cols)?),
        }
    }

    /// SHA-256 over the resolved configuration (output directory excluded)
    /// followed by the digests of the given input files.
    pub fn hash_with_inputs(&self, inputs: &[&[u8]]) -> String {
        let mut hashed = self.clone();
        hashed.output.dir = PathBuf::new();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&hashed).expect("config serialises"));
        for bytes in inputs {
            h.update(Sha256::digest(bytes));
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"system": {"n": 1, "s": 2}, "data": {"N": 4}}"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.system.a_true, TrueParameters::Keyword(RandomKeyword::Random));
        assert_eq!(cfg.feature_map(), FeatureMap::Identity { dim: 1 });
        assert!(cfg.output.csv());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::parse(r#"{"system": {"n": 1, "s": 2, "bogus": 1}, "data": {"N": 4}}"#);
        assert!(matches!(err, Err(CliError::Input(_))));
        let err = ScenarioConfig::parse(r#"{"system": {"n": 1, "s": 2}, "data": {"N": 4}, "extra": {}}"#);
        assert!(matches!(err, Err(CliError::Input(_))));
    }

    #[test]
    fn explicit_parameters_are_checked() {
        let ok = r#"{"system": {"n": 1, "s": 2, "A_true": [[1.0], [-1.0]]}, "data": {"N": 4}}"#;
        assert!(ScenarioConfig::parse(ok).is_ok());
        let bad = r#"{"system": {"n": 1, "s": 2, "A_true": [[1.0]]}, "data": {"N": 4}}"#;
        assert!(ScenarioConfig::parse(bad).is_err());
    }

    #[test]
    fn seed_override_changes_hash_and_sub_seeds() {
        let cfg = ScenarioConfig::parse(MINIMAL).unwrap();
        let a = cfg.clone().resolve(&Overrides::default());
        let b = cfg.resolve(&Overrides {
            seed: Some(7),
            ..Default::default()
        });
        assert_ne!(a.estimator.seed, b.estimator.seed);
        assert_ne!(a.hash_with_inputs(&[]), b.hash_with_inputs(&[]));
        assert_eq!(a.hash_with_inputs(&[b"x"]), a.hash_with_inputs(&[b"x"]));
    }
}
