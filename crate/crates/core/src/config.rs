//! Pipeline configuration: one human-editable TOML document with full
//! defaulting. Any omitted section or key takes its documented default, so
//! an empty file (or no file) runs the canonical seed-42 pipeline.

use crate::error::{Error, Result};
use crate::eval::SplitSpec;
use crate::features::FeatureRecipe;
use crate::models::{ForestConfig, GbdtConfig, LogisticConfig, TreeConfig};
use crate::panel::GeneratorConfig;
use crate::stress::ShockSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub logistic: LogisticConfig,
    pub tree: TreeConfig,
    pub forest: ForestConfig,
    pub gbdt_depthwise: GbdtConfig,
    pub gbdt_leafwise: GbdtConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            logistic: LogisticConfig::default(),
            tree: TreeConfig::default(),
            forest: ForestConfig::default(),
            gbdt_depthwise: GbdtConfig::default(),
            gbdt_leafwise: GbdtConfig::leafwise_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSection {
    /// Classification threshold echoed in report tables.
    pub threshold: f64,
    /// Factors listed per narrative.
    pub top_k_factors: usize,
    /// Households narrated from each end of the risk ranking.
    pub narrative_households: usize,
    /// PSI action threshold for drift flags.
    pub drift_threshold: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            threshold: 0.5,
            top_k_factors: 5,
            narrative_households: 5,
            drift_threshold: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    /// When set (or passed as --seed), rebases every component seed:
    /// generator = seed, forest = seed + 1, shock = seed + 2. Otherwise the
    /// per-section seeds apply.
    pub seed: Option<u64>,
    pub generator: GeneratorConfig,
    pub recipe: FeatureRecipe,
    pub split: SplitSpec,
    pub models: ModelSection,
    pub shock: ShockSpec,
    pub report: ReportSection,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<PipelineConfig> {
        let mut config: PipelineConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        if let Some(seed) = config.seed {
            config.rebase_seeds(seed);
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml_str(&text)
    }

    /// Derive all component seeds from one global seed.
    pub fn rebase_seeds(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.generator.seed = seed;
        self.models.forest.seed = seed.wrapping_add(1);
        self.shock.seed = seed.wrapping_add(2);
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.recipe.validate(self.generator.n_rounds)?;
        self.split.validate()?;
        self.models.gbdt_depthwise.validate()?;
        self.models.gbdt_leafwise.validate()?;
        self.shock.validate()?;
        if !(0.0..=1.0).contains(&self.report.threshold) {
            return Err(Error::Config(format!(
                "report threshold must lie in [0, 1], got {}",
                self.report.threshold
            )));
        }
        if self.report.top_k_factors == 0 {
            return Err(Error::Config(
                "report top_k_factors must be >= 1".to_string(),
            ));
        }
        if !(self.report.drift_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "drift_threshold must be >= 0, got {}",
                self.report.drift_threshold
            )));
        }
        Ok(())
    }

    /// Canonical JSON rendering; its SHA-256 identifies the run.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_canonical_defaults() {
        let config = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(config.generator.seed, 42);
        assert_eq!(config.generator.n_households, 750);
        assert_eq!(config.models.forest.seed, 4242);
        assert_eq!(config.shock.seed, 1337);
        config.validate().unwrap();
    }

    #[test]
    fn top_level_seed_rebases_component_seeds() {
        let config = PipelineConfig::from_toml_str("seed = 7\n").unwrap();
        assert_eq!(config.generator.seed, 7);
        assert_eq!(config.models.forest.seed, 8);
        assert_eq!(config.shock.seed, 9);
    }

    #[test]
    fn section_overrides_apply() {
        let text = r#"
[generator]
n_households = 100
prevalence_target = 0.3

[models.tree]
max_depth = 4

[report]
top_k_factors = 3
"#;
        let config = PipelineConfig::from_toml_str(text).unwrap();
        assert_eq!(config.generator.n_households, 100);
        assert_eq!(config.models.tree.max_depth, 4);
        assert_eq!(config.report.top_k_factors, 3);
        // Untouched sections keep defaults.
        assert_eq!(config.models.forest.n_trees, 100);
    }

    #[test]
    fn parse_errors_carry_location_context() {
        let err = PipelineConfig::from_toml_str("[generator]\nn_households = \"many\"\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = PipelineConfig::from_toml_str("").unwrap();
        let b = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = PipelineConfig::from_toml_str("seed = 1\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn invalid_nested_values_are_rejected() {
        let config =
            PipelineConfig::from_toml_str("[generator]\nprevalence_target = 0.9\n").unwrap();
        assert!(config.validate().is_err());
    }
}
