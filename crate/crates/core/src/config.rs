//! One TOML document configuring the whole pipeline. Every table is
//! optional and falls back to the stage defaults; unknown keys anywhere are
//! rejected.

use crate::augment::OversampleConfig;
use crate::dataio::{GeneratorConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::nnet::TrainConfig;
use crate::runtime::EnergyProfile;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Pruning + quantization stage settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompressConfig {
    pub prune_ratio: f64,
    pub rewind_epochs: usize,
    pub calibration_size: usize,
    pub calibration_seed: u64,
}

impl Default for CompressConfig {
    fn default() -> Self {
        CompressConfig {
            prune_ratio: 0.5,
            rewind_epochs: 5,
            calibration_size: crate::compress::CALIBRATION_SIZE,
            calibration_seed: 42,
        }
    }
}

impl CompressConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.prune_ratio) {
            return Err(Error::Config(format!(
                "prune_ratio {} not in [0,1)",
                self.prune_ratio
            )));
        }
        if self.calibration_size == 0 {
            return Err(Error::Config("calibration_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Targets for threshold selection on the precision-recall sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdTargets {
    pub precision_target: f64,
    pub recall_floor: f64,
}

impl Default for ThresholdTargets {
    fn default() -> Self {
        ThresholdTargets {
            precision_target: 0.95,
            recall_floor: 0.5,
        }
    }
}

impl ThresholdTargets {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("precision_target", self.precision_target),
            ("recall_floor", self.recall_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} not in [0,1]")));
            }
        }
        Ok(())
    }
}

/// Whole-pipeline configuration: one table per stage.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub generator: GeneratorConfig,
    pub split: SplitSpec,
    pub oversample: OversampleConfig,
    pub train: TrainConfig,
    pub compress: CompressConfig,
    pub thresholds: ThresholdTargets,
    pub energy: EnergyProfile,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            generator: GeneratorConfig::default(),
            split: SplitSpec::default(),
            oversample: OversampleConfig::default(),
            train: TrainConfig::default(),
            compress: CompressConfig::default(),
            thresholds: ThresholdTargets::default(),
            energy: EnergyProfile::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SplitTable {
    train_frac: f64,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
}

impl Default for SplitTable {
    fn default() -> Self {
        let s = SplitSpec::default();
        SplitTable {
            train_frac: s.train_frac,
            val_frac: s.val_frac,
            test_frac: s.test_frac,
            seed: s.seed,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawPipeline {
    generator: Option<toml::Table>,
    split: SplitTable,
    oversample: OversampleConfig,
    train: TrainConfig,
    compress: CompressConfig,
    thresholds: ThresholdTargets,
    energy: EnergyProfile,
}

/// Renders a TOML table of scalars as the generator's `key = value` lines
/// so the generator keeps its parse rules (`scale` before derived counts,
/// unknown keys rejected).
fn generator_from_table(table: &toml::Table) -> Result<GeneratorConfig> {
    let mut text = String::new();
    for (key, value) in table {
        let rendered = match value {
            toml::Value::Integer(v) => v.to_string(),
            toml::Value::Float(v) => v.to_string(),
            other => {
                return Err(Error::Config(format!(
                    "generator.{key}: expected a number, got {other}"
                )))
            }
        };
        text.push_str(&format!("{key} = {rendered}\n"));
    }
    GeneratorConfig::from_kv_str(&text)
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<PipelineConfig> {
        let raw: RawPipeline = toml::from_str(text)
            .map_err(|e| Error::Config(format!("pipeline config: {e}")))?;
        let generator = match &raw.generator {
            Some(table) => generator_from_table(table)?,
            None => GeneratorConfig::default(),
        };
        let cfg = PipelineConfig {
            generator,
            split: SplitSpec {
                train_frac: raw.split.train_frac,
                val_frac: raw.split.val_frac,
                test_frac: raw.split.test_frac,
                seed: raw.split.seed,
            },
            oversample: raw.oversample,
            train: raw.train,
            compress: raw.compress,
            thresholds: raw.thresholds,
            energy: raw.energy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        PipelineConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.split.validate()?;
        self.oversample.validate()?;
        self.train.validate()?;
        self.compress.validate()?;
        self.thresholds.validate()?;
        self.energy.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::OversampleMode;

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.compress.prune_ratio, 0.5);
        assert_eq!(cfg.train.epochs, TrainConfig::default().epochs);
        assert_eq!(cfg.split.train_frac, 0.70);
        assert_eq!(cfg.energy.active_power_mw, 316.0);
        assert_eq!(cfg.generator.scale, 0.01);
    }

    #[test]
    fn tables_override_defaults() {
        let cfg = PipelineConfig::from_toml_str(
            r#"
            [generator]
            scale = 0.02
            noise_std = 0.05

            [split]
            train_frac = 0.8
            val_frac = 0.1
            test_frac = 0.1

            [oversample]
            mode = "Smote"
            k = 3

            [train]
            epochs = 2

            [compress]
            prune_ratio = 0.25

            [thresholds]
            recall_floor = 0.7

            [energy]
            inference_duration_ms = 30.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.generator.scale, 0.02);
        assert_eq!(cfg.generator.noise_std, 0.05);
        // Derived sample counts follow the overridden scale.
        assert_eq!(cfg.generator.samples_forklift, 7640);
        assert_eq!(cfg.split.train_frac, 0.8);
        assert_eq!(cfg.oversample.mode, OversampleMode::Smote);
        assert_eq!(cfg.oversample.k, 3);
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.compress.prune_ratio, 0.25);
        assert_eq!(cfg.thresholds.recall_floor, 0.7);
        assert_eq!(cfg.energy.inference_duration_ms, 30.0);
    }

    #[test]
    fn unknown_keys_rejected_everywhere() {
        assert!(PipelineConfig::from_toml_str("[bogus]\nx = 1\n").is_err());
        assert!(PipelineConfig::from_toml_str("[train]\nbogus = 1\n").is_err());
        assert!(PipelineConfig::from_toml_str("[generator]\nbogus = 1\n").is_err());
        assert!(PipelineConfig::from_toml_str("[split]\nbogus = 0.5\n").is_err());
    }

    #[test]
    fn invalid_component_values_rejected() {
        assert!(PipelineConfig::from_toml_str("[split]\ntrain_frac = 0.9\n").is_err());
        assert!(PipelineConfig::from_toml_str("[compress]\nprune_ratio = 1.5\n").is_err());
        assert!(PipelineConfig::from_toml_str("[oversample]\nbeta = 2.0\n").is_err());
        assert!(PipelineConfig::from_toml_str("[energy]\nactive_power_mw = 0.0\n").is_err());
        assert!(PipelineConfig::from_toml_str("[thresholds]\nrecall_floor = 1.2\n").is_err());
    }

    #[test]
    fn generator_rejects_non_numeric_values() {
        assert!(PipelineConfig::from_toml_str("[generator]\nscale = \"big\"\n").is_err());
    }
}
