//! Pipeline configuration, stored as TOML.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use znnrad::{AlsoaConfig, DieznnParams, FeatureSettings, NoiseSpec, UkfParams};

use crate::error::CliError;

/// Where images come from: a directory laid out as `cancer/` and
/// `noncancer/`, or phantoms generated into the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum DatasetSource {
    Synthetic,
    Directory(PathBuf),
}

impl From<String> for DatasetSource {
    fn from(s: String) -> Self {
        if s == "synthetic" {
            DatasetSource::Synthetic
        } else {
            DatasetSource::Directory(PathBuf::from(s))
        }
    }
}

impl From<DatasetSource> for String {
    fn from(d: DatasetSource) -> Self {
        d.to_string()
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::Synthetic => f.write_str("synthetic"),
            DatasetSource::Directory(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub n_per_class: usize,
    pub image_size: usize,
    pub noise_sigma: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        Self { n_per_class: 50, image_size: 64, noise_sigma: 0.1 }
    }
}

/// ALSOA search over the DIEZNN gains `(eta, phi, mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSettings {
    pub population_m: usize,
    pub max_iterations: usize,
    pub exploit_scale: f64,
    pub explore_scale: f64,
    pub eta: (f64, f64),
    pub phi: (f64, f64),
    pub mu: (f64, f64),
    /// Share of training groups held out to score each candidate.
    pub validation_fraction: f64,
}

impl Default for TuneSettings {
    fn default() -> Self {
        Self {
            population_m: 20,
            max_iterations: 30,
            exploit_scale: 0.3,
            explore_scale: 0.2,
            eta: (0.5, 50.0),
            phi: (0.5, 50.0),
            mu: (0.5, 10.0),
            validation_fraction: 0.3,
        }
    }
}

impl TuneSettings {
    pub fn alsoa(&self, seed: u64) -> AlsoaConfig {
        AlsoaConfig {
            population_m: self.population_m,
            bounds: vec![self.eta, self.phi, self.mu],
            max_iterations: self.max_iterations,
            seed,
            exploit_scale: self.exploit_scale,
            explore_scale: self.explore_scale,
        }
    }
}

/// Linear-noise coefficients for the nine-trace comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseExperimentSettings {
    pub c0: f64,
    pub c1: f64,
}

impl Default for NoiseExperimentSettings {
    fn default() -> Self {
        Self { c0: 1.0, c1: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSource,
    pub seed: u64,
    pub augment_multiplier: usize,
    pub test_fraction: f64,
    pub output_dir: PathBuf,
    pub synthetic: SyntheticSettings,
    pub ukf: UkfParams,
    pub features: FeatureSettings,
    pub dieznn: DieznnParams,
    pub noise: NoiseSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alsoa: Option<TuneSettings>,
    pub noise_experiment: NoiseExperimentSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic,
            seed: 42,
            augment_multiplier: znnrad::ingest::DEFAULT_MULTIPLIER,
            test_fraction: 0.3,
            output_dir: PathBuf::from("znnrad-out"),
            synthetic: SyntheticSettings::default(),
            ukf: UkfParams::default(),
            features: FeatureSettings::default(),
            dieznn: DieznnParams::default(),
            noise: NoiseSpec::none(),
            alsoa: None,
            noise_experiment: NoiseExperimentSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        if self.augment_multiplier == 0 {
            return bad("augment_multiplier must be at least 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        let s = &self.synthetic;
        if s.n_per_class < 2 || s.image_size < 8 || !(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite()) {
            return bad(format!("synthetic settings need n_per_class >= 2, image_size >= 8, noise_sigma >= 0: {s:?}"));
        }
        self.ukf.validate().or_else(|e| bad(e.to_string()))?;
        self.features.validate().or_else(|e| bad(e.to_string()))?;
        self.dieznn.validate().or_else(|e| bad(e.to_string()))?;
        self.noise.validate().or_else(|e| bad(e.to_string()))?;
        if let Some(t) = &self.alsoa {
            t.alsoa(self.seed).validate().or_else(|e| bad(e.to_string()))?;
            if t.eta.1 * self.dieznn.step_h >= 2.0 {
                return bad(format!("alsoa eta bound {} violates step*eta < 2", t.eta.1));
            }
            if !(t.validation_fraction > 0.0 && t.validation_fraction < 1.0) {
                return bad(format!("validation_fraction {} outside (0, 1)", t.validation_fraction));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML with `output_dir` blanked, so the same
    /// settings written to different places share a digest.
    pub fn digest(&self) -> String {
        let canonical = PipelineConfig { output_dir: PathBuf::new(), ..self.clone() };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = PipelineConfig { alsoa: Some(TuneSettings::default()), ..Default::default() };
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c = PipelineConfig::from_toml("seed = 7\n[dieznn]\neta = 3.0\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.dieznn.eta, 3.0);
        assert_eq!(c.dieznn.phi, 8.0);
        assert_eq!(c.dataset, DatasetSource::Synthetic);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(PipelineConfig::from_toml("sede = 7\n").is_err());
    }

    #[test]
    fn digest_ignores_output_dir_only() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { output_dir: "elsewhere".into(), ..a.clone() };
        let c = PipelineConfig { seed: 1, ..a.clone() };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn directory_dataset_parses() {
        let c = PipelineConfig::from_toml("dataset = \"/data/ct\"\n").unwrap();
        assert_eq!(c.dataset, DatasetSource::Directory("/data/ct".into()));
    }
}
