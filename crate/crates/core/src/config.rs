//! Pipeline configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{ClassifierSettings, ScreenConfig};
use crate::dataset::{ColumnMapping, SyntheticConfig};
use crate::error::{Error, Result};
use crate::rvm::RvmFitConfig;
use crate::swarm::SwarmConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub columns: ColumnMapping,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data.csv"),
            columns: ColumnMapping::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write SVG figures.
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    /// When false the benchmark stage uses every row.
    pub enabled: bool,
    pub swarm: SwarmConfig,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            swarm: SwarmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CopulaConfig {
    /// Draws for the Monte Carlo cross-check of the success probability;
    /// 0 skips it.
    pub monte_carlo_samples: usize,
}

impl Default for CopulaConfig {
    fn default() -> Self {
        Self {
            monte_carlo_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RvmConfig {
    /// RBF width on standardized inputs; unset uses the median distance.
    pub kernel_width: Option<f64>,
    pub fit: RvmFitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Per-KPI quantile levels defining the benchmark thresholds.
    pub quantiles: Vec<f64>,
    /// Probability levels traced as isolines.
    pub levels: Vec<f64>,
    pub grid_points: usize,
    /// Covariates the surface is conditioned on; unset takes every
    /// categorical covariate.
    pub conditioning: Option<Vec<String>>,
    pub star_threshold: f64,
    pub decision_threshold: f64,
    /// Cross-validation folds for the screen; 0 or 1 scores in sample.
    pub folds: usize,
    pub surface_max_rows: usize,
    pub screen_max_rows: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let screen = ScreenConfig::default();
        Self {
            quantiles: vec![0.5, 0.5],
            levels: vec![0.5, 0.8, 0.9],
            grid_points: 100,
            conditioning: None,
            star_threshold: screen.star_threshold,
            decision_threshold: screen.decision_threshold,
            folds: screen.folds,
            surface_max_rows: ClassifierSettings::default().max_rows,
            screen_max_rows: screen.classifier.max_rows,
        }
    }
}

/// Everything a run needs. Missing sections and keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub input: InputConfig,
    pub output: OutputConfig,
    pub denoise: DenoiseConfig,
    pub copula: CopulaConfig,
    pub rvm: RvmConfig,
    pub benchmark: BenchmarkConfig,
    pub simulate: SyntheticConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            input: InputConfig::default(),
            output: OutputConfig::default(),
            denoise: DenoiseConfig::default(),
            copula: CopulaConfig::default(),
            rvm: RvmConfig::default(),
            benchmark: BenchmarkConfig::default(),
            simulate: SyntheticConfig {
                n: 5000,
                informative_covariates: 2,
                noise_covariates: 3,
                rural: true,
                ..SyntheticConfig::default()
            },
        }
    }
}

/// Command-line values that replace file values when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub input: Option<PathBuf>,
    pub no_denoise: bool,
    pub svg: bool,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.output.dir = out.clone();
        }
        if let Some(threads) = overrides.threads {
            self.threads = threads;
        }
        if let Some(input) = &overrides.input {
            self.input.path = input.clone();
        }
        if overrides.no_denoise {
            self.denoise.enabled = false;
        }
        if overrides.svg {
            self.output.svg = true;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.seed > i64::MAX as u64 {
            return bad("seed must fit in a signed 64-bit integer");
        }
        if self.input.columns.kpis.len() != 2 {
            return bad("exactly two KPI columns must be mapped");
        }
        let b = &self.benchmark;
        if b.quantiles.len() != self.input.columns.kpis.len() {
            return bad("benchmark.quantiles needs one level per KPI");
        }
        if b.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return bad("benchmark.quantiles must lie in (0, 1)");
        }
        if b.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return bad("benchmark.levels must lie in (0, 1)");
        }
        if b.grid_points < 2 {
            return bad("benchmark.grid_points must be >= 2");
        }
        if b.surface_max_rows < 2 || b.screen_max_rows < 2 {
            return bad("classifier row caps must be >= 2");
        }
        if let Some(w) = self.rvm.kernel_width {
            if !(w.is_finite() && w > 0.0) {
                return bad("rvm.kernel_width must be positive");
            }
        }
        self.denoise
            .swarm
            .validate()
            .map_err(|e| Error::Config(format!("denoise.swarm: {e}")))
    }

    /// SHA-256 of the TOML form, ignoring the output directory and thread
    /// count since neither changes any result.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output.dir = PathBuf::new();
        canonical.threads = 0;
        Ok(hex::encode(Sha256::digest(canonical.to_toml()?.as_bytes())))
    }

    pub fn surface_settings(&self) -> ClassifierSettings {
        ClassifierSettings {
            kernel_width: self.rvm.kernel_width,
            max_rows: self.benchmark.surface_max_rows,
            fit: self.rvm.fit.clone(),
        }
    }

    pub fn screen_config(&self, seed: u64) -> ScreenConfig {
        ScreenConfig {
            folds: self.benchmark.folds,
            star_threshold: self.benchmark.star_threshold,
            decision_threshold: self.benchmark.decision_threshold,
            classifier: ClassifierSettings {
                kernel_width: self.rvm.kernel_width,
                max_rows: self.benchmark.screen_max_rows,
                fit: self.rvm.fit.clone(),
            },
            seed,
        }
    }
}
