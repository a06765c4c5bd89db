use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abx::Weighting;
use crate::audio::{DEFAULT_HOP, DEFAULT_WINDOW_LEN};
use crate::dpgmm::DpgmmConfig;
use crate::error::{Error, Result};
use crate::visual::DEFAULT_COMPONENTS;

/// Modalities a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrainModality {
    A,
    V,
    AV,
}

/// Test-time input: clean audio (A), video (V), both (AV), noisy audio (N)
/// or noisy audio with video (NV).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestCondition {
    A,
    V,
    AV,
    N,
    NV,
}

impl TrainModality {
    pub fn audio(self) -> bool {
        matches!(self, Self::A | Self::AV)
    }
    pub fn visual(self) -> bool {
        matches!(self, Self::V | Self::AV)
    }
}

impl TestCondition {
    pub fn audio(self) -> bool {
        !matches!(self, Self::V)
    }
    pub fn visual(self) -> bool {
        matches!(self, Self::V | Self::AV | Self::NV)
    }
    pub fn noisy(self) -> bool {
        matches!(self, Self::N | Self::NV)
    }
    /// Whether a model trained on `train` has every dimension this
    /// condition supplies.
    pub fn allowed_for(self, train: TrainModality) -> bool {
        (!self.audio() || train.audio()) && (!self.visual() || train.visual())
    }
}

impl fmt::Display for TrainModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for TestCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A train/test pairing such as `AV-NV`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub train: TrainModality,
    pub test: TestCondition,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.train, self.test)
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("condition {s:?} is not TRAIN-TEST (e.g. AV-NV)"));
        let (train, test) = s.split_once('-').ok_or_else(bad)?;
        let train = match train {
            "A" => TrainModality::A,
            "V" => TrainModality::V,
            "AV" => TrainModality::AV,
            _ => return Err(bad()),
        };
        let test = match test {
            "A" => TestCondition::A,
            "V" => TestCondition::V,
            "AV" => TestCondition::AV,
            "N" => TestCondition::N,
            "NV" => TestCondition::NV,
            _ => return Err(bad()),
        };
        Ok(Self { train, test })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureParams {
    pub window_len: f64,
    pub hop: f64,
    pub pca_components: usize,
    /// At most this many pretraining frames, taken at an even stride.
    pub pca_max_frames: usize,
    /// Z-score every dimension with training statistics before fitting.
    pub standardize: bool,
    /// SNR of test audio in the noisy conditions.
    pub snr_db: f64,
    /// Utterance `i` of the test split is corrupted with seed `noise_seed + i`.
    pub noise_seed: u64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW_LEN,
            hop: DEFAULT_HOP,
            pca_components: DEFAULT_COMPONENTS,
            pca_max_frames: 600,
            standardize: false,
            snr_db: 5.0,
            noise_seed: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerParams {
    pub alpha: f64,
    pub iterations: usize,
    pub init_clusters: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        let d = DpgmmConfig::default();
        Self {
            alpha: d.alpha,
            iterations: d.iterations,
            init_clusters: d.init_clusters,
        }
    }
}

impl SamplerParams {
    pub fn with_seed(&self, seed: u64) -> DpgmmConfig {
        DpgmmConfig {
            alpha: self.alpha,
            iterations: self.iterations,
            init_clusters: self.init_clusters,
            seed,
        }
    }
}

/// Overrides of the data-driven NIW prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorParams {
    pub kappa0: f64,
    /// `nu0 = d + nu0_offset`.
    pub nu0_offset: f64,
    /// Multiplies the diagonal variance scale matrix.
    pub psi_scale: f64,
}

impl Default for PriorParams {
    fn default() -> Self {
        Self {
            kappa0: 1.0,
            nu0_offset: 3.0,
            psi_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbxParams {
    pub cross_speaker: bool,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub train: TrainModality,
    pub test: Vec<TestCondition>,
}

fn default_replicates() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Corpus root (holding `corpus.toml`).
    pub corpus: PathBuf,
    /// Default output directory; not part of the recorded configuration.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Replicate `r` is fitted with seed `seed + r`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub features: FeatureParams,
    #[serde(default)]
    pub dpgmm: SamplerParams,
    #[serde(default)]
    pub prior: PriorParams,
    #[serde(default)]
    pub abx: AbxParams,
    #[serde(rename = "condition")]
    pub conditions: Vec<ConditionSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.corpus.is_relative() {
            cfg.corpus = base.join(&cfg.corpus);
        }
        if let Some(out) = cfg.output.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.conditions.is_empty() {
            return bad("at least one [[condition]] is required".into());
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if self.conditions[..i].iter().any(|o| o.train == c.train) {
                return bad(format!("train modality {} listed twice", c.train));
            }
            if c.test.is_empty() {
                return bad(format!("train modality {} has no test conditions", c.train));
            }
            if let Some(t) = c.test.iter().find(|t| !t.allowed_for(c.train)) {
                return bad(format!(
                    "cannot test a {} model on {t}: its dimensions were never trained",
                    c.train
                ));
            }
        }
        let f = &self.features;
        if !(f.window_len > 0.0 && f.hop > 0.0) {
            return bad("window length and hop must be positive".into());
        }
        if f.pca_components == 0 || f.pca_max_frames <= f.pca_components {
            return bad("pca_components must be at least 1 and below pca_max_frames".into());
        }
        if f.snr_db.is_nan() {
            return bad("snr_db must be a number".into());
        }
        self.dpgmm.with_seed(0).validate()?;
        let p = &self.prior;
        if !(p.kappa0 > 0.0 && p.psi_scale > 0.0 && p.nu0_offset > -1.0) {
            return bad("prior needs kappa0 > 0, psi_scale > 0 and nu0_offset > -1".into());
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.conditions
            .iter()
            .flat_map(|c| c.test.iter().map(move |&test| Condition { train: c.train, test }))
            .collect()
    }

    pub fn uses_visual(&self) -> bool {
        self.conditions.iter().any(|c| c.train.visual())
    }

    pub fn uses_noise(&self) -> bool {
        self.conditions().iter().any(|c| c.test.noisy())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicates as u64).map(|r| self.seed + r).collect()
    }
}
