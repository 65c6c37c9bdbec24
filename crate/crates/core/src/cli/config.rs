//! Pipeline configuration: one TOML file with a section per module, plus
//! `section.key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::behavior::{DetectorConfig, EmaConfig, SnippetConfig};
use crate::clustering::ClusteringConfig;
use crate::cvqvae::{ModelConfig, TrainConfig};
use crate::dgsfm::DgsfmConfig;
use crate::error::{Error, Result};
use crate::extraction::{AugmentConfig, ExtractionConfig};
use crate::ingest::{SceneConfig, ScriptSampler};
use crate::types::DEFAULT_DT;

/// Offsets added to the top-level seed for each stage.
pub mod seed_offset {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const KMEANS: u64 = 5;
    pub const SNIPPET: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Synth,
    Highd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Multi-vehicle interaction scenes around one ego.
    Scenes,
    /// Independent single vehicles with scripted maneuver sequences.
    Maneuvers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub kind: SynthKind,
    pub count: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { kind: SynthKind::Scenes, count: 600 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighdSection {
    /// Directory holding `NN_tracks.csv` and `NN_recordingMeta.csv` files.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RuleBased,
    Ema,
    Snippet,
}

impl Method {
    pub fn display_name(self) -> &'static str {
        match self {
            Method::RuleBased => "Rule-based",
            Method::Ema => "EMA",
            Method::Snippet => "Snippet clustering",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    /// Methods scored against the annotations, when present.
    pub methods: Vec<Method>,
    /// Matching window in frames.
    pub window: usize,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            methods: vec![Method::RuleBased, Method::Ema, Method::Snippet],
            window: crate::behavior::evaluation::DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchors {
    /// Change points found by the rule-based detector.
    Detected,
    /// Scripted change points written by `synth`.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub anchors: Anchors,
}

impl Default for ExtractSection {
    fn default() -> Self {
        Self { anchors: Anchors::Detected }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self { train_fraction: 0.85 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub epsilon: f64,
    pub n_params: usize,
    pub n_samples: usize,
    pub tolerance: f64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self { epsilon: 1e-5, n_params: 100, n_samples: 8, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub dt: f64,
    pub source: Source,
    pub synth: SynthSection,
    pub scenes: SceneConfig,
    pub maneuvers: ScriptSampler,
    pub highd: HighdSection,
    pub detector: DetectorConfig,
    pub ema: EmaConfig,
    pub snippet: SnippetConfig,
    pub detect: DetectSection,
    pub extraction: ExtractionConfig,
    pub extract: ExtractSection,
    pub dgsfm: DgsfmConfig,
    pub split: SplitSection,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    /// `lambda_cl`, `lambda_int` apply to the `dk` variant; `seed` is
    /// replaced by the derived training seed.
    pub train: TrainConfig,
    pub clustering: ClusteringConfig,
    pub gradcheck: GradcheckSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            dt: DEFAULT_DT,
            source: Source::Synth,
            synth: SynthSection::default(),
            scenes: SceneConfig::default(),
            maneuvers: ScriptSampler::default(),
            highd: HighdSection::default(),
            detector: DetectorConfig::default(),
            ema: EmaConfig::default(),
            snippet: SnippetConfig::default(),
            detect: DetectSection::default(),
            extraction: ExtractionConfig::default(),
            extract: ExtractSection::default(),
            dgsfm: DgsfmConfig::default(),
            split: SplitSection::default(),
            augment: AugmentConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            clustering: ClusteringConfig::default(),
            gradcheck: GradcheckSection::default(),
        }
    }
}

impl Config {
    /// Parses TOML text, applies `section.key=value` overrides and validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Config = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or the defaults when `None`) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) if !p.exists() => {
                return Err(Error::MissingArtifact { path: p.to_path_buf() })
            }
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config("split.train_fraction must lie in (0, 1)".into()));
        }
        if !(self.gradcheck.epsilon > 0.0) || self.gradcheck.n_samples == 0 {
            return Err(Error::Config(
                "gradcheck.epsilon must be positive and n_samples >= 1".into(),
            ));
        }
        self.scenes.validate()?;
        self.detector.validate()?;
        self.extraction.validate()?;
        self.dgsfm.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn stage_seed(&self, offset: u64) -> u64 {
        self.seed.wrapping_add(offset)
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key '{key}' is malformed")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{part}' is not a section")))?;
    }
    node.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}
