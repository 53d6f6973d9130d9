use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::LinearClassifier;
use crate::dedup::{DedupScope, LshConfig};
use crate::error::{Error, Result};
use crate::filters::FilterConfig;
use crate::lm::{NGramModel, PerplexityThresholds};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub io: IoConfig,
    #[serde(default)]
    pub stages: Vec<StageSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub report: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    C4Filter,
    HeuristicFilter,
    LmFilter,
    Dedup,
    Classify,
    WindowFilter,
}

impl StageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::C4Filter => "c4_filter",
            StageKind::HeuristicFilter => "heuristic_filter",
            StageKind::LmFilter => "lm_filter",
            StageKind::Dedup => "dedup",
            StageKind::Classify => "classify",
            StageKind::WindowFilter => "window_filter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    pub kind: StageKind,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LmParams {
    model: PathBuf,
    #[serde(default)]
    thresholds: PerplexityThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyParams {
    model: PathBuf,
    /// Keep only documents scoring strictly above this value.
    #[serde(default)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DedupParams {
    #[serde(default = "d_shingle")]
    shingle_size: usize,
    #[serde(default = "d_hashes")]
    num_hashes: usize,
    #[serde(default = "d_bands")]
    num_bands: usize,
    #[serde(default = "d_rows")]
    rows_per_band: usize,
    /// Falls back to the pipeline seed.
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    scope: DedupScope,
}

fn d_shingle() -> usize {
    LshConfig::default().shingle_size
}
fn d_hashes() -> usize {
    LshConfig::default().num_hashes
}
fn d_bands() -> usize {
    LshConfig::default().num_bands
}
fn d_rows() -> usize {
    LshConfig::default().rows_per_band
}

/// A stage with its parameters parsed and any model files loaded.
#[derive(Debug)]
pub(crate) enum Stage {
    C4(FilterConfig),
    Heuristic(FilterConfig),
    Window(FilterConfig),
    Lm(NGramModel, PerplexityThresholds),
    Dedup(LshConfig, DedupScope),
    Classify(LinearClassifier, Option<f64>),
}

impl Stage {
    pub(crate) fn is_barrier(&self) -> bool {
        matches!(self, Stage::Dedup(..))
    }
}

fn params<T: serde::de::DeserializeOwned>(spec: &StageSpec) -> Result<T> {
    spec.params
        .clone()
        .try_into()
        .map_err(|e| stage_err(spec, format!("bad params: {e}")))
}

fn stage_err(spec: &StageSpec, message: impl Into<String>) -> Error {
    Error::Stage {
        stage: spec.name.clone(),
        message: message.into(),
    }
}

impl PipelineConfig {
    /// Parses a TOML config. Relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        fix(&mut cfg.io.input);
        fix(&mut cfg.io.output);
        fix(&mut cfg.io.report);
        for s in &mut cfg.stages {
            for key in ["model"] {
                if let Some(toml::Value::String(p)) = s.params.get_mut(key) {
                    if Path::new(p.as_str()).is_relative() {
                        *p = base_dir.join(&*p).to_string_lossy().into_owned();
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Checks the schema version, stage names, parameters and referenced
    /// files without running anything.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    pub(crate) fn build(&self) -> Result<Vec<Stage>> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !self.io.input.is_file() {
            return Err(Error::config(format!(
                "input {} does not exist",
                self.io.input.display()
            )));
        }
        let mut names = BTreeSet::new();
        let mut stages = Vec::with_capacity(self.stages.len());
        for spec in &self.stages {
            if !names.insert(spec.name.as_str()) {
                return Err(Error::config(format!("duplicate stage name {:?}", spec.name)));
            }
            let stage = match spec.kind {
                StageKind::C4Filter | StageKind::HeuristicFilter | StageKind::WindowFilter => {
                    let f: FilterConfig = params(spec)?;
                    f.validate().map_err(|e| stage_err(spec, e.to_string()))?;
                    match spec.kind {
                        StageKind::C4Filter => Stage::C4(f),
                        StageKind::HeuristicFilter => Stage::Heuristic(f),
                        _ => Stage::Window(f),
                    }
                }
                StageKind::LmFilter => {
                    let p: LmParams = params(spec)?;
                    p.thresholds.validate().map_err(|e| stage_err(spec, e.to_string()))?;
                    let model = NGramModel::load(&p.model).map_err(|e| stage_err(spec, e.to_string()))?;
                    Stage::Lm(model, p.thresholds)
                }
                StageKind::Dedup => {
                    let p: DedupParams = params(spec)?;
                    let lsh = LshConfig {
                        shingle_size: p.shingle_size,
                        num_hashes: p.num_hashes,
                        num_bands: p.num_bands,
                        rows_per_band: p.rows_per_band,
                        seed: p.seed.unwrap_or(self.seed),
                    };
                    lsh.validate().map_err(|e| stage_err(spec, e.to_string()))?;
                    Stage::Dedup(lsh, p.scope)
                }
                StageKind::Classify => {
                    let p: ClassifyParams = params(spec)?;
                    if let Some(t) = p.threshold {
                        if !(0.0..=1.0).contains(&t) {
                            return Err(stage_err(spec, format!("threshold {t} outside [0, 1]")));
                        }
                    }
                    let model =
                        LinearClassifier::load(&p.model).map_err(|e| stage_err(spec, e.to_string()))?;
                    Stage::Classify(model, p.threshold)
                }
            };
            stages.push(stage);
        }
        Ok(stages)
    }
}
