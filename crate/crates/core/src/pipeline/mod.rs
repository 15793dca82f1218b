//! Staged batch pipeline with cached, checksummed artifacts.
//!
//! Each stage reads only the artifacts of earlier stages from the output
//! directory, so any stage can be rerun alone. A stage is skipped when its
//! hash (stage parameters plus checksums of its inputs) matches the manifest
//! and its recorded outputs are intact.

mod io;
mod report;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::crqa::{CrqaConfig, CrqaError};
use crate::fixture::derive_seed;
use crate::moral::MoralError;
use crate::textprep::{CleanConfig, TextPrepError};
use crate::timeseries::{TimeSeriesError, TimeWindow, DEFAULT_WINDOW_BOUNDARIES};
use crate::topics::{LdaConfig, TopicError};

pub use io::sha256_hex;
pub use report::top_ngrams;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing {artifact}: run {stage} first")]
    MissingUpstream { stage: Stage, artifact: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    TextPrep(#[from] TextPrepError),
    #[error(transparent)]
    Moral(#[from] MoralError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
    #[error(transparent)]
    Crqa(#[from] CrqaError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(path: &Path, message: impl fmt::Display) -> Self {
        Self::Parse { path: path.display().to_string(), message: message.to_string() }
    }

    /// 1 for usage problems, 2 for bad data, 3 for broken invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::MissingUpstream { .. } => 1,
            Self::Invariant(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Cascades,
    Prep,
    Score,
    Topics,
    Timeseries,
    Crqa,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Cascades,
        Stage::Prep,
        Stage::Score,
        Stage::Topics,
        Stage::Timeseries,
        Stage::Crqa,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Cascades => "cascades",
            Stage::Prep => "prep",
            Stage::Score => "score",
            Stage::Topics => "topics",
            Stage::Timeseries => "timeseries",
            Stage::Crqa => "crqa",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub label: String,
    /// `YYYY-MM-DD`, inclusive.
    pub start: String,
    /// `YYYY-MM-DD`, exclusive.
    pub end: String,
}

pub fn default_window_specs() -> Vec<WindowSpec> {
    DEFAULT_WINDOW_BOUNDARIES
        .windows(2)
        .enumerate()
        .map(|(i, b)| WindowSpec { label: format!("t{}", i + 1), start: b[0].into(), end: b[1].into() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentMode {
    /// Every tweet inherits the topic of its cascade's pseudo-document.
    Cascade,
    /// Every tweet is inferred on its own tokens against the fitted topics.
    Tweet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicStageConfig {
    pub assignment: AssignmentMode,
    pub top_words: usize,
    pub coherence_top_n: usize,
    /// Candidate K values for an optional sweep; empty disables it.
    pub sweep_k: Vec<usize>,
    pub sweep_threshold: f64,
}

impl Default for TopicStageConfig {
    fn default() -> Self {
        Self {
            assignment: AssignmentMode::Cascade,
            top_words: 20,
            coherence_top_n: 10,
            sweep_k: Vec::new(),
            sweep_threshold: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreStageConfig {
    pub ratio_bin_width: f64,
    pub ratio_max: f64,
}

impl Default for ScoreStageConfig {
    fn default() -> Self {
        Self { ratio_bin_width: 0.1, ratio_max: 3.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrqaStageConfig {
    #[serde(flatten)]
    pub params: CrqaConfig,
    /// Fill missing days by linear interpolation instead of dropping them.
    pub interpolate: bool,
    /// Also write run-length-encoded recurrence matrices.
    pub dump_matrices: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    /// EMFD-format CSV; the bundled toy lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// Verify the lexicon's per-dimension counts against the published EMFD.
    pub lexicon_check: bool,
    pub stopwords: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub top_k: usize,
    pub top_terms: usize,
    pub windows: Vec<WindowSpec>,
    pub clean: CleanConfig,
    /// `lda.seed` is ignored; the topic seed is derived from `seed`.
    pub lda: LdaConfig,
    pub topics: TopicStageConfig,
    pub score: ScoreStageConfig,
    pub crqa: CrqaStageConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            lexicon: None,
            lexicon_check: false,
            stopwords: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            top_k: 600,
            top_terms: 50,
            windows: default_window_specs(),
            clean: CleanConfig::default(),
            lda: LdaConfig::default(),
            topics: TopicStageConfig::default(),
            score: ScoreStageConfig::default(),
            crqa: CrqaStageConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a TOML file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut config: Self =
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.input.as_mut().map(resolve);
        config.lexicon.as_mut().map(resolve);
        config.stopwords.as_mut().map(resolve);
        resolve(&mut config.out_dir);
        Ok(config)
    }

    pub fn time_windows(&self) -> Result<Vec<TimeWindow>, PipelineError> {
        let windows = self
            .windows
            .iter()
            .map(|w| TimeWindow::from_dates(w.label.clone(), &w.start, &w.end))
            .collect::<Result<Vec<_>, _>>()?;
        crate::timeseries::validate_partition(&windows)?;
        Ok(windows)
    }

    /// LDA settings with the seed derived from the top-level seed.
    pub fn effective_lda(&self) -> LdaConfig {
        LdaConfig { seed: derive_seed(self.seed, "topics"), ..self.lda.clone() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.clean.validate()?;
        self.effective_lda().validate()?;
        self.crqa.params.validate()?;
        self.time_windows()?;
        if self.top_k == 0 {
            return Err(PipelineError::Config("top_k must be at least 1".into()));
        }
        if self.top_terms == 0 {
            return Err(PipelineError::Config("top_terms must be at least 1".into()));
        }
        if !(self.score.ratio_bin_width > 0.0 && self.score.ratio_max > 0.0) {
            return Err(PipelineError::Config("ratio histogram width and range must be positive".into()));
        }
        let labels: std::collections::BTreeSet<_> = self.windows.iter().map(|w| &w.label).collect();
        if labels.len() != self.windows.len() {
            return Err(PipelineError::Config("window labels must be unique".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub hash: String,
    pub records_in: usize,
    pub records_out: usize,
    pub wall_ms: u64,
    pub cache_hit: bool,
    /// Output path relative to the output directory, mapped to its SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: serde_json::Value,
    pub stages: BTreeMap<Stage, StageRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// What a stage hands back before anything is written.
pub(crate) struct StageOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub records_in: usize,
    pub records_out: usize,
}

pub struct Pipeline {
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out_dir
    }

    pub fn artifact(&self, rel: &str) -> PathBuf {
        self.config.out_dir.join(rel)
    }

    pub fn load_manifest(&self) -> Result<RunManifest, PipelineError> {
        let path = self.artifact(MANIFEST_FILE);
        if !path.exists() {
            return Ok(RunManifest::default());
        }
        io::read_json(&path)
    }

    /// Runs one stage, or skips it when cached outputs are current.
    pub fn run_stage(&self, stage: Stage) -> Result<StageRecord, PipelineError> {
        let started = Instant::now();
        let mut manifest = self.load_manifest()?;
        let hash = self.stage_hash(stage)?;
        if let Some(prev) = manifest.stages.get(&stage) {
            if prev.hash == hash && self.outputs_intact(prev) {
                log::info!("{stage}: up to date, skipping");
                let mut rec = prev.clone();
                rec.cache_hit = true;
                rec.wall_ms = started.elapsed().as_millis() as u64;
                manifest.stages.insert(stage, rec.clone());
                self.save_manifest(&mut manifest)?;
                return Ok(rec);
            }
        }
        log::info!("{stage}: running");
        let out = stages::run(self, stage)?;
        let mut outputs = BTreeMap::new();
        for (rel, bytes) in &out.files {
            io::write_atomic(&self.artifact(rel), bytes)?;
            outputs.insert(rel.clone(), sha256_hex(bytes));
        }
        if let Some(prev) = manifest.stages.get(&stage) {
            for stale in prev.outputs.keys().filter(|k| !outputs.contains_key(*k)) {
                let _ = std::fs::remove_file(self.artifact(stale));
            }
        }
        let rec = StageRecord {
            hash,
            records_in: out.records_in,
            records_out: out.records_out,
            wall_ms: started.elapsed().as_millis() as u64,
            cache_hit: false,
            outputs,
        };
        manifest.stages.insert(stage, rec.clone());
        self.save_manifest(&mut manifest)?;
        Ok(rec)
    }

    pub fn run_all(&self) -> Result<RunManifest, PipelineError> {
        for stage in Stage::ALL {
            self.run_stage(stage)?;
        }
        self.load_manifest()
    }

    fn save_manifest(&self, manifest: &mut RunManifest) -> Result<(), PipelineError> {
        manifest.config = serde_json::to_value(&self.config).expect("config serializes");
        io::write_atomic(&self.artifact(MANIFEST_FILE), &io::json_bytes(manifest))
    }

    fn outputs_intact(&self, rec: &StageRecord) -> bool {
        rec.outputs.iter().all(|(rel, sha)| {
            io::file_sha256(&self.artifact(rel)).map(|s| &s == sha).unwrap_or(false)
        })
    }

    /// Returns the path of an upstream artifact or the error naming the
    /// stage that produces it.
    pub(crate) fn upstream(&self, stage: Stage, rel: &str) -> Result<PathBuf, PipelineError> {
        let path = self.artifact(rel);
        if path.is_file() {
            Ok(path)
        } else {
            Err(PipelineError::MissingUpstream { stage, artifact: rel.to_string() })
        }
    }

    fn stage_hash(&self, stage: Stage) -> Result<String, PipelineError> {
        let (params, inputs) = stages::signature(self, stage)?;
        let mut h = Sha256::new();
        h.update(stage.name().as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(&params).expect("params serialize"));
        for (label, sha) in inputs {
            h.update([0]);
            h.update(label.as_bytes());
            h.update(sha.as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    }
}
