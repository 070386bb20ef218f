//! Pipeline configuration: one TOML file with a flat table per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{CommunityParams, DensityParams, Reducer};
use crate::corpus::CorpusFormat;
use crate::docembed::EmbedParams;
use crate::dynembed::WalkParams;
use crate::emergence::{DetectMode, DetectionParams, DocSetSource, Search};
use crate::error::{AtemError, Result};
use crate::evaluation::ProtocolParams;
use crate::par::Execution;
use crate::seed;
use crate::synth::SynthSpec;
use crate::topics::RepKind;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub citations: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
    /// Precomputed document vectors; replaces the built-in embedder.
    pub doc_embeddings: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub window_years: i32,
    pub overlap_years: i32,
    pub min_year: Option<i32>,
    pub max_year: Option<i32>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            window_years: 1,
            overlap_years: 0,
            min_year: None,
            max_year: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f32,
    pub min_token_count: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        let p = EmbedParams::default();
        EmbedConfig {
            dim: p.dim,
            epochs: p.epochs,
            window: p.window,
            negatives: p.negatives,
            learning_rate: p.learning_rate,
            min_token_count: p.min_token_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub reducer: Reducer,
    pub reduce_dim: usize,
    pub min_cluster_size: usize,
    pub eps_quantile: f64,
    pub k_core: usize,
    pub eps: Option<f64>,
    pub resolution: f64,
    pub passes: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let d = DensityParams::default();
        let c = CommunityParams::default();
        ClusterConfig {
            reducer: Reducer::Pca,
            reduce_dim: 16,
            min_cluster_size: d.min_cluster_size,
            eps_quantile: d.eps_quantile,
            k_core: d.k_core,
            eps: d.eps,
            resolution: c.resolution,
            passes: c.passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    pub min_docs: usize,
    pub top_n: usize,
    pub representation: RepKind,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        TopicsConfig {
            min_docs: 3,
            top_n: 10,
            representation: RepKind::Ctfidf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynembedConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub half_life_periods: f64,
    pub dim: usize,
    pub epochs_per_period: usize,
    pub negatives: usize,
    pub learning_rate: f32,
    pub include_self_loops: bool,
}

impl Default for DynembedConfig {
    fn default() -> Self {
        let p = WalkParams::default();
        DynembedConfig {
            walks_per_node: p.walks_per_node,
            walk_length: p.walk_length,
            half_life_periods: p.half_life_periods,
            dim: p.dim,
            epochs_per_period: p.epochs_per_period,
            negatives: p.negatives,
            learning_rate: p.learning_rate,
            include_self_loops: p.include_self_loops,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocSetKind {
    #[default]
    Query,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub mode: DetectMode,
    pub search: Search,
    pub k: usize,
    pub max_distance: f64,
    pub min_norm: f64,
    pub min_set_size: usize,
    pub doc_sets: DocSetKind,
    pub min_hits: usize,
    pub profile_terms: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        let p = DetectionParams::default();
        DetectConfig {
            mode: p.mode,
            search: p.search,
            k: p.k,
            max_distance: p.max_distance,
            min_norm: p.min_norm,
            min_set_size: p.min_set_size,
            doc_sets: DocSetKind::Query,
            min_hits: 2,
            profile_terms: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub sample_size: usize,
    pub k: usize,
    pub max_path_len: usize,
    pub bootstrap_iterations: usize,
    pub confidence: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let p = ProtocolParams::default();
        EvalConfig {
            sample_size: p.sample_size,
            k: p.k,
            max_path_len: p.max_path_len,
            bootstrap_iterations: p.bootstrap_iterations,
            confidence: p.confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub deterministic: bool,
    pub paths: Paths,
    pub ingest: IngestConfig,
    pub embed: EmbedConfig,
    pub cluster: ClusterConfig,
    pub topics: TopicsConfig,
    pub dynembed: DynembedConfig,
    pub detect: DetectConfig,
    pub eval: EvalConfig,
    pub synth: Option<SynthSpec>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            deterministic: false,
            paths: Paths::default(),
            ingest: IngestConfig::default(),
            embed: EmbedConfig::default(),
            cluster: ClusterConfig::default(),
            topics: TopicsConfig::default(),
            dynembed: DynembedConfig::default(),
            detect: DetectConfig::default(),
            eval: EvalConfig::default(),
            synth: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AtemError::InvalidParam(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AtemError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn execution(&self) -> Execution {
        if self.deterministic {
            Execution::Deterministic
        } else {
            Execution::Parallel
        }
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive_str(self.seed, stage)
    }

    pub fn embed_params(&self) -> EmbedParams {
        let e = &self.embed;
        EmbedParams {
            dim: e.dim,
            epochs: e.epochs,
            window: e.window,
            negatives: e.negatives,
            learning_rate: e.learning_rate,
            min_token_count: e.min_token_count,
            seed: self.stage_seed("embed"),
            execution: self.execution(),
        }
    }

    pub fn density_params(&self) -> DensityParams {
        DensityParams {
            min_cluster_size: self.cluster.min_cluster_size,
            eps_quantile: self.cluster.eps_quantile,
            k_core: self.cluster.k_core,
            eps: self.cluster.eps,
        }
    }

    pub fn community_params(&self) -> CommunityParams {
        CommunityParams {
            resolution: self.cluster.resolution,
            passes: self.cluster.passes,
            seed: self.stage_seed("cluster"),
        }
    }

    pub fn walk_params(&self) -> WalkParams {
        let d = &self.dynembed;
        WalkParams {
            walks_per_node: d.walks_per_node,
            walk_length: d.walk_length,
            half_life_periods: d.half_life_periods,
            dim: d.dim,
            epochs_per_period: d.epochs_per_period,
            negatives: d.negatives,
            learning_rate: d.learning_rate,
            seed: self.stage_seed("dynembed"),
            include_self_loops: d.include_self_loops,
            execution: self.execution(),
        }
    }

    pub fn detection_params(&self) -> DetectionParams {
        let d = &self.detect;
        DetectionParams {
            k: d.k,
            max_distance: d.max_distance,
            min_norm: d.min_norm,
            mode: d.mode,
            search: d.search,
            min_set_size: d.min_set_size,
            seed: self.stage_seed("detect"),
            execution: self.execution(),
        }
    }

    pub fn doc_set_source(&self) -> DocSetSource {
        match self.detect.doc_sets {
            DocSetKind::Cluster => DocSetSource::Cluster,
            DocSetKind::Query => DocSetSource::Query {
                min_hits: self.detect.min_hits,
                profile_terms: self.detect.profile_terms,
            },
        }
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        let e = &self.eval;
        ProtocolParams {
            sample_size: e.sample_size,
            k: e.k,
            max_path_len: e.max_path_len,
            bootstrap_iterations: e.bootstrap_iterations,
            confidence: e.confidence,
            seed: self.stage_seed("eval"),
            execution: self.execution(),
        }
    }

    /// Check every stage's parameter invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AtemError::InvalidParam(m.into()));
        if self.ingest.window_years < 1 || self.ingest.overlap_years < 0 || self.ingest.overlap_years >= self.ingest.window_years {
            return bad("ingest needs window_years >= 1 and 0 <= overlap_years < window_years");
        }
        self.embed_params().validate()?;
        if self.cluster.reduce_dim == 0 || self.cluster.min_cluster_size == 0 || self.cluster.k_core == 0 {
            return bad("cluster reduce_dim, min_cluster_size and k_core must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.cluster.eps_quantile) {
            return bad("cluster eps_quantile must lie in [0, 1]");
        }
        if !(self.cluster.resolution > 0.0) {
            return bad("cluster resolution must be > 0");
        }
        if self.topics.top_n == 0 {
            return bad("topics top_n must be >= 1");
        }
        self.walk_params().validate()?;
        self.detection_params().validate()?;
        self.protocol_params().validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }
}
