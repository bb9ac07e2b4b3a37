//! Fréchet Audio Distance toolkit: audio ingestion, a log-mel frontend,
//! parametric distortions, signal metrics, Gaussian embedding statistics
//! and the ranking and stability analyses built on top of them.

pub mod audio;
pub mod distort;
pub mod dsp;
pub mod error;
pub mod fad;
pub mod metrics;
pub mod pipeline;
pub mod ranking;
pub mod report;
pub mod seed;
pub mod synth;

pub use audio::{AudioClip, CorpusManifest, ManifestEntry, Role, CANONICAL_RATE};
pub use distort::{DistortionSpec, Family, SweepGrid};
pub use dsp::{FrontendConfig, StftConfig};
pub use error::{Error, Result};
pub use fad::{Embedding, EmbeddingBackend, GaussianStats, PatchStatsBackend, WindowingPolicy};
pub use metrics::MetricReport;
pub use pipeline::{Corpus, PipelineConfig, PipelineRow};
pub use ranking::{PairwiseComparison, WorthVector};
