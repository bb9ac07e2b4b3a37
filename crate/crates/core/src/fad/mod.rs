//! Embedding extraction, Gaussian statistics and the Fréchet Audio Distance.
//!
//! The score compares a Gaussian fitted to embeddings of evaluation audio
//! with one fitted to embeddings of clean background audio.

mod embedding;
mod stats;
mod store;

pub use embedding::{
    embed_clip, embed_clips, embed_corpus, extract_windows, patch_stats_backend, CorpusEmbeddings, Embedding,
    EmbeddingBackend, PatchStatsBackend, WindowingPolicy, PATCH_STATS_ID,
};
pub use stats::{estimate_gaussian, fad_score, frechet_distance, GaussianStats};
pub use store::{decode_embeddings, encode_embeddings, save_embeddings, EmbeddingStore};


