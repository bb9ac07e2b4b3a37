use rayon::prelude::*;

use crate::audio::{load_for_analysis, AudioClip, CorpusManifest, ManifestEntry};
use crate::dsp::{LogMelFrontend, LogMelPatch};
use crate::error::{Error, Result};

/// One embedding vector and the window it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub clip_id: String,
    /// Window start within the clip, in seconds.
    pub window_start: f64,
}

/// Maps a log-mel patch to a fixed-length embedding vector.
pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, patch: &LogMelPatch) -> Result<Vec<f64>>;
}

/// Per-band mean followed by per-band population standard deviation over
/// the patch frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct PatchStatsBackend;

pub const PATCH_STATS_ID: &str = "patch-stats";

pub fn patch_stats_backend() -> PatchStatsBackend {
    PatchStatsBackend
}

impl EmbeddingBackend for PatchStatsBackend {
    fn id(&self) -> &str {
        PATCH_STATS_ID
    }

    fn dimension(&self) -> usize {
        128
    }

    fn embed(&self, patch: &LogMelPatch) -> Result<Vec<f64>> {
        if patch.bands() != 64 || patch.frames() == 0 {
            return Err(Error::Argument(format!(
                "patch-stats expects 64 bands and at least one frame, got {}x{}",
                patch.frames(),
                patch.bands()
            )));
        }
        let n = patch.frames() as f64;
        let mut out = vec![0.0; 128];
        for b in 0..64 {
            let mean = (0..patch.frames()).map(|t| patch.get(t, b)).sum::<f64>() / n;
            let var = (0..patch.frames()).map(|t| (patch.get(t, b) - mean).powi(2)).sum::<f64>() / n;
            out[b] = mean;
            out[64 + b] = var.sqrt();
        }
        Ok(out)
    }
}

/// Sliding 1 s analysis windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowingPolicy {
    window_seconds: f64,
    step_seconds: f64,
}

impl Default for WindowingPolicy {
    fn default() -> Self {
        Self {
            window_seconds: 1.0,
            step_seconds: 0.5,
        }
    }
}

impl WindowingPolicy {
    pub fn new(step_seconds: f64) -> Result<Self> {
        if !(step_seconds > 0.0 && step_seconds <= 1.0) {
            return Err(Error::Argument(format!("step must lie in (0, 1] s, got {step_seconds}")));
        }
        Ok(Self {
            window_seconds: 1.0,
            step_seconds,
        })
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_seconds
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds
    }

    /// Number of full windows in a clip of `len` samples, or 0 if none fit.
    pub fn window_count(&self, len: usize, sample_rate: u32) -> usize {
        let rate = f64::from(sample_rate);
        let window = (self.window_seconds * rate).round() as usize;
        if len < window {
            return 0;
        }
        let step = self.step_seconds * rate;
        // Tolerance keeps exact multiples from flooring one short.
        ((len - window) as f64 / step + 1e-9).floor() as usize + 1
    }

    fn window_start_sample(&self, i: usize, sample_rate: u32) -> usize {
        (i as f64 * self.step_seconds * f64::from(sample_rate)).round() as usize
    }
}

/// Log-mel patches for every full window of the clip.
pub fn extract_windows(clip: &AudioClip, policy: &WindowingPolicy, frontend: &LogMelFrontend) -> Result<Vec<LogMelPatch>> {
    let rate = clip.sample_rate();
    let count = policy.window_count(clip.len(), rate);
    if count == 0 {
        return Err(Error::InsufficientInput(format!(
            "clip of {:.3} s is shorter than one {} s window",
            clip.duration(),
            policy.window_seconds()
        )));
    }
    let cfg = frontend.config();
    let window = (policy.window_seconds() * f64::from(rate)).round() as usize;
    let need = cfg.patch_frames;
    let bands = cfg.n_mels;
    // Frames of the whole clip are reused for windows starting on a hop
    // boundary; each frame only depends on its own samples.
    let all_frames = frontend.frames(clip)?;
    (0..count)
        .map(|i| {
            let start = policy.window_start_sample(i, rate);
            let start_time = start as f64 / f64::from(rate);
            if start.is_multiple_of(cfg.hop_length) {
                let first = start / cfg.hop_length;
                let frames_in_window = (window - cfg.window_length) / cfg.hop_length + 1;
                if frames_in_window >= need && first + need <= all_frames.len() {
                    let values = all_frames[first..first + need].iter().flatten().copied().collect();
                    return LogMelPatch::new(values, need, bands, start_time);
                }
            }
            let piece = AudioClip::from_parts_unchecked(clip.samples()[start..start + window].to_vec(), rate);
            frontend.patch(&piece, start_time)
        })
        .collect()
}

/// Embeds every window of one clip.
pub fn embed_clip(
    clip_id: &str,
    clip: &AudioClip,
    backend: &dyn EmbeddingBackend,
    policy: &WindowingPolicy,
    frontend: &LogMelFrontend,
) -> Result<Vec<Embedding>> {
    extract_windows(clip, policy, frontend)?
        .into_iter()
        .map(|patch| {
            let values = backend.embed(&patch)?;
            if values.len() != backend.dimension() || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Argument(format!(
                    "backend {} produced an invalid embedding for {clip_id}",
                    backend.id()
                )));
            }
            Ok(Embedding {
                values,
                clip_id: clip_id.to_string(),
                window_start: patch.start_time,
            })
        })
        .collect()
}

/// Embeds in-memory clips in parallel; the result is ordered by clip id and
/// window start regardless of scheduling.
pub fn embed_clips(
    clips: &[(String, AudioClip)],
    backend: &dyn EmbeddingBackend,
    policy: &WindowingPolicy,
    frontend: &LogMelFrontend,
) -> Result<Vec<Embedding>> {
    let per_clip: Vec<Vec<Embedding>> = clips
        .par_iter()
        .map(|(id, clip)| embed_clip(id, clip, backend, policy, frontend))
        .collect::<Result<_>>()?;
    let mut out: Vec<Embedding> = per_clip.into_iter().flatten().collect();
    sort_embeddings(&mut out);
    Ok(out)
}

pub(crate) fn sort_embeddings(e: &mut [Embedding]) {
    e.sort_by(|a, b| a.clip_id.cmp(&b.clip_id).then(a.window_start.total_cmp(&b.window_start)));
}

/// Embeddings of a manifest plus the clips that could not be processed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusEmbeddings {
    pub embeddings: Vec<Embedding>,
    /// `(clip_id, error message)` for skipped clips.
    pub failures: Vec<(String, String)>,
}

/// Loads and embeds every manifest entry. Unreadable or too-short clips
/// are skipped and listed in `failures`.
pub fn embed_corpus(
    manifest: &CorpusManifest,
    backend: &dyn EmbeddingBackend,
    policy: &WindowingPolicy,
    frontend: &LogMelFrontend,
) -> CorpusEmbeddings {
    embed_entries(manifest.entries(), backend, policy, frontend)
}

fn embed_entries(
    entries: &[ManifestEntry],
    backend: &dyn EmbeddingBackend,
    policy: &WindowingPolicy,
    frontend: &LogMelFrontend,
) -> CorpusEmbeddings {
    let results: Vec<(String, Result<Vec<Embedding>>)> = entries
        .par_iter()
        .map(|e| {
            let r = load_for_analysis(&e.path).and_then(|clip| embed_clip(&e.clip_id, &clip, backend, policy, frontend));
            (e.clip_id.clone(), r)
        })
        .collect();
    let mut out = CorpusEmbeddings::default();
    for (id, r) in results {
        match r {
            Ok(v) => out.embeddings.extend(v),
            Err(e) => out.failures.push((id, e.to_string())),
        }
    }
    sort_embeddings(&mut out.embeddings);
    out.failures.sort();
    out
}
