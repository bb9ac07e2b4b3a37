//! Audio clips, WAV I/O, resampling and corpus manifests.
//!
//! Everything downstream of ingestion runs on mono clips at
//! [`CANONICAL_RATE`]. [`load_for_analysis`] performs the full ingestion
//! chain: decode, downmix, resample, peak-normalize.

mod manifest;
mod resample;
mod wav;

use std::path::Path;

pub use manifest::{CorpusManifest, ManifestEntry, Role};
pub use resample::{resample, resample_by_ratio};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};

/// Sample rate used for every metric computation.
pub const CANONICAL_RATE: u32 = 16_000;

/// Mono PCM audio with amplitudes nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting a zero sample rate or non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Argument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Argument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// All-zero clip of `len` samples.
    pub fn silence(len: usize, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    /// Same clip with samples transformed by `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts_unchecked(self.samples.iter().map(|&s| f(s)).collect(), self.sample_rate)
    }

    /// Truncates or zero-pads at the tail to exactly `len` samples.
    pub fn fit_to_len(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self::from_parts_unchecked(samples, self.sample_rate)
    }
}

/// Scales the clip so its maximum absolute sample is exactly 1.
///
/// An all-zero clip is returned unchanged.
pub fn normalize_peak(clip: &AudioClip) -> AudioClip {
    let peak = clip.peak();
    if peak == 0.0 {
        return clip.clone();
    }
    let samples = clip
        .samples
        .iter()
        .map(|&s| (s / peak).clamp(-1.0, 1.0))
        .collect::<Vec<_>>();
    let mut out = AudioClip::from_parts_unchecked(samples, clip.sample_rate);
    // Division can land one ulp short of 1.0; pin the peak sample exactly.
    if let Some(i) = clip.samples.iter().position(|s| s.abs() == peak) {
        out.samples[i] = clip.samples[i].signum();
    }
    out
}

/// Splits a clip into consecutive non-overlapping segments of
/// `segment_seconds`, dropping any trailing remainder.
pub fn segment(clip: &AudioClip, segment_seconds: f64) -> Result<Vec<AudioClip>> {
    if !(segment_seconds > 0.0) || !segment_seconds.is_finite() {
        return Err(Error::Argument(format!(
            "segment length must be positive, got {segment_seconds}"
        )));
    }
    let seg_len = (segment_seconds * f64::from(clip.sample_rate)).round() as usize;
    if seg_len == 0 {
        return Err(Error::Argument(
            "segment shorter than one sample at this rate".into(),
        ));
    }
    Ok(clip
        .samples
        .chunks_exact(seg_len)
        .map(|c| AudioClip::from_parts_unchecked(c.to_vec(), clip.sample_rate))
        .collect())
}

/// Loads a WAV file and brings it to the canonical analysis format:
/// mono, [`CANONICAL_RATE`], peak-normalized.
pub fn load_for_analysis(path: impl AsRef<Path>) -> Result<AudioClip> {
    let clip = load_wav(path)?;
    let clip = if clip.sample_rate() == CANONICAL_RATE {
        clip
    } else {
        resample(&clip, CANONICAL_RATE)?
    };
    Ok(normalize_peak(&clip))
}
