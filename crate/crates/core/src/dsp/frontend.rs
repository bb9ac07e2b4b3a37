use std::path::Path;

use super::{MelFilterbank, StftConfig, StftPlan};
use crate::audio::{AudioClip, CANONICAL_RATE};
use crate::error::{Error, Result};

/// Log-mel feature extraction parameters.
///
/// Defaults: 25 ms window, 10 ms hop, 512-point FFT, 64 mel bands over
/// 125-7500 Hz, `log(mel + 0.01)`, 96-frame patches.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendConfig {
    pub sample_rate: u32,
    pub window_length: usize,
    pub hop_length: usize,
    pub fft_length: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_offset: f64,
    pub patch_frames: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: CANONICAL_RATE,
            window_length: 400,
            hop_length: 160,
            fft_length: 512,
            n_mels: 64,
            f_min: 125.0,
            f_max: 7500.0,
            log_offset: 0.01,
            patch_frames: 96,
        }
    }
}

impl FrontendConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        fn parse_value<T: std::str::FromStr>(key: &str, value: &str, lineno: usize) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Argument(format!("line {lineno}: bad value for {key}")))
        }

        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Argument(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let n = lineno + 1;
            match key {
                "sample_rate" => cfg.sample_rate = parse_value(key, value, n)?,
                "window_length" => cfg.window_length = parse_value(key, value, n)?,
                "hop_length" => cfg.hop_length = parse_value(key, value, n)?,
                "fft_length" => cfg.fft_length = parse_value(key, value, n)?,
                "n_mels" => cfg.n_mels = parse_value(key, value, n)?,
                "patch_frames" => cfg.patch_frames = parse_value(key, value, n)?,
                "f_min" => cfg.f_min = parse_value(key, value, n)?,
                "f_max" => cfg.f_max = parse_value(key, value, n)?,
                "log_offset" => cfg.log_offset = parse_value(key, value, n)?,
                other => {
                    return Err(Error::Argument(format!(
                        "line {}: unknown frontend key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        if !(cfg.log_offset > 0.0) {
            return Err(Error::Argument("log_offset must be positive".into()));
        }
        if cfg.patch_frames == 0 {
            return Err(Error::Argument("patch_frames must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn stft_config(&self) -> Result<StftConfig> {
        StftConfig::new(self.window_length, self.hop_length, self.fft_length)
    }
}

/// A `frames x bands` block of log-mel features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelPatch {
    values: Vec<f64>,
    frames: usize,
    bands: usize,
    /// Offset of the first frame within the source clip, in seconds.
    pub start_time: f64,
}

impl LogMelPatch {
    pub fn new(values: Vec<f64>, frames: usize, bands: usize, start_time: f64) -> Result<Self> {
        if values.len() != frames * bands {
            return Err(Error::Argument(format!(
                "patch has {} values, expected {frames} x {bands}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            frames,
            bands,
            start_time,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, frame: usize, band: usize) -> f64 {
        self.values[frame * self.bands + band]
    }
}

/// Reusable log-mel extractor.
pub struct LogMelFrontend {
    config: FrontendConfig,
    plan: StftPlan,
    filterbank: MelFilterbank,
}

impl LogMelFrontend {
    pub fn new(config: FrontendConfig) -> Result<Self> {
        let stft = config.stft_config()?;
        let filterbank = MelFilterbank::new(
            config.n_mels,
            config.f_min,
            config.f_max,
            stft,
            config.sample_rate,
        )?;
        Ok(Self {
            plan: StftPlan::new(stft),
            config,
            filterbank,
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.config
    }

    /// Per-frame log-mel vectors for the clip.
    pub fn frames(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        if clip.sample_rate() != self.config.sample_rate {
            return Err(Error::Argument(format!(
                "frontend expects {} Hz audio, got {} Hz",
                self.config.sample_rate,
                clip.sample_rate()
            )));
        }
        let spec = self.plan.forward(clip.samples(), clip.sample_rate())?;
        let offset = self.config.log_offset;
        Ok((0..spec.frames())
            .map(|t| {
                let mag: Vec<f64> = spec.frame(t).iter().map(|c| c.norm()).collect();
                self.filterbank
                    .apply(&mag)
                    .into_iter()
                    .map(|m| (m + offset).ln())
                    .collect()
            })
            .collect())
    }

    /// The first `patch_frames` frames of `clip` as a patch.
    pub fn patch(&self, clip: &AudioClip, start_time: f64) -> Result<LogMelPatch> {
        let frames = self.frames(clip)?;
        let need = self.config.patch_frames;
        if frames.len() < need {
            return Err(Error::InsufficientInput(format!(
                "window yields {} frames, patch needs {need}",
                frames.len()
            )));
        }
        let values = frames.into_iter().take(need).flatten().collect();
        LogMelPatch::new(values, need, self.config.n_mels, start_time)
    }
}

/// Log-mel frames with the default configuration.
pub fn log_mel_frontend(clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
    LogMelFrontend::new(FrontendConfig::default())?.frames(clip)
}
