use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioClip;
use crate::error::{Error, Result};

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        // The file is already open, so read failures mean short or corrupt data.
        hound::Error::IoError(e) => Error::Format(format!("{}: {e}", path.display())),
        hound::Error::Unsupported => {
            Error::UnsupportedCodec(format!("{}: not PCM integer or IEEE float", path.display()))
        }
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

fn map_write(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Format tag of the first `fmt ` chunk, if the RIFF structure gets that far.
fn format_tag(bytes: &[u8]) -> Option<u16> {
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return None;
    }
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().ok()?) as usize;
        if id == b"fmt " {
            return bytes.get(pos + 8..pos + 10).map(|t| u16::from_le_bytes([t[0], t[1]]));
        }
        pos = pos.checked_add(8 + size + (size & 1))?;
    }
    None
}

/// Reads a PCM WAV file (8/16/24/32-bit integer or 32-bit float).
///
/// Integer samples are scaled by `2^(bits-1)`; multichannel frames are
/// averaged to mono. The file's sample rate is preserved.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if let Some(tag) = format_tag(&bytes).filter(|t| ![1, 3, 0xFFFE].contains(t)) {
        return Err(Error::UnsupportedCodec(format!("{}: format tag {tag:#06x}", path.display())));
    }
    let reader = WavReader::new(std::io::Cursor::new(bytes)).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(Error::Format(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Float, bits) => {
            return Err(Error::UnsupportedCodec(format!(
                "{}: {bits}-bit float",
                path.display()
            )))
        }
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 2f64.powi(i32::from(bits) - 1);
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (SampleFormat::Int, bits) => {
            return Err(Error::UnsupportedCodec(format!(
                "{}: {bits}-bit integer",
                path.display()
            )))
        }
    };

    let channels = usize::from(spec.channels);
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioClip::new(mono, spec.sample_rate).map_err(|e| Error::Format(e.to_string()))
}

/// Writes a clip as mono 16-bit little-endian PCM.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_write(path, e))?;
    for &s in clip.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_write(path, e))?;
    }
    writer.finalize().map_err(|e| map_write(path, e))
}
