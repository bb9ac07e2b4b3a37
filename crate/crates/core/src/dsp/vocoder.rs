use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::stft::pad_for_interior;
use super::{Spectrogram, StftConfig, StftPlan};
use crate::audio::AudioClip;
use crate::error::{Error, Result};

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * ((p + PI) / (2.0 * PI)).floor()
}

/// Time-stretches `clip` so its duration is multiplied by `factor` while
/// keeping pitch, using per-bin phase propagation.
///
/// The output has exactly `round(len * factor)` samples.
pub fn phase_vocoder_stretch(clip: &AudioClip, factor: f64) -> Result<AudioClip> {
    phase_vocoder_stretch_with(clip, factor, StftConfig::distortion_default())
}

pub fn phase_vocoder_stretch_with(clip: &AudioClip, factor: f64, config: StftConfig) -> Result<AudioClip> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::Argument(format!("stretch factor must be positive, got {factor}")));
    }
    let out_len = (clip.len() as f64 * factor).round() as usize;
    if clip.is_empty() {
        return Ok(AudioClip::silence(out_len, clip.sample_rate()));
    }

    let hop = config.hop_length();
    let taper = config.window_length() - hop;
    // Lead padding large enough that the stretched taper region precedes
    // the stretched signal start.
    let lead = (taper as f64 / factor.min(1.0)).ceil() as usize;
    // Extra tail so the last output hop is not tapered.
    let mut src = clip.samples().to_vec();
    src.resize(src.len() + (2.0 * hop as f64 / factor).ceil() as usize, 0.0);
    let (padded, lead) = pad_for_interior(&src, config, lead);
    let plan = StftPlan::new(config);
    let spec = plan.forward(&padded, clip.sample_rate())?;

    let frames = spec.frames();
    let bins = config.bins();
    let mag = spec.magnitude();
    let phase = spec.phase();
    let advance: Vec<f64> = (0..bins)
        .map(|k| 2.0 * PI * k as f64 * hop as f64 / config.fft_length() as f64)
        .collect();

    let steps = ((frames - 1) as f64 * factor).floor() as usize + 1;
    let mut acc: Vec<f64> = phase[..bins].to_vec();
    let mut data = Vec::with_capacity(steps * bins);
    for s in 0..steps {
        let pos = s as f64 / factor;
        let i = (pos.floor() as usize).min(frames - 1);
        let j = (i + 1).min(frames - 1);
        let frac = pos - i as f64;
        for k in 0..bins {
            let m = (1.0 - frac) * mag[i * bins + k] + frac * mag[j * bins + k];
            data.push(Complex64::from_polar(m, acc[k]));
            let dphi = phase[j * bins + k] - phase[i * bins + k] - advance[k];
            acc[k] += advance[k] + wrap_phase(dphi);
        }
    }
    let stretched = Spectrogram::new(data, steps, config, clip.sample_rate())?;
    let y = plan.inverse(&stretched)?;

    let start = (lead as f64 * factor).round() as usize;
    let mut out: Vec<f64> = y.iter().skip(start).take(out_len).copied().collect();
    out.resize(out_len, 0.0);
    Ok(AudioClip::from_parts_unchecked(out, clip.sample_rate()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    fn sine(freq: f64, len: usize) -> AudioClip {
        AudioClip::new(
            (0..len).map(|i| (2.0 * PI * freq * i as f64 / 16000.0).sin()).collect(),
            16000,
        )
        .unwrap()
    }

    /// Dominant frequency (Hz) and bin width over an FFT of the whole signal.
    fn peak_hz(x: &[f64]) -> (f64, f64) {
        let mut buf: Vec<Complex64> = x.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let k = (1..buf.len() / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        let width = 16000.0 / x.len() as f64;
        (k as f64 * width, width)
    }

    #[test]
    fn unit_factor_is_identity() {
        let x = sine(440.0, 16000);
        let y = phase_vocoder_stretch(&x, 1.0).unwrap();
        assert_eq!(y.len(), x.len());
        let err = x.samples().iter().zip(y.samples()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn doubling_keeps_pitch() {
        let x = sine(440.0, 16000);
        let y = phase_vocoder_stretch(&x, 2.0).unwrap();
        assert_eq!(y.len(), 32000);
        let (hz, width) = peak_hz(y.samples());
        assert!((hz - 440.0).abs() <= width, "peak {hz}");
    }

    #[test]
    fn halving_five_seconds() {
        let x = sine(300.0, 80000);
        let y = phase_vocoder_stretch(&x, 0.5).unwrap();
        assert_eq!(y.duration(), 2.5);
        let (hz, width) = peak_hz(y.samples());
        assert!((hz - 300.0).abs() <= width);
    }

    #[test]
    fn table_grid_lengths_and_pitch() {
        let x = sine(523.0, 16000);
        for f in [0.1, 0.2, 0.5, 0.8, 0.95, 0.99, 1.01, 1.05, 1.2, 1.5, 2.0, 3.0, 5.0] {
            let y = phase_vocoder_stretch(&x, f).unwrap();
            let expect = (16000.0 * f).round() as usize;
            assert_eq!(y.len(), expect, "factor {f}");
            let (hz, width) = peak_hz(y.samples());
            // Short outputs have wide bins; allow one bin either side.
            assert!((hz - 523.0).abs() <= width.max(16000.0 / 1024.0), "factor {f}: {hz}");
        }
    }

    #[test]
    fn rejects_non_positive() {
        let x = sine(440.0, 1000);
        assert!(phase_vocoder_stretch(&x, 0.0).is_err());
        assert!(phase_vocoder_stretch(&x, -1.0).is_err());
    }
}
