use std::f64::consts::PI;
use std::sync::OnceLock;

use super::AudioClip;
use crate::error::{Error, Result};

/// Kernel half-width in zero crossings.
const HALF_WIDTH: usize = 32;
/// Table entries per zero crossing.
const OVERSAMPLE: usize = 4096;
const KAISER_BETA: f64 = 8.6;
/// Passband edge relative to the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.95;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc sampled on `[0, HALF_WIDTH]` zero crossings.
fn kernel_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = HALF_WIDTH * OVERSAMPLE;
        let norm = bessel_i0(KAISER_BETA);
        (0..=n + 1)
            .map(|i| {
                let u = i as f64 / OVERSAMPLE as f64;
                if u >= HALF_WIDTH as f64 {
                    return 0.0;
                }
                let sinc = if i == 0 { 1.0 } else { (PI * u).sin() / (PI * u) };
                let r = u / HALF_WIDTH as f64;
                sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
            })
            .collect()
    })
}

#[inline]
fn kernel(u: f64) -> f64 {
    let pos = u.abs() * OVERSAMPLE as f64;
    let i = pos as usize;
    let table = kernel_table();
    if i >= HALF_WIDTH * OVERSAMPLE {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] * (1.0 - frac) + table[i + 1] * frac
}

/// Band-limited interpolation of `input` onto a grid `ratio` times as
/// dense, producing exactly `out_len` samples.
///
/// Output sample `n` sits at input position `n / ratio`.
pub fn resample_by_ratio(input: &[f64], ratio: f64, out_len: usize) -> Vec<f64> {
    assert!(ratio > 0.0 && ratio.is_finite(), "ratio must be positive");
    let cutoff = ratio.min(1.0) * ROLLOFF;
    let reach = HALF_WIDTH as f64 / cutoff;
    let len = input.len() as isize;
    (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = ((t - reach).ceil() as isize).max(0);
            let hi = ((t + reach).floor() as isize).min(len - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                acc += input[k as usize] * kernel((t - k as f64) * cutoff);
            }
            acc * cutoff
        })
        .collect()
}

/// Resamples to `target_rate` with a windowed-sinc interpolator.
///
/// The output has `round(len * target_rate / rate)` samples; equal rates
/// return the clip unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::Argument("target rate must be positive".into()));
    }
    if target_rate == clip.sample_rate() {
        return Ok(clip.clone());
    }
    let ratio = f64::from(target_rate) / f64::from(clip.sample_rate());
    let out_len = (clip.len() as f64 * ratio).round() as usize;
    let samples = resample_by_ratio(clip.samples(), ratio, out_len);
    Ok(AudioClip::from_parts_unchecked(samples, target_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex64, FftPlanner};

    fn sine(freq: f64, rate: u32, len: usize) -> AudioClip {
        let samples = (0..len)
            .map(|i| (2.0 * PI * freq * i as f64 / f64::from(rate)).sin())
            .collect();
        AudioClip::new(samples, rate).unwrap()
    }

    fn peak_bin(samples: &[f64]) -> usize {
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        (0..buf.len() / 2)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap()
    }

    #[test]
    fn identity_rate() {
        let clip = sine(440.0, 16000, 1000);
        assert_eq!(resample(&clip, 16000).unwrap(), clip);
    }

    #[test]
    fn length_arithmetic() {
        let clip = AudioClip::silence(16000, 16000);
        assert_eq!(resample(&clip, 8000).unwrap().len(), 8000);
        assert_eq!(resample(&clip, 44100).unwrap().len(), 44100);
        assert!(resample(&clip, 0).is_err());
    }

    #[test]
    fn sine_peak_survives_downsampling() {
        let clip = sine(997.0, 48000, 48000);
        let out = resample(&clip, 16000).unwrap();
        assert_eq!(out.len(), 16000);
        // 1 s at 16 kHz: bins are 1 Hz wide.
        let bin = peak_bin(out.samples());
        assert!((bin as i64 - 997).abs() <= 1, "peak at {bin}");
    }

    #[test]
    fn upsampled_sine_matches_analytic() {
        let clip = sine(440.0, 16000, 16000);
        let out = resample(&clip, 48000).unwrap();
        let expect = sine(440.0, 48000, 48000);
        // Compare away from edges where the kernel is truncated.
        let err = out.samples()[3000..45000]
            .iter()
            .zip(&expect.samples()[3000..45000])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "max err {err}");
    }

    #[test]
    fn high_tone_is_removed_when_downsampling() {
        // 7 kHz is above the 4 kHz Nyquist of the target.
        let clip = sine(7000.0, 16000, 16000);
        let out = resample(&clip, 8000).unwrap();
        let rms = (out.samples()[500..7500].iter().map(|s| s * s).sum::<f64>() / 7000.0).sqrt();
        assert!(rms < 1e-3, "rms {rms}");
    }
}
