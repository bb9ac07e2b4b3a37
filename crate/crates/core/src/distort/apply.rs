use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DistortionSpec, Family};
use crate::audio::{normalize_peak, resample_by_ratio, AudioClip};
use crate::dsp::{
    butterworth_filter, griffin_lim, pad_for_interior, phase_vocoder_stretch, FilterKind, MelFilterbank,
    PhaseInit, Spectrogram, StftConfig, StftPlan, DEFAULT_ORDER,
};
use crate::error::{Error, Result};

/// Frequency range of the wide mel variant; the upper edge is capped at
/// the Nyquist frequency of the clip.
pub const MEL_WIDE_RANGE: (f64, f64) = (0.0, 16000.0);
pub const MEL_NARROW_RANGE: (f64, f64) = (60.0, 6000.0);

/// Applies one distortion to a peak-normalized copy of `clip` and
/// peak-normalizes the result.
///
/// The output is fully determined by the clip samples and `spec`,
/// including its seed.
pub fn apply_distortion(clip: &AudioClip, spec: &DistortionSpec) -> Result<AudioClip> {
    let x = normalize_peak(clip);
    let rate = x.sample_rate();
    let p = |k: &str| spec.param(k);
    let out = match spec.family() {
        Family::GaussianNoise => gaussian_noise(&x, p("stddev"), spec.seed)?,
        Family::Pops => pops(&x, p("percentage"), spec.seed),
        Family::Lowpass => butterworth_filter(&x, FilterKind::Lowpass, p("critical_freq"), DEFAULT_ORDER)?,
        Family::Highpass => butterworth_filter(&x, FilterKind::Highpass, p("critical_freq"), DEFAULT_ORDER)?,
        Family::Quantization => quantize(&x, p("bits") as u32),
        Family::GriffinLim => reconstruct_phase(&x, p("iterations") as usize, PhaseInit::Random, spec.seed)?,
        Family::GriffinLimZero => reconstruct_phase(&x, p("iterations") as usize, PhaseInit::Zero, spec.seed)?,
        Family::MelWide => mel_encode(&x, p("num_bands") as usize, MEL_WIDE_RANGE)?,
        Family::MelNarrow => mel_encode(&x, p("num_bands") as usize, MEL_NARROW_RANGE)?,
        Family::Speed => {
            let f = p("factor");
            let len = (x.len() as f64 * f).round() as usize;
            AudioClip::from_parts_unchecked(resample_by_ratio(x.samples(), f, len), rate)
        }
        Family::SpeedPp => phase_vocoder_stretch(&x, p("factor"))?,
        Family::Pitch => pitch_shift(&x, p("semitones"))?,
        Family::Reverb => reverb(&x, p("dampening"), p("delay"), p("echos") as usize),
    };
    Ok(normalize_peak(&out))
}

fn gaussian_noise(x: &AudioClip, stddev: f64, seed: u64) -> Result<AudioClip> {
    if stddev == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, stddev).map_err(|e| Error::Spec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = x.samples().iter().map(|s| s + normal.sample(&mut rng)).collect();
    Ok(AudioClip::from_parts_unchecked(samples, x.sample_rate()))
}

/// Replaces `round(percentage / 100 * len)` uniformly chosen samples, half
/// with -1 and half with +1; an odd count gives the extra sample to +1.
pub fn pops(clip: &AudioClip, percentage: f64, seed: u64) -> AudioClip {
    let n = clip.len();
    let count = ((percentage / 100.0 * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, n, count);
    let mut samples = clip.samples().to_vec();
    for (j, i) in picked.into_iter().enumerate() {
        samples[i] = if j < count / 2 { -1.0 } else { 1.0 };
    }
    AudioClip::from_parts_unchecked(samples, clip.sample_rate())
}

/// Uniform mid-rise quantizer to `bits` bits over [-1, 1).
pub fn quantize(clip: &AudioClip, bits: u32) -> AudioClip {
    let scale = 2f64.powi(bits as i32 - 1);
    let top = 1.0 - 1.0 / scale;
    clip.map(|s| ((s * scale).round() / scale).clamp(-1.0, top))
}

/// `y[t] = x[t] + sum_{k=1..echos} dampening^k x[t - k * delay]`, with
/// `delay` in seconds; the output keeps the input length.
pub fn reverb(clip: &AudioClip, dampening: f64, delay: f64, echos: usize) -> AudioClip {
    let x = clip.samples();
    let shift = (delay * f64::from(clip.sample_rate())).round() as usize;
    let mut y = x.to_vec();
    let mut gain = 1.0;
    for k in 1..=echos {
        gain *= dampening;
        let offset = k * shift;
        if offset >= x.len() || gain == 0.0 {
            continue;
        }
        for (out, &src) in y[offset..].iter_mut().zip(x) {
            *out += gain * src;
        }
    }
    AudioClip::from_parts_unchecked(y, clip.sample_rate())
}

/// Analyses `x` with the distortion STFT, padded so the whole clip lies in
/// the fully overlapped region.
fn padded_spectrogram(x: &AudioClip, plan: &StftPlan) -> Result<(Spectrogram, usize)> {
    let config = plan.config();
    let lead = config.window_length() - config.hop_length();
    let (padded, lead) = pad_for_interior(x.samples(), config, lead);
    Ok((plan.forward(&padded, x.sample_rate())?, lead))
}

fn crop(samples: &[f64], lead: usize, len: usize, rate: u32) -> AudioClip {
    let mut out: Vec<f64> = samples.iter().skip(lead).take(len).copied().collect();
    out.resize(len, 0.0);
    AudioClip::from_parts_unchecked(out, rate)
}

fn reconstruct_phase(x: &AudioClip, iterations: usize, init: PhaseInit, seed: u64) -> Result<AudioClip> {
    let config = StftConfig::distortion_default();
    let plan = StftPlan::new(config);
    let (spec, lead) = padded_spectrogram(x, &plan)?;
    let y = griffin_lim(&spec.magnitude(), spec.frames(), config, x.sample_rate(), iterations, init, seed)?;
    Ok(crop(y.samples(), lead, x.len(), x.sample_rate()))
}

/// Projects the magnitude spectrogram onto `num_bands` mel bands over
/// `range` Hz, maps it back with the Moore-Penrose pseudo-inverse, clamps
/// negative magnitudes and resynthesizes with the original phase.
pub fn mel_encode(x: &AudioClip, num_bands: usize, range: (f64, f64)) -> Result<AudioClip> {
    let config = StftConfig::distortion_default();
    let rate = x.sample_rate();
    let f_max = range.1.min(f64::from(rate) / 2.0);
    let fb = MelFilterbank::new(num_bands, range.0, f_max, config, rate)?;
    let bins = config.bins();
    let m = DMatrix::from_row_slice(num_bands, bins, fb.weights());
    let svd = m.clone().svd(true, true);
    let tol = svd.singular_values.max() * bins.max(num_bands) as f64 * f64::EPSILON;
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::Undefined(format!("mel pseudo-inverse failed: {e}")))?;
    let projector = pinv * m;

    let plan = StftPlan::new(config);
    let (spec, lead) = padded_spectrogram(x, &plan)?;
    let frames = spec.frames();
    // Columns are frames.
    let mag = DMatrix::from_column_slice(bins, frames, &spec.magnitude());
    let back = projector * mag;
    let phase = spec.phase();
    let magnitude: Vec<f64> = back.as_slice().iter().map(|v| v.max(0.0)).collect();
    let rebuilt = Spectrogram::from_polar(&magnitude, &phase, frames, config, rate)?;
    let y = plan.inverse(&rebuilt)?;
    Ok(crop(&y, lead, x.len(), rate))
}

/// Raises pitch by `semitones` (negative lowers it) at constant duration:
/// resample to change pitch, then phase-vocoder stretch back to length.
fn pitch_shift(x: &AudioClip, semitones: f64) -> Result<AudioClip> {
    if x.is_empty() {
        return Ok(x.clone());
    }
    let shift = 2f64.powf(semitones / 12.0);
    let len = ((x.len() as f64 / shift).round() as usize).max(1);
    let moved = AudioClip::from_parts_unchecked(resample_by_ratio(x.samples(), 1.0 / shift, len), x.sample_rate());
    let stretched = phase_vocoder_stretch(&moved, x.len() as f64 / len as f64)?;
    Ok(stretched.fit_to_len(x.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rustfft::{num_complex::Complex64, FftPlanner};
    use std::collections::HashSet;
    use std::f64::consts::PI;

    fn music(len: usize, seed: u64) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..3).map(|_| rng.random_range(150.0..2500.0)).collect();
        let samples = (0..len)
            .map(|i| {
                let t = i as f64 / 16000.0;
                f.iter().map(|fr| (2.0 * PI * fr * t).sin()).sum::<f64>() / 3.0 + 0.05 * rng.random_range(-1.0..1.0)
            })
            .collect();
        normalize_peak(&AudioClip::new(samples, 16000).unwrap())
    }

    fn spec(family: &str, params: &str, seed: u64) -> DistortionSpec {
        DistortionSpec::parse(family, params, seed).unwrap()
    }

    fn max_diff(a: &AudioClip, b: &AudioClip) -> f64 {
        a.samples().iter().zip(b.samples()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn peak_hz(x: &[f64]) -> f64 {
        let mut buf: Vec<Complex64> = x.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let k = (1..buf.len() / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        k as f64 * 16000.0 / x.len() as f64
    }

    #[test]
    fn zero_noise_is_identity() {
        let x = music(8000, 1);
        let y = apply_distortion(&x, &spec("gaussian_noise", "stddev=0", 3)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn noise_level_matches_stddev() {
        let x = AudioClip::silence(100_000, 16000);
        let y = gaussian_noise(&x, 0.1, 5).unwrap();
        let var = y.samples().iter().map(|s| s * s).sum::<f64>() / y.len() as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.002);
    }

    #[test]
    fn sixteen_bit_quantization_is_identity_within_lsb() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut samples: Vec<f64> = (0..4000).map(|_| f64::from(rng.random_range(-32768i32..32768)) / 32768.0).collect();
        // Full-scale negative peak, so peak normalization leaves the grid intact.
        samples[17] = -1.0;
        let x = normalize_peak(&AudioClip::new(samples, 16000).unwrap());
        let y = apply_distortion(&x, &spec("quantization", "bits=16", 0)).unwrap();
        assert!(max_diff(&x, &y) <= 1.0 / 32768.0);
    }

    #[test]
    fn quantization_level_count() {
        let x = music(8000, 3);
        for bits in 2..=9 {
            let y = apply_distortion(&x, &spec("quantization", &format!("bits={bits}"), 0)).unwrap();
            let levels: HashSet<u64> = y.samples().iter().map(|s| (s + 0.0).to_bits()).collect();
            assert!(levels.len() <= 1 << bits, "bits {bits}: {}", levels.len());
        }
    }

    #[test]
    fn pops_counts_and_signs() {
        let x = AudioClip::new(vec![0.25; 10_001], 16000).unwrap();
        for (pct, seed) in [(0.31, 1), (1.0, 2), (0.0031, 3), (50.0, 4)] {
            let y = pops(&x, pct, seed);
            let expect = (pct / 100.0 * 10_001.0).round() as usize;
            let neg = y.samples().iter().filter(|&&s| s == -1.0).count();
            let pos = y.samples().iter().filter(|&&s| s == 1.0).count();
            assert_eq!(neg + pos, expect);
            assert_eq!(pos - neg, expect % 2);
        }
    }

    #[test]
    fn reverb_identity_and_echo_positions() {
        let x = music(16000, 4);
        for params in ["dampening=0;delay=0.25;echos=3", "dampening=0.5;delay=0.25;echos=0"] {
            assert_eq!(apply_distortion(&x, &spec("reverb", params, 0)).unwrap(), x);
        }
        let mut imp = vec![0.0; 16000];
        imp[0] = 1.0;
        let y = reverb(&AudioClip::new(imp, 16000).unwrap(), 0.5, 0.25, 3);
        assert_eq!(y.samples()[4000], 0.5);
        assert_eq!(y.samples()[8000], 0.25);
        assert_eq!(y.samples()[12000], 0.125);
        assert_eq!(y.samples().iter().filter(|&&s| s != 0.0).count(), 4);
    }

    #[test]
    fn speed_lengths_follow_duration_multiplier() {
        let x = music(80000, 5);
        let y = apply_distortion(&x, &spec("speed", "factor=0.5", 0)).unwrap();
        assert_eq!(y.duration(), 2.5);
        assert_eq!(y.sample_rate(), 16000);
        for f in [0.1f64, 0.95, 1.01, 2.0, 5.0] {
            let y = apply_distortion(&x, &spec("speed", &format!("factor={f}"), 0)).unwrap();
            assert_eq!(y.len(), (80000.0 * f).round() as usize);
        }
    }

    #[test]
    fn speed_shifts_pitch_and_pitch_keeps_length() {
        let tone = AudioClip::new((0..32000).map(|i| (2.0 * PI * 500.0 * i as f64 / 16000.0).sin()).collect(), 16000).unwrap();
        let slow = apply_distortion(&tone, &spec("speed", "factor=2", 0)).unwrap();
        assert!((peak_hz(slow.samples()) - 250.0).abs() < 1.0);
        let up = apply_distortion(&tone, &spec("pitch", "semitones=12", 0)).unwrap();
        assert_eq!(up.len(), tone.len());
        assert!((peak_hz(up.samples()) - 1000.0).abs() < 16.0, "{}", peak_hz(up.samples()));
        let down = apply_distortion(&tone, &spec("pitch", "semitones=-5", 0)).unwrap();
        assert_eq!(down.len(), tone.len());
        let want = 500.0 * 2f64.powf(-5.0 / 12.0);
        assert!((peak_hz(down.samples()) - want).abs() < 16.0);
    }

    #[test]
    fn mel_with_many_bands_is_close_and_few_bands_is_coarse() {
        let x = music(16000, 6);
        let fine = apply_distortion(&x, &spec("mel_wide", "num_bands=264", 0)).unwrap();
        let coarse = apply_distortion(&x, &spec("mel_wide", "num_bands=8", 0)).unwrap();
        let err = |y: &AudioClip| {
            x.samples().iter().zip(y.samples()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        assert_eq!(fine.len(), x.len());
        assert!(err(&fine) < err(&coarse));
        let narrow = apply_distortion(&x, &spec("mel_narrow", "num_bands=16", 0)).unwrap();
        assert_eq!(narrow.len(), x.len());
    }

    #[test]
    fn griffin_lim_families() {
        let x = music(8000, 7);
        let a = apply_distortion(&x, &spec("griffin_lim", "iterations=5", 1)).unwrap();
        let b = apply_distortion(&x, &spec("griffin_lim", "iterations=5", 1)).unwrap();
        let z = apply_distortion(&x, &spec("griffin_lim_zero", "iterations=5", 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), x.len());
        assert_ne!(a, z);
    }

    #[test]
    fn every_family_outputs_normalized_audio() {
        let x = music(16000, 8);
        for (family, params) in [
            ("gaussian_noise", "stddev=0.031"),
            ("pops", "percentage=0.1"),
            ("lowpass", "critical_freq=1000"),
            ("highpass", "critical_freq=1000"),
            ("quantization", "bits=4"),
            ("griffin_lim", "iterations=2"),
            ("griffin_lim_zero", "iterations=2"),
            ("mel_wide", "num_bands=32"),
            ("mel_narrow", "num_bands=32"),
            ("speed", "factor=0.8"),
            ("speed_pp", "factor=1.2"),
            ("pitch", "semitones=1"),
            ("reverb", "dampening=0.4;delay=0.25;echos=5"),
        ] {
            let y = apply_distortion(&x, &spec(family, params, 9)).unwrap();
            assert_eq!(y.peak(), 1.0, "{family}");
        }
    }

    #[test]
    fn out_of_range_cutoff_is_an_error() {
        let x = music(4000, 9);
        assert!(apply_distortion(&x, &spec("lowpass", "critical_freq=9000", 0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn loudness_invariance(seed in 0u64..1000, k in 0.01f64..100.0, which in 0usize..5) {
            let x = music(4000, seed);
            let s = [
                spec("gaussian_noise", "stddev=0.01", seed),
                spec("pops", "percentage=0.31", seed),
                spec("quantization", "bits=5", 0),
                spec("reverb", "dampening=0.3;delay=0.01;echos=3", 0),
                spec("lowpass", "critical_freq=2000", 0),
            ][which].clone();
            let a = apply_distortion(&x, &s).unwrap();
            let b = apply_distortion(&x.map(|v| k * v), &s).unwrap();
            prop_assert!(max_diff(&a, &b) < 1e-9);
        }

        #[test]
        fn deterministic_given_seed(seed in 0u64..1000) {
            let x = music(3000, seed);
            let s = spec("pops", "percentage=1", seed);
            prop_assert_eq!(apply_distortion(&x, &s).unwrap(), apply_distortion(&x, &s).unwrap());
        }
    }
}
