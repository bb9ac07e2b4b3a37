use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Framing parameters for a Hann-windowed STFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StftConfig {
    window_length: usize,
    hop_length: usize,
    fft_length: usize,
}

impl StftConfig {
    /// Requires `0 < hop <= window <= fft`.
    pub fn new(window_length: usize, hop_length: usize, fft_length: usize) -> Result<Self> {
        if hop_length == 0 || hop_length > window_length || window_length > fft_length {
            return Err(Error::Argument(format!(
                "need 0 < hop ({hop_length}) <= window ({window_length}) <= fft ({fft_length})"
            )));
        }
        Ok(Self {
            window_length,
            hop_length,
            fft_length,
        })
    }

    /// 1024-point FFT, 1024 window, 256 hop: the configuration used for
    /// spectral distortions and the magnitude metric.
    pub fn distortion_default() -> Self {
        Self::new(1024, 256, 1024).expect("valid constant config")
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn hop_length(&self) -> usize {
        self.hop_length
    }

    pub fn fft_length(&self) -> usize {
        self.fft_length
    }

    /// Number of one-sided frequency bins.
    pub fn bins(&self) -> usize {
        self.fft_length / 2 + 1
    }

    /// Frames produced for a signal of `len` samples (0 if shorter than a window).
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_length {
            0
        } else {
            (len - self.window_length) / self.hop_length + 1
        }
    }

    /// Length of the overlap-add output for `frames` frames.
    pub fn synthesis_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop_length + self.window_length
        }
    }

    pub fn window(&self) -> Vec<f64> {
        hann_periodic(self.window_length)
    }

    /// Overlap-added squared window in the fully overlapped interior, if it
    /// is constant (the weighted overlap-add reconstruction condition).
    pub fn cola_constant(&self) -> Option<f64> {
        if !self.window_length.is_multiple_of(self.hop_length) {
            return None;
        }
        let w = self.window();
        let sums: Vec<f64> = (0..self.hop_length)
            .map(|n| {
                (n..self.window_length)
                    .step_by(self.hop_length)
                    .map(|m| w[m] * w[m])
                    .sum()
            })
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        (max > 0.0 && (max - min) <= 1e-9 * max).then(|| sums.iter().sum::<f64>() / sums.len() as f64)
    }
}

pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Complex one-sided STFT, `frames x bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<Complex64>,
    frames: usize,
    config: StftConfig,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn new(
        data: Vec<Complex64>,
        frames: usize,
        config: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        if data.len() != frames * config.bins() {
            return Err(Error::Argument(format!(
                "spectrogram data has {} entries, expected {frames} x {}",
                data.len(),
                config.bins()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Argument("non-finite spectrogram entry".into()));
        }
        Ok(Self {
            data,
            frames,
            config,
            sample_rate,
        })
    }

    /// Spectrogram with magnitudes `magnitude` (frames x bins) and the given phases.
    pub fn from_polar(
        magnitude: &[f64],
        phase: &[f64],
        frames: usize,
        config: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        let data = magnitude
            .iter()
            .zip(phase)
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect();
        Self::new(data, frames, config, sample_rate)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.config.bins()
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let f = self.bins();
        &self.data[t * f..(t + 1) * f]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.arg()).collect()
    }
}

/// Planned forward/inverse transforms for one configuration.
///
/// Reuse a plan when running many transforms (e.g. Griffin-Lim).
pub struct StftPlan {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftPlan {
    pub fn new(config: StftConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            config,
            window: config.window(),
            forward: planner.plan_fft_forward(config.fft_length),
            inverse: planner.plan_fft_inverse(config.fft_length),
        }
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    /// Frame `t` covers samples `[t*hop, t*hop + window)`, Hann-windowed and
    /// zero-padded to the FFT length.
    pub fn forward(&self, samples: &[f64], sample_rate: u32) -> Result<Spectrogram> {
        let cfg = self.config;
        let frames = cfg.frame_count(samples.len());
        if frames == 0 {
            return Err(Error::InsufficientInput(format!(
                "{} samples is shorter than one {}-sample window",
                samples.len(),
                cfg.window_length
            )));
        }
        let bins = cfg.bins();
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_length];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * cfg.hop_length;
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (i, (&s, &w)) in samples[start..start + cfg.window_length]
                .iter()
                .zip(&self.window)
                .enumerate()
            {
                buf[i].re = s * w;
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..bins]);
        }
        Ok(Spectrogram {
            data,
            frames,
            config: cfg,
            sample_rate,
        })
    }

    /// Weighted overlap-add inverse normalized by the interior COLA constant.
    ///
    /// The first and last `window - hop` samples are tapered by the window
    /// and only reconstruct exactly in the fully overlapped interior.
    pub fn inverse(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        let cfg = self.config;
        if spec.config != cfg {
            return Err(Error::Argument("spectrogram config does not match plan".into()));
        }
        let cola = cfg.cola_constant().ok_or_else(|| {
            Error::Argument(format!(
                "window {} / hop {} does not satisfy overlap-add reconstruction",
                cfg.window_length, cfg.hop_length
            ))
        })?;
        let n = cfg.fft_length;
        let bins = cfg.bins();
        let mut out = vec![0.0; cfg.synthesis_len(spec.frames)];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / (n as f64 * cola);
        for t in 0..spec.frames {
            let frame = spec.frame(t);
            buf[..bins].copy_from_slice(frame);
            buf[0].im = 0.0;
            if n.is_multiple_of(2) {
                buf[n / 2].im = 0.0;
            }
            for k in 1..n - bins + 1 {
                buf[n - k] = frame[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * cfg.hop_length;
            for (i, w) in self.window.iter().enumerate() {
                out[start + i] += buf[i].re * w * scale;
            }
        }
        Ok(out)
    }
}

/// One-sided Hann STFT of a clip.
pub fn stft(clip: &AudioClip, config: StftConfig) -> Result<Spectrogram> {
    StftPlan::new(config).forward(clip.samples(), clip.sample_rate())
}

/// Inverse of [`stft`] by weighted overlap-add.
pub fn istft(spec: &Spectrogram) -> Result<AudioClip> {
    let samples = StftPlan::new(spec.config).inverse(spec)?;
    Ok(AudioClip::from_parts_unchecked(samples, spec.sample_rate))
}

/// Pads `samples` so that, after an STFT/ISTFT round trip, the original
/// span lies in the fully overlapped interior. Returns the padded signal
/// and the offset of the original first sample.
pub(crate) fn pad_for_interior(samples: &[f64], config: StftConfig, lead: usize) -> (Vec<f64>, usize) {
    let w = config.window_length;
    let hop = config.hop_length;
    let mut padded = vec![0.0; lead];
    padded.extend_from_slice(samples);
    // Trailing pad: at least window - hop, then complete the last frame.
    let min_len = padded.len() + (w - hop);
    let frames = if min_len <= w { 1 } else { (min_len - w).div_ceil(hop) + 1 };
    padded.resize(config.synthesis_len(frames), 0.0);
    (padded, lead)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_dft(x: &[f64], k: usize) -> Complex64 {
        let n = x.len() as f64;
        x.iter()
            .enumerate()
            .map(|(i, &v)| Complex64::from_polar(v, -2.0 * PI * k as f64 * i as f64 / n))
            .sum()
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(1024, 0, 1024).is_err());
        assert!(StftConfig::new(1024, 2048, 2048).is_err());
        assert!(StftConfig::new(1024, 256, 512).is_err());
        let c = StftConfig::distortion_default();
        assert_eq!(c.bins(), 513);
        assert!((c.cola_constant().unwrap() - 1.5).abs() < 1e-12);
        // Hann squared does not overlap-add to a constant at 50% overlap.
        assert!(StftConfig::new(1024, 512, 1024).unwrap().cola_constant().is_none());
        assert!(StftConfig::new(400, 160, 512).unwrap().cola_constant().is_none());
    }

    #[test]
    fn too_short_is_an_error() {
        let clip = AudioClip::silence(100, 16000);
        assert!(matches!(
            stft(&clip, StftConfig::distortion_default()),
            Err(Error::InsufficientInput(_))
        ));
    }

    #[test]
    fn zero_in_zero_out() {
        let cfg = StftConfig::distortion_default();
        let spec = stft(&AudioClip::silence(4096, 16000), cfg).unwrap();
        assert_eq!(spec.frames(), 13);
        assert!(spec.data().iter().all(|c| c.norm() == 0.0));
        assert!(istft(&spec).unwrap().samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn matches_direct_dft_and_bin_centre_sine() {
        let cfg = StftConfig::new(256, 64, 256).unwrap();
        let k0 = 20;
        let x: Vec<f64> = (0..1024)
            .map(|i| (2.0 * PI * k0 as f64 * i as f64 / 256.0).sin())
            .collect();
        let clip = AudioClip::new(x.clone(), 16000).unwrap();
        let spec = stft(&clip, cfg).unwrap();
        let w = hann_periodic(256);
        for t in [0, 3, spec.frames() - 1] {
            let seg: Vec<f64> = x[t * 64..t * 64 + 256].iter().zip(&w).map(|(a, b)| a * b).collect();
            for k in [0, 5, k0, 100, 128] {
                assert!((direct_dft(&seg, k) - spec.frame(t)[k]).norm() < 1e-9);
            }
            let frame = spec.frame(t);
            let peak = frame[k0].norm();
            for (k, c) in frame.iter().enumerate() {
                if (k as i64 - k0 as i64).abs() > 2 {
                    assert!(20.0 * (peak / c.norm().max(1e-300)).log10() >= 30.0);
                }
            }
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::new(400, 160, 512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = stft(&AudioClip::new(x.clone(), 16000).unwrap(), cfg).unwrap();
        let w = hann_periodic(400);
        for t in 0..spec.frames() {
            let time: f64 = x[t * 160..t * 160 + 400].iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
            // Expand the one-sided spectrum to all 512 bins.
            let f = spec.frame(t);
            let full: f64 = (0..512)
                .map(|k| if k <= 256 { f[k].norm_sqr() } else { f[512 - k].norm_sqr() })
                .sum::<f64>();
            let freq = full / 512.0;
            assert!((time - freq).abs() < 1e-9 * time.max(1.0));
        }
    }

    #[test]
    fn single_frame_inverse_is_window_squared() {
        let cfg = StftConfig::new(256, 64, 256).unwrap();
        let x: Vec<f64> = (0..256).map(|i| (2.0 * PI * 7.3 * i as f64 / 256.0).sin()).collect();
        let spec = stft(&AudioClip::new(x.clone(), 16000).unwrap(), cfg).unwrap();
        assert_eq!(spec.frames(), 1);
        let y = istft(&spec).unwrap();
        let w = hann_periodic(256);
        let cola = cfg.cola_constant().unwrap();
        for i in 0..256 {
            assert!((y.samples()[i] - w[i] * w[i] * x[i] / cola).abs() < 1e-12);
        }
    }

    #[test]
    fn non_cola_inverse_rejected() {
        let cfg = StftConfig::new(400, 160, 512).unwrap();
        let spec = stft(&AudioClip::silence(800, 16000), cfg).unwrap();
        assert!(istft(&spec).is_err());
    }

    #[test]
    fn padding_places_signal_in_interior() {
        let cfg = StftConfig::distortion_default();
        let x: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let (padded, off) = pad_for_interior(&x, cfg, 768);
        let plan = StftPlan::new(cfg);
        let y = plan.inverse(&plan.forward(&padded, 16000).unwrap()).unwrap();
        assert_eq!(y.len(), padded.len());
        for i in 0..x.len() {
            assert!((y[off + i] - x[i]).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_interior(seed in 0u64..1000, len in 1024usize..6000, hop_div in prop::sample::select(vec![4usize, 8])) {
            let cfg = StftConfig::new(512, 512 / hop_div, 512).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let clip = AudioClip::new(x.clone(), 16000).unwrap();
            let y = istft(&stft(&clip, cfg).unwrap()).unwrap();
            let lo = cfg.window_length() - cfg.hop_length();
            let hi = y.len() - lo;
            for i in lo..hi {
                prop_assert!((y.samples()[i] - x[i]).abs() <= 1e-6);
            }
        }
    }
}
