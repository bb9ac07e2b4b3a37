use super::StftConfig;
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the one-sided STFT bins, `n_mels x bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    n_mels: usize,
    bins: usize,
    centres: Vec<f64>,
    f_min: f64,
    f_max: f64,
}

impl MelFilterbank {
    /// Filters with centres uniformly spaced on the mel axis between
    /// `f_min` and `f_max`; each filter is a unit-peak triangle in mel.
    ///
    /// A filter too narrow to cover any bin centre puts unit weight on the
    /// bin nearest its centre so every row keeps a positive sum.
    pub fn new(
        n_mels: usize,
        f_min: f64,
        f_max: f64,
        config: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if n_mels == 0 || !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
            return Err(Error::Argument(format!(
                "mel filterbank needs n_mels >= 1 and 0 <= f_min < f_max <= {nyquist}, \
                 got n_mels={n_mels}, f_min={f_min}, f_max={f_max}"
            )));
        }
        let bins = config.bins();
        let bin_hz = f64::from(sample_rate) / config.fft_length() as f64;
        let bin_mel: Vec<f64> = (0..bins).map(|k| hz_to_mel(k as f64 * bin_hz)).collect();

        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)
            .collect();

        let mut weights = vec![0.0; n_mels * bins];
        for m in 0..n_mels {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * bins..(m + 1) * bins];
            for (k, &mel) in bin_mel.iter().enumerate() {
                let up = (mel - left) / (centre - left);
                let down = (right - mel) / (right - centre);
                row[k] = up.min(down).max(0.0);
            }
            if row.iter().all(|&w| w == 0.0) {
                let centre_hz = mel_to_hz(centre);
                let k = ((centre_hz / bin_hz).round() as usize).min(bins - 1);
                row[k] = 1.0;
            }
        }
        Ok(Self {
            weights,
            n_mels,
            bins,
            centres: edges[1..=n_mels].iter().map(|&m| mel_to_hz(m)).collect(),
            f_min,
            f_max,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Row-major `n_mels x bins` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.bins..(m + 1) * self.bins]
    }

    /// Projects one magnitude frame (`bins` values) to `n_mels` values.
    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        debug_assert_eq!(frame.len(), self.bins);
        (0..self.n_mels)
            .map(|m| self.row(m).iter().zip(frame).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// Nominal centre frequency of each filter in Hz.
    pub fn centres_hz(&self) -> &[f64] {
        &self.centres
    }
}

/// Convenience constructor mirroring [`MelFilterbank::new`].
pub fn mel_filterbank(
    n_mels: usize,
    f_min: f64,
    f_max: f64,
    config: StftConfig,
    sample_rate: u32,
) -> Result<MelFilterbank> {
    MelFilterbank::new(n_mels, f_min, f_max, config, sample_rate)
}
