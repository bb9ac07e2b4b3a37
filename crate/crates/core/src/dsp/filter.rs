use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// One section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 2],
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }
}

/// Digital Butterworth filter from the bilinear transform with
/// pre-warping, stored as cascaded second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    kind: FilterKind,
    cutoff: f64,
    order: usize,
    sample_rate: u32,
    sections: Vec<Section>,
}

impl Butterworth {
    pub fn design(kind: FilterKind, cutoff: f64, order: usize, sample_rate: u32) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(cutoff > 0.0 && cutoff < nyquist) {
            return Err(Error::Argument(format!(
                "cutoff must lie in (0, {nyquist}) Hz, got {cutoff}"
            )));
        }
        if order == 0 {
            return Err(Error::Argument("filter order must be at least 1".into()));
        }
        let k = 2.0 * f64::from(sample_rate);
        let warped = k * (PI * cutoff / f64::from(sample_rate)).tan();
        let to_z = |s: Complex64| (k + s) / (k - s);
        let n = order as f64;

        let mut sections = Vec::with_capacity(order.div_ceil(2));
        // Upper-half-plane prototype poles; conjugates are implied.
        for i in 1..=order / 2 {
            let theta = PI * (2.0 * i as f64 + n - 1.0) / (2.0 * n);
            let proto = Complex64::from_polar(1.0, theta);
            let s = match kind {
                FilterKind::Lowpass => proto * warped,
                FilterKind::Highpass => warped / proto,
            };
            let z = to_z(s);
            let a = [-2.0 * z.re, z.norm_sqr()];
            let b = match kind {
                FilterKind::Lowpass => [1.0, 2.0, 1.0],
                FilterKind::Highpass => [1.0, -2.0, 1.0],
            };
            sections.push(Section { b, a });
        }
        if order % 2 == 1 {
            let s = Complex64::new(-warped, 0.0);
            let z = to_z(s).re;
            let b = match kind {
                FilterKind::Lowpass => [1.0, 1.0, 0.0],
                FilterKind::Highpass => [1.0, -1.0, 0.0],
            };
            sections.push(Section { b, a: [-z, 0.0] });
        }
        // Unit passband gain per section: DC for lowpass, Nyquist for highpass.
        let probe = match kind {
            FilterKind::Lowpass => Complex64::new(1.0, 0.0),
            FilterKind::Highpass => Complex64::new(-1.0, 0.0),
        };
        for sec in &mut sections {
            let g = sec.response(probe).norm();
            sec.b.iter_mut().for_each(|b| *b /= g);
        }
        Ok(Self {
            kind,
            cutoff,
            order,
            sample_rate,
            sections,
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let omega = 2.0 * PI * freq / f64::from(self.sample_rate);
        let z_inv = Complex64::from_polar(1.0, -omega);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Causal forward filtering (transposed direct form II per section).
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for sec in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for x in out.iter_mut() {
                let y = sec.b[0] * *x + z1;
                z1 = sec.b[1] * *x - sec.a[0] * y + z2;
                z2 = sec.b[2] * *x - sec.a[1] * y;
                *x = y;
            }
        }
        out
    }
}

/// Closed-form magnitude of a bilinear-transformed Butterworth filter.
pub fn butterworth_magnitude(kind: FilterKind, cutoff: f64, order: usize, sample_rate: u32, freq: f64) -> f64 {
    let t = |f: f64| (PI * f / f64::from(sample_rate)).tan();
    let ratio = match kind {
        FilterKind::Lowpass => t(freq) / t(cutoff),
        FilterKind::Highpass => t(cutoff) / t(freq),
    };
    1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt()
}

/// Filters a clip with an order-`order` Butterworth lowpass or highpass.
pub fn butterworth_filter(clip: &AudioClip, kind: FilterKind, cutoff: f64, order: usize) -> Result<AudioClip> {
    let filter = Butterworth::design(kind, cutoff, order, clip.sample_rate())?;
    Ok(AudioClip::from_parts_unchecked(filter.apply(clip.samples()), clip.sample_rate()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, len: usize) -> AudioClip {
        AudioClip::new(
            (0..len).map(|i| (2.0 * PI * freq * i as f64 / 16000.0).sin()).collect(),
            16000,
        )
        .unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn cutoff_is_minus_three_db() {
        for kind in [FilterKind::Lowpass, FilterKind::Highpass] {
            for order in 1..=8 {
                let f = Butterworth::design(kind, 1000.0, order, 16000).unwrap();
                let db = 20.0 * f.response(1000.0).norm().log10();
                assert!((db + 3.0103).abs() < 0.01, "{kind:?} order {order}: {db}");
            }
        }
    }

    #[test]
    fn lowpass_passes_low_tone() {
        let x = sine(100.0, 32000);
        let y = butterworth_filter(&x, FilterKind::Lowpass, 4000.0, 5).unwrap();
        // Skip the start-up transient.
        let (a, b) = (rms(&x.samples()[8000..]), rms(&y.samples()[8000..]));
        assert!((a - b).abs() / a < 0.01);
    }

    #[test]
    fn highpass_blocks_low_tone_and_dc() {
        let x = sine(100.0, 32000);
        let y = butterworth_filter(&x, FilterKind::Highpass, 400.0, 5).unwrap();
        assert!(rms(&y.samples()[8000..]) < 0.1 * rms(&x.samples()[8000..]));

        let dc = AudioClip::new(vec![1.0; 16000], 16000).unwrap();
        let y = butterworth_filter(&dc, FilterKind::Highpass, 200.0, 5).unwrap();
        assert!(y.samples()[15999].abs() < 1e-6);
        assert!(y.samples()[15999].abs() < y.samples()[100].abs());
    }

    #[test]
    fn matches_closed_form_response() {
        for kind in [FilterKind::Lowpass, FilterKind::Highpass] {
            for cutoff in [300.0, 1500.0, 4000.0] {
                let f = Butterworth::design(kind, cutoff, 5, 16000).unwrap();
                for i in 0..20 {
                    let freq = 20.0 * (7900.0f64 / 20.0).powf(i as f64 / 19.0);
                    let got = 20.0 * f.response(freq).norm().log10();
                    let want = 20.0 * butterworth_magnitude(kind, cutoff, 5, 16000, freq).log10();
                    assert!((got - want).abs() < 0.5, "{kind:?} {cutoff} @ {freq}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_cutoff() {
        assert!(Butterworth::design(FilterKind::Lowpass, 0.0, 5, 16000).is_err());
        assert!(Butterworth::design(FilterKind::Lowpass, 8000.0, 5, 16000).is_err());
        assert!(Butterworth::design(FilterKind::Highpass, 400.0, 0, 16000).is_err());
    }
}
