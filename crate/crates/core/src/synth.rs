//! Seeded synthetic "music": harmonic tone sequences over band-limited
//! noise bursts. Used as a stand-in corpus when no recordings are at hand.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::audio::{save_wav, AudioClip, CorpusManifest, ManifestEntry, Role};
use crate::dsp::{butterworth_filter, FilterKind};
use crate::error::{Error, Result};
use crate::seed::derive_indexed;

const PENTATONIC: [i32; 5] = [0, 2, 4, 7, 9];
const PEAK: f64 = 0.9;

fn midi_to_hz(note: i32) -> f64 {
    440.0 * 2f64.powf(f64::from(note - 69) / 12.0)
}

/// Adds one note with a few harmonics and an attack/decay/sustain envelope.
fn add_note(out: &mut [f64], rate: f64, start: usize, len: usize, freq: f64, gain: f64, rng: &mut ChaCha8Rng) {
    let harmonics = rng.random_range(2..=6);
    let rolloff = rng.random_range(0.8..2.0);
    let decay = rng.random_range(0.1..0.6);
    let sustain = rng.random_range(0.3..0.6);
    let attack = (0.01 * rate) as usize;
    let release = (0.01 * rate) as usize;
    let nyquist = rate / 2.0;
    let partials: Vec<(f64, f64, f64)> = (1..=harmonics)
        .map(|h| {
            let f = freq * h as f64;
            (f, (h as f64).powf(-rolloff), rng.random_range(0.0..TAU))
        })
        .filter(|&(f, _, _)| f < 0.9 * nyquist)
        .collect();
    let end = (start + len).min(out.len());
    for (k, s) in out[start..end].iter_mut().enumerate() {
        let t = k as f64 / rate;
        let mut env = sustain + (1.0 - sustain) * (-t / decay).exp();
        if k < attack {
            env *= k as f64 / attack as f64;
        }
        if len - k < release {
            env *= (len - k) as f64 / release as f64;
        }
        let v: f64 = partials.iter().map(|&(f, a, p)| a * (TAU * f * t + p).sin()).sum();
        *s += gain * env * v;
    }
}

/// One synthetic clip of `seconds` at `sample_rate`, fully determined by `seed`.
pub fn synth_music(seconds: f64, sample_rate: u32, seed: u64) -> Result<AudioClip> {
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(Error::Argument(format!("duration must be positive, got {seconds}")));
    }
    let rate = f64::from(sample_rate);
    let n = (seconds * rate).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tones = vec![0.0; n];

    let root = rng.random_range(45..58);
    let beat = 60.0 / rng.random_range(80.0..150.0);
    // Melody over one to two octaves above the root.
    let mut t = 0.0;
    while t < seconds {
        let beats = [0.5, 1.0, 1.0, 1.5, 2.0][rng.random_range(0..5)];
        let dur = beats * beat;
        let degree = PENTATONIC[rng.random_range(0..5)] + 12 * rng.random_range(1..3);
        let start = (t * rate) as usize;
        add_note(&mut tones, rate, start, (dur * rate) as usize, midi_to_hz(root + degree), 1.0, &mut rng);
        t += dur;
    }
    // Bass on every other beat.
    let mut t = 0.0;
    while t < seconds {
        let degree = PENTATONIC[rng.random_range(0..3)] - 12;
        let start = (t * rate) as usize;
        add_note(&mut tones, rate, start, (2.0 * beat * rate) as usize, midi_to_hz(root + degree), 0.7, &mut rng);
        t += 2.0 * beat;
    }

    // Band-limited noise with a percussive envelope on each beat.
    let white: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let low = rng.random_range(1500.0..4000.0f64);
    let high = (low * rng.random_range(1.5..2.5)).min(0.45 * rate);
    let band = butterworth_filter(&AudioClip::new(white, sample_rate)?, FilterKind::Lowpass, high, 4)?;
    let band = butterworth_filter(&band, FilterKind::Highpass, low, 4)?;
    let hit_decay = rng.random_range(0.03..0.12);
    let noise_gain = rng.random_range(0.1..0.3);
    let beat_len = beat * rate;
    let noise = band.samples().iter().enumerate().map(|(k, s)| {
        let since = (k as f64 % beat_len) / rate;
        noise_gain * s * (-since / hit_decay).exp()
    });

    let tone_peak = tones.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
    let mixed: Vec<f64> = tones.iter().zip(noise).map(|(t, z)| t / tone_peak + z).collect();
    let peak = mixed.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
    AudioClip::new(mixed.into_iter().map(|s| PEAK * s / peak).collect(), sample_rate)
}

/// `count` clips with ids `{prefix}_{i:04}`, seeds derived from `seed` and the
/// index. Generated in parallel, returned in id order.
pub fn synth_clips(prefix: &str, count: usize, seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<(String, AudioClip)>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let clip = synth_music(seconds, sample_rate, derive_indexed(seed, i as u64))?;
            Ok((format!("{prefix}_{i:04}"), clip))
        })
        .collect()
}

/// Writes an evaluation set and a disjoint background set as 16-bit WAVs
/// plus `manifest.csv` into `dir`. The returned manifest holds full paths.
pub fn write_synth_corpus(
    dir: &Path,
    evaluation: usize,
    background: usize,
    seconds: f64,
    seed: u64,
) -> Result<CorpusManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let eval = synth_clips("eval", evaluation, seconds, crate::audio::CANONICAL_RATE, derive_indexed(seed, 0))?;
    let bg = synth_clips("bg", background, seconds, crate::audio::CANONICAL_RATE, derive_indexed(seed, 1))?;
    let mut entries = Vec::with_capacity(eval.len() + bg.len());
    let mut relative = Vec::with_capacity(eval.len() + bg.len());
    for (clips, role) in [(&eval, Role::Evaluation), (&bg, Role::Background)] {
        for (id, clip) in clips {
            let name = format!("{id}.wav");
            let path = dir.join(&name);
            save_wav(clip, &path)?;
            entries.push(ManifestEntry { clip_id: id.clone(), path, role });
            relative.push(ManifestEntry { clip_id: id.clone(), path: name.into(), role });
        }
    }
    // The file on disk uses paths relative to the manifest.
    CorpusManifest::new(relative)?.save(dir.join("manifest.csv"))?;
    CorpusManifest::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::load_wav;

    #[test]
    fn deterministic_and_distinct() {
        let a = synth_music(2.0, 16000, 5).unwrap();
        assert_eq!(a, synth_music(2.0, 16000, 5).unwrap());
        assert_ne!(a, synth_music(2.0, 16000, 6).unwrap());
        assert_eq!(a.len(), 32000);
        assert!((a.peak() - PEAK).abs() < 1e-12);
    }

    #[test]
    fn corpus_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_synth_corpus(dir.path(), 3, 2, 1.5, 9).unwrap();
        assert_eq!(m.with_role(Role::Evaluation).count(), 3);
        assert_eq!(m.with_role(Role::Background).count(), 2);
        let reloaded = CorpusManifest::load(dir.path().join("manifest.csv")).unwrap();
        let clip = load_wav(&reloaded.entries()[0].path).unwrap();
        assert_eq!(clip.len(), 24000);
    }
}
