use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Spectrogram, StftConfig, StftPlan};
use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Initial phase estimate for Griffin-Lim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseInit {
    /// Uniform random phases drawn from the seeded generator.
    Random,
    /// All phases zero.
    Zero,
}

/// Reconstructs a signal whose STFT magnitude approximates `magnitude`
/// (`frames x bins`, row-major) by alternating projections.
pub fn griffin_lim(
    magnitude: &[f64],
    frames: usize,
    config: StftConfig,
    sample_rate: u32,
    iterations: usize,
    init: PhaseInit,
    seed: u64,
) -> Result<AudioClip> {
    let (clip, _) = run(magnitude, frames, config, sample_rate, iterations, init, seed, false)?;
    Ok(clip)
}

/// Like [`griffin_lim`], also returning the spectral convergence after
/// each of `0..=iterations` iterations.
pub fn griffin_lim_with_history(
    magnitude: &[f64],
    frames: usize,
    config: StftConfig,
    sample_rate: u32,
    iterations: usize,
    init: PhaseInit,
    seed: u64,
) -> Result<(AudioClip, Vec<f64>)> {
    run(magnitude, frames, config, sample_rate, iterations, init, seed, true)
}

#[allow(clippy::too_many_arguments)]
fn run(
    magnitude: &[f64],
    frames: usize,
    config: StftConfig,
    sample_rate: u32,
    iterations: usize,
    init: PhaseInit,
    seed: u64,
    track: bool,
) -> Result<(AudioClip, Vec<f64>)> {
    if magnitude.len() != frames * config.bins() {
        return Err(Error::Argument(format!(
            "magnitude has {} entries, expected {frames} x {}",
            magnitude.len(),
            config.bins()
        )));
    }
    if let Some(m) = magnitude.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::Argument(format!("magnitude entries must be finite and >= 0, got {m}")));
    }
    if frames == 0 {
        return Err(Error::InsufficientInput("empty magnitude".into()));
    }

    let plan = StftPlan::new(config);
    let phase: Vec<f64> = match init {
        PhaseInit::Zero => vec![0.0; magnitude.len()],
        PhaseInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..magnitude.len()).map(|_| rng.random_range(-PI..PI)).collect()
        }
    };
    let target_norm = magnitude.iter().map(|m| m * m).sum::<f64>().sqrt();

    let mut history = Vec::new();
    let mut signal = synthesize(&plan, magnitude, &phase, frames, sample_rate)?;
    for _ in 0..iterations {
        let spec = plan.forward(&signal, sample_rate)?;
        if track {
            history.push(convergence(&spec, magnitude, target_norm));
        }
        signal = synthesize(&plan, magnitude, &spec.phase(), frames, sample_rate)?;
    }
    if track {
        let spec = plan.forward(&signal, sample_rate)?;
        history.push(convergence(&spec, magnitude, target_norm));
    }
    Ok((AudioClip::from_parts_unchecked(signal, sample_rate), history))
}

fn synthesize(
    plan: &StftPlan,
    magnitude: &[f64],
    phase: &[f64],
    frames: usize,
    sample_rate: u32,
) -> Result<Vec<f64>> {
    let spec = Spectrogram::from_polar(magnitude, phase, frames, plan.config(), sample_rate)?;
    plan.inverse(&spec)
}

fn convergence(spec: &Spectrogram, target: &[f64], target_norm: f64) -> f64 {
    if target_norm == 0.0 {
        return 0.0;
    }
    let diff: f64 = spec
        .data()
        .iter()
        .zip(target)
        .map(|(c, m)| (c.norm() - m).powi(2))
        .sum();
    diff.sqrt() / target_norm
}

/// `||(|STFT(x)| - M)||_F / ||M||_F` for a signal and a target magnitude.
pub fn spectral_convergence(signal: &AudioClip, magnitude: &[f64], config: StftConfig) -> Result<f64> {
    let plan = StftPlan::new(config);
    let spec = plan.forward(signal.samples(), signal.sample_rate())?;
    if spec.data().len() != magnitude.len() {
        return Err(Error::Argument("signal and magnitude shapes differ".into()));
    }
    let norm = magnitude.iter().map(|m| m * m).sum::<f64>().sqrt();
    Ok(convergence(&spec, magnitude, norm))
}
