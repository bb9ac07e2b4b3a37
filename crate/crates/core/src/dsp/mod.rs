//! Spectral analysis and synthesis primitives.

mod filter;
mod frontend;
mod griffin_lim;
mod mel;
mod stft;
mod vocoder;

pub use filter::{butterworth_filter, butterworth_magnitude, Butterworth, FilterKind, DEFAULT_ORDER};
pub use frontend::{log_mel_frontend, FrontendConfig, LogMelFrontend, LogMelPatch};
pub use griffin_lim::{griffin_lim, griffin_lim_with_history, spectral_convergence, PhaseInit};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, MelFilterbank};
pub use stft::{hann_periodic, istft, stft, Spectrogram, StftConfig, StftPlan};
pub use vocoder::{phase_vocoder_stretch, phase_vocoder_stretch_with};

pub(crate) use stft::pad_for_interior;
