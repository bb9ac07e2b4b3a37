//! Full-reference signal metrics: SDR, SI-SDR, cosine distance and
//! normalized magnitude-spectrogram L2 distance.
//!
//! Every metric first aligns the estimate to the reference length by
//! truncating or zero-padding its tail, so temporally displaced outputs
//! (speed changes) remain comparable and are penalized as displacement.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::AudioClip;
use crate::dsp::{StftConfig, StftPlan};
use crate::error::{Error, Result};

/// Filter length used by [`sdr`] unless configured otherwise.
pub const DEFAULT_FILTER_TAPS: usize = 512;

/// CSV encoding of an infinite SDR.
pub const SDR_SENTINEL_DB: f64 = 300.0;

/// Residual/target energy ratio below which a decomposition counts as exact.
const EXACT_RATIO: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub clip_id: String,
    /// May be `f64::INFINITY`; see [`SDR_SENTINEL_DB`] for serialization.
    pub sdr_db: f64,
    pub si_sdr_db: f64,
    pub cosine_distance: f64,
    pub magnitude_l2: f64,
}

impl MetricReport {
    pub fn compute(
        clip_id: impl Into<String>,
        reference: &AudioClip,
        estimate: &AudioClip,
        filter_taps: usize,
        stft_config: StftConfig,
    ) -> Result<Self> {
        Ok(Self {
            clip_id: clip_id.into(),
            sdr_db: sdr(reference, estimate, filter_taps)?,
            si_sdr_db: si_sdr(reference, estimate)?,
            cosine_distance: cosine_distance(reference, estimate)?,
            magnitude_l2: magnitude_l2(reference, estimate, stft_config)?,
        })
    }
}

/// Replaces infinities with `±SDR_SENTINEL_DB`.
pub fn encode_db(db: f64) -> f64 {
    if db == f64::INFINITY {
        SDR_SENTINEL_DB
    } else if db == f64::NEG_INFINITY {
        -SDR_SENTINEL_DB
    } else {
        db
    }
}

fn aligned(reference: &AudioClip, estimate: &AudioClip) -> Result<Vec<f64>> {
    if reference.sample_rate() != estimate.sample_rate() {
        return Err(Error::Argument(format!(
            "sample rates differ: {} vs {}",
            reference.sample_rate(),
            estimate.sample_rate()
        )));
    }
    let mut e = estimate.samples().to_vec();
    e.resize(reference.len(), 0.0);
    Ok(e)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ratio_db(target: f64, residual: f64) -> Result<f64> {
    if target == 0.0 && residual == 0.0 {
        return Err(Error::Undefined("estimate is silent".into()));
    }
    if residual < EXACT_RATIO * target {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (target / residual).log10())
}

fn check_reference(reference: &AudioClip) -> Result<()> {
    if energy(reference.samples()) == 0.0 {
        return Err(Error::Undefined("reference is all zeros".into()));
    }
    Ok(())
}

/// Signal-to-distortion ratio in dB with time-invariant filter allowance.
///
/// The target is the least-squares projection of the (zero-extended)
/// estimate onto the reference delayed by `0..filter_taps` samples.
pub fn sdr(reference: &AudioClip, estimate: &AudioClip, filter_taps: usize) -> Result<f64> {
    if filter_taps == 0 {
        return Err(Error::Argument("filter_taps must be at least 1".into()));
    }
    check_reference(reference)?;
    let est = aligned(reference, estimate)?;
    let r = reference.samples();
    let n = r.len();
    let taps = filter_taps;
    let ext = n + taps - 1;

    let (autocorr, crosscorr) = correlations(r, &est, taps);
    let gram = DMatrix::from_fn(taps, taps, |i, j| autocorr[i.abs_diff(j)]);
    let rhs = DVector::from_vec(crosscorr);
    let coeffs = solve_spd(gram, rhs)?;

    let target = convolve(r, coeffs.as_slice(), ext);
    let mut residual_energy = 0.0;
    let mut target_energy = 0.0;
    for (i, &t) in target.iter().enumerate() {
        let e = if i < n { est[i] } else { 0.0 };
        residual_energy += (e - t) * (e - t);
        target_energy += t * t;
    }
    ratio_db(target_energy, residual_energy)
}

/// Lags `0..taps` of the reference autocorrelation and of the
/// reference/estimate cross-correlation `sum_m r[m] e[m + lag]`.
fn correlations(r: &[f64], e: &[f64], taps: usize) -> (Vec<f64>, Vec<f64>) {
    let n = r.len();
    if taps <= 32 {
        let auto = (0..taps).map(|k| if k < n { dot(&r[..n - k], &r[k..]) } else { 0.0 }).collect();
        let cross = (0..taps).map(|k| if k < n { dot(&r[..n - k], &e[k..]) } else { 0.0 }).collect();
        return (auto, cross);
    }
    let size = (n + taps).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let to_buf = |x: &[f64]| {
        let mut b = vec![Complex64::new(0.0, 0.0); size];
        b.iter_mut().zip(x).for_each(|(c, &v)| c.re = v);
        b
    };
    let mut rf = to_buf(r);
    let mut ef = to_buf(e);
    fwd.process(&mut rf);
    fwd.process(&mut ef);
    let mut auto: Vec<Complex64> = rf.iter().map(|c| c.norm_sqr().into()).collect();
    let mut cross: Vec<Complex64> = rf.iter().zip(&ef).map(|(a, b)| a.conj() * b).collect();
    inv.process(&mut auto);
    inv.process(&mut cross);
    let scale = 1.0 / size as f64;
    (
        auto[..taps].iter().map(|c| c.re * scale).collect(),
        cross[..taps].iter().map(|c| c.re * scale).collect(),
    )
}

/// Full linear convolution of `x` with `h`, truncated to `len`.
fn convolve(x: &[f64], h: &[f64], len: usize) -> Vec<f64> {
    if h.len() <= 32 {
        let mut out = vec![0.0; len];
        for (k, &hk) in h.iter().enumerate() {
            for (i, &xi) in x.iter().enumerate() {
                if i + k < len {
                    out[i + k] += hk * xi;
                }
            }
        }
        return out;
    }
    let size = (x.len() + h.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut xb = vec![Complex64::new(0.0, 0.0); size];
    let mut hb = xb.clone();
    xb.iter_mut().zip(x).for_each(|(c, &v)| c.re = v);
    hb.iter_mut().zip(h).for_each(|(c, &v)| c.re = v);
    fwd.process(&mut xb);
    fwd.process(&mut hb);
    xb.iter_mut().zip(&hb).for_each(|(a, b)| *a *= b);
    inv.process(&mut xb);
    let scale = 1.0 / size as f64;
    xb[..len].iter().map(|c| c.re * scale).collect()
}

/// Solves a symmetric positive (semi)definite system, falling back to the
/// pseudo-inverse when the Cholesky factorization fails.
fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(&b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * 1e-12;
    svd.solve(&b, eps)
        .map_err(|e| Error::Undefined(format!("projection solve failed: {e}")))
}

/// Scale-invariant SDR in dB.
pub fn si_sdr(reference: &AudioClip, estimate: &AudioClip) -> Result<f64> {
    check_reference(reference)?;
    let est = aligned(reference, estimate)?;
    let r = reference.samples();
    let alpha = dot(&est, r) / energy(r);
    let mut target_energy = 0.0;
    let mut residual_energy = 0.0;
    for (&e, &rv) in est.iter().zip(r) {
        let t = alpha * rv;
        target_energy += t * t;
        residual_energy += (e - t) * (e - t);
    }
    ratio_db(target_energy, residual_energy)
}

/// `1 - cos(angle)` between the two signals, in `[0, 2]`.
pub fn cosine_distance(reference: &AudioClip, estimate: &AudioClip) -> Result<f64> {
    let est = aligned(reference, estimate)?;
    let r = reference.samples();
    let (nr, ne) = (energy(r).sqrt(), energy(&est).sqrt());
    if nr == 0.0 || ne == 0.0 {
        return Err(Error::Undefined("cosine distance of a zero-norm signal".into()));
    }
    Ok((1.0 - dot(r, &est) / (nr * ne)).clamp(0.0, 2.0))
}

/// `|| |STFT(estimate)| - |STFT(reference)| ||_F / || |STFT(reference)| ||_F`.
pub fn magnitude_l2(reference: &AudioClip, estimate: &AudioClip, config: StftConfig) -> Result<f64> {
    let est = aligned(reference, estimate)?;
    let plan = StftPlan::new(config);
    let rs = plan.forward(reference.samples(), reference.sample_rate())?;
    let es = plan.forward(&est, reference.sample_rate())?;
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (a, b) in rs.data().iter().zip(es.data()) {
        let (ma, mb) = (a.norm(), b.norm());
        diff += (mb - ma) * (mb - ma);
        norm += ma * ma;
    }
    if norm == 0.0 {
        return Err(Error::Undefined("reference spectrogram is all zeros".into()));
    }
    Ok((diff / norm).sqrt())
}
