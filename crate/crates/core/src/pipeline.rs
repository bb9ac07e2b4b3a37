//! End-to-end evaluation: distort every evaluation clip per grid entry,
//! embed, fit Gaussians and score against background statistics, with
//! optional signal metrics against the clean clips.

use rayon::prelude::*;

use crate::audio::{load_for_analysis, normalize_peak, AudioClip, CorpusManifest, Role};
use crate::distort::{apply_distortion, DistortionSpec, SweepGrid};
use crate::dsp::{FrontendConfig, LogMelFrontend, StftConfig};
use crate::error::{Error, Result};
use crate::fad::{embed_clips, estimate_gaussian, fad_score, Embedding, EmbeddingBackend, GaussianStats, WindowingPolicy};
use crate::metrics::{encode_db, MetricReport, DEFAULT_FILTER_TAPS};
use crate::report::format_float;
use crate::seed::derive_seed;

/// Clips held in memory, each list sorted by clip id.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    evaluation: Vec<(String, AudioClip)>,
    background: Vec<(String, AudioClip)>,
    background_is_evaluation: bool,
    failures: Vec<(String, String)>,
}

impl Corpus {
    /// An empty background set means the clean evaluation clips serve as
    /// background.
    pub fn new(mut evaluation: Vec<(String, AudioClip)>, mut background: Vec<(String, AudioClip)>) -> Self {
        evaluation.sort_by(|a, b| a.0.cmp(&b.0));
        background.sort_by(|a, b| a.0.cmp(&b.0));
        let background_is_evaluation = background.is_empty();
        if background_is_evaluation {
            background = evaluation.clone();
        }
        Self {
            evaluation,
            background,
            background_is_evaluation,
            failures: Vec::new(),
        }
    }

    /// Loads every manifest entry; unreadable clips are recorded in
    /// [`Corpus::failures`] and left out.
    pub fn load(manifest: &CorpusManifest) -> Self {
        let loaded: Vec<_> = manifest
            .entries()
            .par_iter()
            .map(|e| (e.clip_id.clone(), e.role, load_for_analysis(&e.path)))
            .collect();
        let (mut evaluation, mut background, mut failures) = (Vec::new(), Vec::new(), Vec::new());
        for (id, role, clip) in loaded {
            match (clip, role) {
                (Ok(c), Role::Evaluation) => evaluation.push((id, c)),
                (Ok(c), Role::Background) => background.push((id, c)),
                (Err(e), _) => failures.push((id, e.to_string())),
            }
        }
        let mut corpus = Self::new(evaluation, background);
        failures.sort();
        corpus.failures = failures;
        corpus
    }

    pub fn evaluation(&self) -> &[(String, AudioClip)] {
        &self.evaluation
    }

    pub fn background(&self) -> &[(String, AudioClip)] {
        &self.background
    }

    pub fn background_is_evaluation(&self) -> bool {
        self.background_is_evaluation
    }

    /// `(clip_id, error)` for manifest entries that failed to load.
    pub fn failures(&self) -> &[(String, String)] {
        &self.failures
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub policy: WindowingPolicy,
    pub frontend: FrontendConfig,
    pub filter_taps: usize,
    pub metric_stft: StftConfig,
    /// Skip SDR and friends when only FAD is needed.
    pub signal_metrics: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            policy: WindowingPolicy::default(),
            frontend: FrontendConfig::default(),
            filter_taps: DEFAULT_FILTER_TAPS,
            metric_stft: StftConfig::distortion_default(),
            signal_metrics: true,
        }
    }
}

/// Corpus means of the per-clip signal metrics. Infinite SDRs enter the
/// mean as the ±300 dB sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSummary {
    pub sdr_db: f64,
    pub si_sdr_db: f64,
    pub cosine_distance: f64,
    pub magnitude_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRow {
    pub family: String,
    pub params: String,
    /// NaN when fewer than two windows survive the distortion.
    pub fad: f64,
    pub metrics: Option<SignalSummary>,
    /// Distorted clips long enough for at least one window.
    pub scored_clips: usize,
}

pub const PIPELINE_COLUMNS: [&str; 7] = ["family", "params", "fad", "sdr", "si_sdr", "cosine_distance", "magnitude_l2"];

impl PipelineRow {
    /// Header plus one line per row; missing metrics are empty fields.
    pub fn write_csv(rows: &[PipelineRow], writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(PIPELINE_COLUMNS)?;
        for r in rows {
            let m = r.metrics.map(|m| {
                [m.sdr_db, m.si_sdr_db, m.cosine_distance, m.magnitude_l2].map(format_float)
            });
            let m = m.unwrap_or_default();
            w.write_record([r.family.as_str(), r.params.as_str(), &format_float(r.fad), &m[0], &m[1], &m[2], &m[3]])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

/// Shared state for scoring many grid entries against one background.
pub struct Evaluator<'a> {
    backend: &'a dyn EmbeddingBackend,
    frontend: LogMelFrontend,
    config: PipelineConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(backend: &'a dyn EmbeddingBackend, config: PipelineConfig) -> Result<Self> {
        if config.filter_taps == 0 {
            return Err(Error::Argument("filter_taps must be at least 1".into()));
        }
        Ok(Self {
            backend,
            frontend: LogMelFrontend::new(config.frontend.clone())?,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn embed(&self, clips: &[(String, AudioClip)]) -> Result<Vec<Embedding>> {
        self.embed_with_policy(clips, &self.config.policy)
    }

    /// Same as [`Evaluator::embed`] with a different window step. Clips
    /// shorter than one window contribute nothing.
    pub fn embed_with_policy(&self, clips: &[(String, AudioClip)], policy: &WindowingPolicy) -> Result<Vec<Embedding>> {
        if clips.iter().all(|(_, c)| fits(c, policy)) {
            return embed_clips(clips, self.backend, policy, &self.frontend);
        }
        let usable: Vec<(String, AudioClip)> = clips.iter().filter(|(_, c)| fits(c, policy)).cloned().collect();
        embed_clips(&usable, self.backend, policy, &self.frontend)
    }

    pub fn stats(&self, embeddings: &[Embedding]) -> Result<GaussianStats> {
        estimate_gaussian(embeddings, self.backend.id())
    }

    pub fn background_stats(&self, corpus: &Corpus) -> Result<GaussianStats> {
        self.stats(&self.embed(corpus.background())?)
    }

    /// FAD of the undistorted evaluation clips.
    pub fn clean_fad(&self, corpus: &Corpus, background: &GaussianStats) -> Result<f64> {
        fad_score(background, &self.stats(&self.embed(corpus.evaluation())?)?)
    }

    /// Scores one grid entry.
    pub fn evaluate(&self, corpus: &Corpus, spec: &DistortionSpec, background: &GaussianStats) -> Result<PipelineRow> {
        let distorted = distort_clips(corpus.evaluation(), spec)?;
        let scored_clips = distorted.iter().filter(|(_, c)| fits(c, &self.config.policy)).count();
        let fad = match self.stats(&self.embed(&distorted)?) {
            Ok(stats) => fad_score(background, &stats)?,
            Err(Error::InsufficientData { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        let metrics = if self.config.signal_metrics {
            Some(self.signal_summary(corpus.evaluation(), &distorted)?)
        } else {
            None
        };
        Ok(PipelineRow {
            family: spec.family().name().to_string(),
            params: spec.params_string(),
            fad,
            metrics,
            scored_clips,
        })
    }

    fn signal_summary(&self, clean: &[(String, AudioClip)], distorted: &[(String, AudioClip)]) -> Result<SignalSummary> {
        let reports: Vec<MetricReport> = clean
            .par_iter()
            .zip(distorted)
            .map(|((id, c), (_, d))| {
                MetricReport::compute(id.as_str(), &normalize_peak(c), d, self.config.filter_taps, self.config.metric_stft)
                    .map_err(|e| Error::Argument(format!("signal metrics for {id}: {e}")))
            })
            .collect::<Result<_>>()?;
        let n = reports.len().max(1) as f64;
        let mean = |f: &dyn Fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Ok(SignalSummary {
            sdr_db: mean(&|r| encode_db(r.sdr_db)),
            si_sdr_db: mean(&|r| encode_db(r.si_sdr_db)),
            cosine_distance: mean(&|r| r.cosine_distance),
            magnitude_l2: mean(&|r| r.magnitude_l2),
        })
    }
}

fn fits(clip: &AudioClip, policy: &WindowingPolicy) -> bool {
    policy.window_count(clip.len(), clip.sample_rate()) > 0
}

/// Applies `spec` to every clip with a per-clip seed derived from the
/// spec seed and clip id.
pub fn distort_clips(clips: &[(String, AudioClip)], spec: &DistortionSpec) -> Result<Vec<(String, AudioClip)>> {
    clips
        .par_iter()
        .map(|(id, clip)| {
            let mut s = spec.clone();
            s.seed = derive_seed(spec.seed, id);
            let out = apply_distortion(clip, &s).map_err(|e| Error::Argument(format!("{} on {id}: {e}", spec.label())))?;
            Ok((id.clone(), out))
        })
        .collect()
}

/// One row per grid entry, in grid order.
pub fn run_pipeline(
    corpus: &Corpus,
    grid: &SweepGrid,
    backend: &dyn EmbeddingBackend,
    config: PipelineConfig,
) -> Result<Vec<PipelineRow>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if corpus.evaluation().is_empty() {
        return Err(Error::NoData("corpus has no evaluation clips".into()));
    }
    let eval = Evaluator::new(backend, config)?;
    let background = eval.background_stats(corpus)?;
    grid.entries().iter().map(|spec| eval.evaluate(corpus, spec, &background)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distort::Family;
    use crate::fad::PatchStatsBackend;
    use crate::synth::synth_clips;

    fn corpus(n: usize, bg: usize) -> Corpus {
        Corpus::new(
            synth_clips("e", n, 2.0, 16000, 1).unwrap(),
            synth_clips("b", bg, 2.0, 16000, 2).unwrap(),
        )
    }

    #[test]
    fn empty_grid_gives_no_rows() {
        let rows = run_pipeline(&corpus(2, 0), &SweepGrid::new(Vec::new()), &PatchStatsBackend, PipelineConfig::default()).unwrap();
        assert!(rows.is_empty());
        let mut out = Vec::new();
        PipelineRow::write_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "family,params,fad,sdr,si_sdr,cosine_distance,magnitude_l2\n");
    }

    #[test]
    fn noise_rows_and_clean_reference() {
        let c = corpus(6, 0);
        assert!(c.background_is_evaluation());
        let grid = SweepGrid::new(vec![
            DistortionSpec::from_pairs(Family::GaussianNoise, &[("stddev", 0.01)], 0).unwrap(),
            DistortionSpec::from_pairs(Family::GaussianNoise, &[("stddev", 0.1)], 0).unwrap(),
        ]);
        let config = PipelineConfig {
            filter_taps: 16,
            ..PipelineConfig::default()
        };
        let rows = run_pipeline(&c, &grid, &PatchStatsBackend, config.clone()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].fad < rows[1].fad);
        let (m0, m1) = (rows[0].metrics.unwrap(), rows[1].metrics.unwrap());
        assert!(m0.sdr_db > m1.sdr_db);
        assert!(m0.cosine_distance < m1.cosine_distance);

        let e = Evaluator::new(&PatchStatsBackend, config).unwrap();
        let bg = e.background_stats(&c).unwrap();
        assert!(e.clean_fad(&c, &bg).unwrap() < 1e-9);
    }

    #[test]
    fn too_short_after_distortion_gives_nan() {
        let c = corpus(3, 2);
        let grid = SweepGrid::new(vec![
            DistortionSpec::from_pairs(Family::Speed, &[("factor", 0.3)], 0).unwrap(),
            DistortionSpec::from_pairs(Family::Speed, &[("factor", 0.6)], 0).unwrap(),
        ]);
        let config = PipelineConfig {
            signal_metrics: false,
            ..PipelineConfig::default()
        };
        let rows = run_pipeline(&c, &grid, &PatchStatsBackend, config).unwrap();
        assert!(rows[0].fad.is_nan());
        assert_eq!(rows[0].scored_clips, 0);
        assert!(rows[1].fad.is_finite());
        assert_eq!(rows[1].scored_clips, 3);
    }
}
