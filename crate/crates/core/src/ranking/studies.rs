use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distort::SweepGrid;
use crate::error::{Error, Result};
use crate::fad::{fad_score, Embedding, EmbeddingBackend, WindowingPolicy};
use crate::pipeline::{distort_clips, Corpus, Evaluator, PipelineConfig};
use crate::report::format_float;
use crate::seed::derive_indexed;

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionRow {
    pub size: usize,
    pub family: String,
    pub params: String,
    pub mean_fad: f64,
    /// Population variance over repeats.
    pub variance: f64,
    pub dispersion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionReport {
    /// Ordered by size, then grid order.
    pub rows: Vec<DispersionRow>,
    /// `(size, mean dispersion over configs)` in size order.
    pub average: Vec<(usize, f64)>,
}

impl DispersionReport {
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["size", "family", "params", "mean_fad", "variance", "dispersion"])?;
        for r in &self.rows {
            w.write_record([
                r.size.to_string(),
                r.family.clone(),
                r.params.clone(),
                format_float(r.mean_fad),
                format_float(r.variance),
                format_float(r.dispersion),
            ])?;
        }
        for (size, d) in &self.average {
            w.write_record([size.to_string(), "average".into(), String::new(), String::new(), String::new(), format_float(*d)])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

/// Index of dispersion `var / mean` of FAD over random evaluation subsets.
///
/// For each size and repeat one subset of clip indices is drawn (without
/// replacement) from a stream derived from `(seed, size, repeat)`; every
/// grid entry is scored on the same subsets against fixed background
/// statistics.
pub fn dispersion_study(
    corpus: &Corpus,
    grid: &SweepGrid,
    backend: &dyn EmbeddingBackend,
    config: PipelineConfig,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<DispersionReport> {
    let n = corpus.evaluation().len();
    if repeats == 0 {
        return Err(Error::Argument("repeats must be at least 1".into()));
    }
    if let Some(&bad) = sizes.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::Argument(format!("subset size {bad} not in 1..={n} evaluation clips")));
    }
    let subsets: Vec<Vec<Vec<usize>>> = sizes
        .iter()
        .map(|&k| {
            (0..repeats)
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(derive_indexed(seed, k as u64), r as u64));
                    let mut idx = sample(&mut rng, n, k).into_vec();
                    idx.sort_unstable();
                    idx
                })
                .collect()
        })
        .collect();

    let eval = Evaluator::new(backend, config)?;
    let background = if grid.is_empty() { None } else { Some(eval.background_stats(corpus)?) };
    let mut rows = vec![Vec::new(); sizes.len()];
    for spec in grid.entries() {
        let background = background.as_ref().expect("grid is not empty");
        let distorted = distort_clips(corpus.evaluation(), spec)?;
        let per_clip = group_by_clip(eval.embed(&distorted)?, &distorted);
        for (s, &k) in sizes.iter().enumerate() {
            let scores: Vec<f64> = subsets[s]
                .par_iter()
                .map(|idx| {
                    let chosen: Vec<Embedding> = idx.iter().flat_map(|&i| per_clip[i].iter().cloned()).collect();
                    fad_score(background, &eval.stats(&chosen)?)
                })
                .collect::<Result<_>>()?;
            let mean = scores.iter().sum::<f64>() / repeats as f64;
            let variance = scores.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / repeats as f64;
            rows[s].push(DispersionRow {
                size: k,
                family: spec.family().name().to_string(),
                params: spec.params_string(),
                mean_fad: mean,
                variance,
                dispersion: if mean > 0.0 { variance / mean } else { 0.0 },
            });
        }
    }
    let average = sizes
        .iter()
        .zip(&rows)
        .map(|(&k, r)| (k, if r.is_empty() { 0.0 } else { r.iter().map(|x| x.dispersion).sum::<f64>() / r.len() as f64 }))
        .collect();
    Ok(DispersionReport {
        rows: rows.into_iter().flatten().collect(),
        average,
    })
}

/// Embeddings split per clip, in the order of `clips`.
fn group_by_clip(embeddings: Vec<Embedding>, clips: &[(String, crate::audio::AudioClip)]) -> Vec<Vec<Embedding>> {
    let mut groups: Vec<Vec<Embedding>> = vec![Vec::new(); clips.len()];
    let position: std::collections::HashMap<&str, usize> =
        clips.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
    for e in embeddings {
        let i = position[e.clip_id.as_str()];
        groups[i].push(e);
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub step: f64,
    pub family: String,
    pub params: String,
    pub fad: f64,
}

impl StepRow {
    pub fn write_csv(rows: &[StepRow], writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "family", "params", "fad"])?;
        for r in rows {
            w.write_record([format_float(r.step), r.family.clone(), r.params.clone(), format_float(r.fad)])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

/// FAD per (step, grid entry), with background statistics recomputed for
/// every step. Rows follow the order of `steps`, then grid order.
pub fn step_length_study(
    corpus: &Corpus,
    grid: &SweepGrid,
    backend: &dyn EmbeddingBackend,
    config: PipelineConfig,
    steps: &[f64],
) -> Result<Vec<StepRow>> {
    let policies = steps.iter().map(|&s| WindowingPolicy::new(s)).collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let eval = Evaluator::new(backend, config)?;
    let backgrounds = policies
        .iter()
        .map(|p| eval.stats(&eval.embed_with_policy(corpus.background(), p)?))
        .collect::<Result<Vec<_>>>()?;
    let mut table = vec![Vec::with_capacity(grid.len()); steps.len()];
    for spec in grid.entries() {
        let distorted = distort_clips(corpus.evaluation(), spec)?;
        for (i, policy) in policies.iter().enumerate() {
            let fad = fad_score(&backgrounds[i], &eval.stats(&eval.embed_with_policy(&distorted, policy)?)?)?;
            table[i].push(StepRow {
                step: steps[i],
                family: spec.family().name().to_string(),
                params: spec.params_string(),
                fad,
            });
        }
    }
    Ok(table.into_iter().flatten().collect())
}
