use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{apply_distortion, DistortionSpec, SweepGrid};
use crate::audio::{load_for_analysis, save_wav, CorpusManifest, Role};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// One line of a sweep report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub clip_id: String,
    pub family: String,
    pub params: String,
    /// Seed actually used for this clip.
    pub seed: u64,
    pub output_path: PathBuf,
    /// `ok`, or `error: <message>`.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn write_csv(rows: &[SweepRow], writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["clip_id", "family", "params", "seed", "output_path", "status"])?;
        for r in rows {
            w.write_record([
                r.clip_id.as_str(),
                r.family.as_str(),
                r.params.as_str(),
                &r.seed.to_string(),
                &r.output_path.to_string_lossy(),
                r.status.as_str(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }
}

/// Writes one distorted WAV per (evaluation clip, grid entry) under
/// `out_dir/<family>/<slug>/<clip_id>.wav`.
///
/// Each clip gets its own seed derived from the entry seed and clip id, so
/// results do not depend on processing order. Failures are recorded in the
/// row status and do not stop the sweep. Rows are sorted by clip id,
/// family and parameters.
pub fn run_sweep(manifest: &CorpusManifest, grid: &SweepGrid, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let clips: Vec<_> = manifest.with_role(Role::Evaluation).collect();
    let mut rows: Vec<SweepRow> = clips
        .par_iter()
        .flat_map_iter(|entry| {
            let loaded = load_for_analysis(&entry.path);
            grid.entries().iter().map(move |spec| {
                let seed = derive_seed(spec.seed, &entry.clip_id);
                let output_path = out_dir
                    .join(spec.family().name())
                    .join(spec.slug())
                    .join(format!("{}.wav", entry.clip_id));
                let status = match &loaded {
                    Err(e) => format!("error: {e}"),
                    Ok(clip) => match distort_one(clip, spec, seed, &output_path) {
                        Ok(()) => "ok".to_string(),
                        Err(e) => format!("error: {e}"),
                    },
                };
                SweepRow {
                    clip_id: entry.clip_id.clone(),
                    family: spec.family().name().to_string(),
                    params: spec.params_string(),
                    seed,
                    output_path,
                    status,
                }
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        (&a.clip_id, &a.family, &a.params, a.seed).cmp(&(&b.clip_id, &b.family, &b.params, b.seed))
    });
    Ok(rows)
}

fn distort_one(clip: &crate::audio::AudioClip, spec: &DistortionSpec, seed: u64, path: &Path) -> Result<()> {
    let mut spec = spec.clone();
    spec.seed = seed;
    let out = apply_distortion(clip, &spec)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_wav(&out, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{AudioClip, ManifestEntry};
    use crate::distort::Family;

    fn corpus(dir: &Path, n: usize) -> CorpusManifest {
        let mut entries = Vec::new();
        for i in 0..n {
            let samples = (0..4000).map(|t| ((t * (i + 3)) as f64 * 0.01).sin()).collect();
            let path = dir.join(format!("c{i}.wav"));
            save_wav(&AudioClip::new(samples, 16000).unwrap(), &path).unwrap();
            entries.push(ManifestEntry {
                clip_id: format!("c{i}"),
                path,
                role: Role::Evaluation,
            });
        }
        entries.push(ManifestEntry {
            clip_id: "missing".into(),
            path: dir.join("missing.wav"),
            role: Role::Evaluation,
        });
        entries.push(ManifestEntry {
            clip_id: "bg".into(),
            path: dir.join("c0.wav"),
            role: Role::Background,
        });
        CorpusManifest::new(entries).unwrap()
    }

    #[test]
    fn cardinality_failures_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let m = corpus(dir.path(), 3);
        let grid = crate::distort::builtin_grid().only(&[Family::GaussianNoise, Family::Quantization]);
        let out = dir.path().join("out");
        let rows = run_sweep(&m, &grid, &out).unwrap();
        assert_eq!(rows.len(), 4 * grid.len());
        assert_eq!(rows.iter().filter(|r| !r.is_ok()).count(), grid.len());
        assert!(rows.iter().filter(|r| r.clip_id == "missing").all(|r| r.status.starts_with("error")));
        let mut sorted = rows.clone();
        sorted.sort_by(|a, b| (&a.clip_id, &a.family, &a.params).cmp(&(&b.clip_id, &b.family, &b.params)));
        assert_eq!(rows, sorted);

        let first: Vec<Vec<u8>> = rows.iter().filter(|r| r.is_ok()).map(|r| std::fs::read(&r.output_path).unwrap()).collect();
        let again = run_sweep(&m, &grid, &out).unwrap();
        assert_eq!(rows, again);
        let second: Vec<Vec<u8>> = again.iter().filter(|r| r.is_ok()).map(|r| std::fs::read(&r.output_path).unwrap()).collect();
        assert_eq!(first, second);

        let mut csv = Vec::new();
        SweepRow::write_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("clip_id,family,params,seed,output_path,status\n"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }

    #[test]
    fn empty_manifest_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let rows = run_sweep(&CorpusManifest::default(), &crate::distort::builtin_grid(), dir.path()).unwrap();
        assert!(rows.is_empty());
    }
}
