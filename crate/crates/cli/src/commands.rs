use std::path::{Path, PathBuf};

use fadtk_core::audio::{load_for_analysis, load_wav, resample, save_wav, AudioClip, CorpusManifest, Role, CANONICAL_RATE};
use fadtk_core::distort::{apply_distortion, builtin_grid, run_sweep, DistortionSpec, Family, SweepGrid, SweepRow};
use fadtk_core::dsp::FrontendConfig;
use fadtk_core::fad::{
    embed_corpus, estimate_gaussian, fad_score, save_embeddings, CorpusEmbeddings, EmbeddingBackend, EmbeddingStore,
    GaussianStats, PatchStatsBackend, WindowingPolicy,
};
use fadtk_core::metrics::{encode_db, MetricReport};
use fadtk_core::pipeline::{run_pipeline, Corpus, PipelineConfig, PipelineRow};
use fadtk_core::ranking::{
    dispersion_study, fit_plackett_luce, load_comparisons, pearson, spearman, step_length_study, FitStatus, StepRow,
    TABLE2_CSV,
};
use fadtk_core::report::format_float;
use fadtk_core::synth::write_synth_corpus;
use fadtk_core::Error as CoreError;
use rayon::prelude::*;

use crate::output::{emit, stage, CliError, CliResult, Header};
use crate::{
    AnalysisArgs, Cli, Command, CorrelateArgs, DispersionArgs, DistortArgs, EmbedArgs, FadArgs, GridArgs, Method,
    PipelineArgs, RankArgs, RoleFilter, SignalMetricsArgs, StatsArgs, StepStudyArgs, SweepArgs, SynthCorpusArgs,
};

pub fn run(cli: &Cli) -> CliResult {
    let seed = cli.seed;
    match &cli.command {
        Command::Distort(a) => distort(a, seed),
        Command::Sweep(a) => sweep(a, seed),
        Command::Embed(a) => embed(a, seed),
        Command::Stats(a) => stats(a),
        Command::Fad(a) => fad(a, seed),
        Command::SignalMetrics(a) => signal_metrics(a, seed),
        Command::Pipeline(a) => pipeline(a, seed),
        Command::Rank(a) => rank(a, seed),
        Command::Correlate(a) => correlate(a, seed),
        Command::Dispersion(a) => dispersion(a, seed),
        Command::StepStudy(a) => step_study(a, seed),
        Command::SynthCorpus(a) => synth_corpus(a, seed),
    }
}

fn resolve_grid(args: &GridArgs, seed: u64, header: &mut Header) -> CliResult<SweepGrid> {
    let grid = if args.grid == "builtin" {
        builtin_grid().with_seed(seed)
    } else {
        SweepGrid::load(&args.grid)?
    };
    header.set("grid", &args.grid);
    if args.families.is_empty() {
        header.set("families", "all");
        return Ok(grid);
    }
    let families = args
        .families
        .iter()
        .map(|f| f.parse::<Family>().map_err(|e| CliError::Usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    header.set("families", args.families.join(","));
    Ok(grid.only(&families))
}

fn frontend_config(path: Option<&Path>, header: &mut Header) -> CliResult<FrontendConfig> {
    let cfg = match path {
        Some(p) => FrontendConfig::load(p)?,
        None => FrontendConfig::default(),
    };
    header
        .set("frontend", path.map_or("default".to_string(), |p| p.display().to_string()))
        .set("frontend_sample_rate", cfg.sample_rate)
        .set("frontend_window_length", cfg.window_length)
        .set("frontend_hop_length", cfg.hop_length)
        .set("frontend_fft_length", cfg.fft_length)
        .set("frontend_n_mels", cfg.n_mels)
        .set("frontend_f_min", format_float(cfg.f_min))
        .set("frontend_f_max", format_float(cfg.f_max))
        .set("frontend_log_offset", format_float(cfg.log_offset))
        .set("frontend_patch_frames", cfg.patch_frames);
    Ok(cfg)
}

fn analysis_config(args: &AnalysisArgs, header: &mut Header) -> CliResult<PipelineConfig> {
    let policy = WindowingPolicy::new(args.step)?;
    header
        .set("window_seconds", format_float(policy.window_seconds()))
        .set("step_seconds", format_float(policy.step_seconds()));
    Ok(PipelineConfig {
        policy,
        frontend: frontend_config(args.frontend.as_deref(), header)?,
        ..PipelineConfig::default()
    })
}

fn load_corpus(manifest_path: &Path, header: &mut Header) -> CliResult<Corpus> {
    stage(format!("loading corpus from {}", manifest_path.display()));
    let manifest = CorpusManifest::load(manifest_path)?;
    let corpus = Corpus::load(&manifest);
    for (id, err) in corpus.failures() {
        eprintln!("[fadtk] skipped {id}: {err}");
    }
    header
        .set("manifest", manifest_path.display())
        .set("backend", PatchStatsBackend.id())
        .set("evaluation_clips", corpus.evaluation().len())
        .set(
            "background_source",
            if corpus.background_is_evaluation() { "evaluation" } else { "background" },
        )
        .set("background_clips", corpus.background().len())
        .set("skipped_clips", corpus.failures().len());
    Ok(corpus)
}

fn distort(a: &DistortArgs, seed: u64) -> CliResult {
    let spec = DistortionSpec::parse(&a.family, &a.params.join(";"), seed)?;
    let clip = load_for_analysis(&a.input)?;
    let out = apply_distortion(&clip, &spec)?;
    save_wav(&out, &a.out)?;
    stage(format!("{} -> {}", spec.label(), a.out.display()));
    Ok(())
}

fn sweep(a: &SweepArgs, seed: u64) -> CliResult {
    let mut header = Header::new("sweep", seed);
    let grid = resolve_grid(&a.grid, seed, &mut header)?;
    header.set("manifest", a.manifest.display()).set("out_dir", a.out_dir.display());
    let manifest = CorpusManifest::load(&a.manifest)?;
    stage(format!("sweeping {} grid entries", grid.len()));
    let rows = run_sweep(&manifest, &grid, &a.out_dir)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        stage(format!("{failed} of {} outputs failed; see the status column", rows.len()));
    }
    emit(a.report.as_deref(), &header, |w| SweepRow::write_csv(&rows, w))
}

/// Stored embeddings for the manifest clips, restricted to windows that
/// start on a multiple of the step.
fn embed_from_store(manifest: &CorpusManifest, store: &EmbeddingStore, step: f64) -> CorpusEmbeddings {
    let mut out = CorpusEmbeddings::default();
    for entry in manifest.entries() {
        let found: Vec<_> = store
            .clip(&entry.clip_id)
            .into_iter()
            .filter(|e| {
                let k = (e.window_start / step).round();
                (k * step - e.window_start).abs() < 1e-9
            })
            .cloned()
            .collect();
        if found.is_empty() {
            out.failures.push((entry.clip_id.clone(), "no stored embeddings".into()));
        }
        out.embeddings.extend(found);
    }
    out.embeddings
        .sort_by(|a, b| a.clip_id.cmp(&b.clip_id).then(a.window_start.total_cmp(&b.window_start)));
    out.failures.sort();
    out
}

fn embed(a: &EmbedArgs, seed: u64) -> CliResult {
    let mut header = Header::new("embed", seed);
    let config = analysis_config(&a.analysis, &mut header)?;
    let manifest = CorpusManifest::load(&a.manifest)?;
    let manifest = match a.role {
        RoleFilter::All => manifest,
        RoleFilter::Evaluation => manifest.subset(Role::Evaluation),
        RoleFilter::Background => manifest.subset(Role::Background),
    };
    stage(format!("embedding {} clips with {}", manifest.len(), a.backend));
    let (result, dimension) = if a.backend == "patch-stats" {
        let frontend = fadtk_core::dsp::LogMelFrontend::new(config.frontend)?;
        let backend = PatchStatsBackend;
        (embed_corpus(&manifest, &backend, &config.policy, &frontend), backend.dimension())
    } else if let Some(path) = a.backend.strip_prefix("file:") {
        let store = EmbeddingStore::load(path)?;
        (embed_from_store(&manifest, &store, config.policy.step_seconds()), store.dimension())
    } else {
        return Err(CliError::Usage(format!(
            "unknown backend {:?}; use patch-stats or file:<path>",
            a.backend
        )));
    };
    for (id, err) in &result.failures {
        eprintln!("[fadtk] skipped {id}: {err}");
    }
    stage(format!(
        "{} embeddings from {} clips ({} skipped)",
        result.embeddings.len(),
        manifest.len() - result.failures.len(),
        result.failures.len()
    ));
    save_embeddings(&a.out, &result.embeddings, dimension)?;
    Ok(())
}

fn stats(a: &StatsArgs) -> CliResult {
    let store = EmbeddingStore::load(&a.embeddings)?;
    let stats = estimate_gaussian(&store.embeddings(), &a.backend_id)?;
    stats.save(&a.out)?;
    stage(format!(
        "{}-dimensional statistics from {} embeddings -> {}",
        stats.dimension(),
        stats.count(),
        a.out.display()
    ));
    Ok(())
}

fn fad(a: &FadArgs, seed: u64) -> CliResult {
    let background = GaussianStats::load(&a.background)?;
    let evaluation = GaussianStats::load(&a.eval)?;
    let score = fad_score(&background, &evaluation)?;
    let mut header = Header::new("fad", seed);
    header
        .set("background", a.background.display())
        .set("eval", a.eval.display())
        .set("backend", background.backend_id());
    emit(None, &header, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["background", "eval", "backend", "fad"])?;
        c.write_record([
            a.background.display().to_string(),
            a.eval.display().to_string(),
            background.backend_id().to_string(),
            format_float(score),
        ])?;
        c.flush().map_err(|e| CoreError::Format(e.to_string()))
    })
}

/// Decoded, downmixed and resampled to the analysis rate, without the
/// peak normalization applied elsewhere: signal metrics compare levels.
fn load_for_metrics(path: &Path) -> fadtk_core::Result<AudioClip> {
    let clip = load_wav(path)?;
    if clip.sample_rate() == CANONICAL_RATE {
        Ok(clip)
    } else {
        resample(&clip, CANONICAL_RATE)
    }
}

fn signal_metrics(a: &SignalMetricsArgs, seed: u64) -> CliResult {
    let mut header = Header::new("signal-metrics", seed);
    header.set("filter_taps", a.filter_taps);
    let stft = fadtk_core::StftConfig::distortion_default();
    header
        .set("stft_window", stft.window_length())
        .set("stft_hop", stft.hop_length())
        .set("stft_fft", stft.fft_length());
    let pairs: Vec<(String, PathBuf, PathBuf)> = match (&a.reference, &a.estimate, &a.pairs) {
        (Some(r), Some(e), None) => {
            header.set("reference", r.display()).set("estimate", e.display());
            let id = e.file_stem().map_or("estimate".into(), |s| s.to_string_lossy().into_owned());
            vec![(id, r.clone(), e.clone())]
        }
        (None, None, Some(p)) => {
            header.set("pairs", p.display());
            read_pairs(p)?
        }
        _ => return Err(CliError::Usage("give --reference and --estimate, or --pairs".into())),
    };
    let reports: Vec<MetricReport> = pairs
        .par_iter()
        .map(|(id, r, e)| {
            let reference = load_for_metrics(r)?;
            let estimate = load_for_metrics(e)?;
            MetricReport::compute(id.as_str(), &reference, &estimate, a.filter_taps, stft)
        })
        .collect::<fadtk_core::Result<_>>()?;
    emit(a.out.as_deref(), &header, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["clip_id", "sdr", "si_sdr", "cosine_distance", "magnitude_l2"])?;
        for r in &reports {
            c.write_record([
                r.clip_id.clone(),
                format_float(encode_db(r.sdr_db)),
                format_float(encode_db(r.si_sdr_db)),
                format_float(r.cosine_distance),
                format_float(r.magnitude_l2),
            ])?;
        }
        c.flush().map_err(|e| CoreError::Format(e.to_string()))
    })
}

fn read_pairs(path: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let file = std::fs::File::open(path).map_err(|e| CoreError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(file);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["clip_id", "reference", "estimate"] {
        return Err(CoreError::Format("pairs header must be clip_id,reference,estimate".into()).into());
    }
    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() { p } else { base.join(p) }
    };
    rdr.records()
        .map(|r| {
            let r = r?;
            Ok((r[0].to_string(), resolve(&r[1]), resolve(&r[2])))
        })
        .collect()
}

fn pipeline(a: &PipelineArgs, seed: u64) -> CliResult {
    let mut header = Header::new("pipeline", seed);
    let grid = resolve_grid(&a.grid, seed, &mut header)?;
    let mut config = analysis_config(&a.analysis, &mut header)?;
    config.filter_taps = a.filter_taps;
    config.signal_metrics = !a.no_signal_metrics;
    header
        .set("signal_metrics", config.signal_metrics)
        .set("filter_taps", config.filter_taps)
        .set("metric_stft_window", config.metric_stft.window_length())
        .set("metric_stft_hop", config.metric_stft.hop_length())
        .set("metric_stft_fft", config.metric_stft.fft_length());
    let corpus = load_corpus(&a.manifest, &mut header)?;
    stage(format!("scoring {} grid entries", grid.len()));
    let rows = run_pipeline(&corpus, &grid, &PatchStatsBackend, config)?;
    for r in rows.iter().filter(|r| r.fad.is_nan()) {
        stage(format!(
            "warning: {}:{} left {} of {} clips long enough to embed; FAD is nan",
            r.family,
            r.params,
            r.scored_clips,
            corpus.evaluation().len()
        ));
    }
    emit(a.out.as_deref(), &header, |w| PipelineRow::write_csv(&rows, w))
}

fn rank(a: &RankArgs, seed: u64) -> CliResult {
    let comparisons = load_comparisons(&a.comparisons)?;
    let worths = fit_plackett_luce(&comparisons, a.max_iters, a.tol)?;
    let status = match worths.status() {
        FitStatus::Converged => "converged",
        FitStatus::MaxIterations => "max_iterations",
        FitStatus::Partial => "partial",
    };
    if worths.status() == FitStatus::Partial {
        stage(format!(
            "warning: comparison graph has {} components; worths are only comparable within a component",
            worths.component_count()
        ));
    }
    let mut header = Header::new("rank", seed);
    header
        .set("comparisons", a.comparisons.display())
        .set("comparison_count", comparisons.len())
        .set("max_iters", a.max_iters)
        .set("tol", format_float(a.tol))
        .set("status", status)
        .set("iterations", worths.iterations())
        .set("components", worths.component_count());
    emit(a.out.as_deref(), &header, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["item", "log_worth", "component"])?;
        for (item, v) in worths.ranking() {
            let comp = worths.component_of(item).unwrap_or(0);
            c.write_record([item.to_string(), format_float(v), comp.to_string()])?;
        }
        c.flush().map_err(|e| CoreError::Format(e.to_string()))
    })
}

fn read_columns(text: &str, x: &str, y: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("no column {name:?}; have {}", headers.iter().collect::<Vec<_>>().join(","))))
    };
    let (ix, iy) = (find(x)?, find(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|_| CoreError::Format(format!("data row {}: {:?} is not a number", line + 1, &record[i])))
        };
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

fn correlate(a: &CorrelateArgs, seed: u64) -> CliResult {
    let text = if a.csv == "table2" {
        TABLE2_CSV.to_string()
    } else {
        std::fs::read_to_string(&a.csv).map_err(|e| CoreError::Io {
            path: PathBuf::from(&a.csv),
            source: e,
        })?
    };
    let (xs, ys) = read_columns(&text, &a.x, &a.y)?;
    let mut header = Header::new("correlate", seed);
    header.set("csv", &a.csv).set("x", &a.x).set("y", &a.y);
    let results = a
        .method
        .iter()
        .map(|m| {
            let (name, r) = match m {
                Method::Pearson => ("pearson", pearson(&xs, &ys)?),
                Method::Spearman => ("spearman", spearman(&xs, &ys)?),
            };
            Ok((name, r))
        })
        .collect::<CliResult<Vec<_>>>()?;
    emit(a.out.as_deref(), &header, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["x", "y", "method", "n", "r"])?;
        for (name, r) in &results {
            c.write_record([a.x.as_str(), a.y.as_str(), name, &xs.len().to_string(), &format_float(*r)])?;
        }
        c.flush().map_err(|e| CoreError::Format(e.to_string()))
    })
}

fn dispersion(a: &DispersionArgs, seed: u64) -> CliResult {
    let mut header = Header::new("dispersion", seed);
    let grid = resolve_grid(&a.grid, seed, &mut header)?;
    let mut config = analysis_config(&a.analysis, &mut header)?;
    config.signal_metrics = false;
    header
        .set("sizes", a.sizes.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
        .set("repeats", a.repeats);
    let corpus = load_corpus(&a.manifest, &mut header)?;
    stage(format!("dispersion over {} grid entries", grid.len()));
    let report = dispersion_study(&corpus, &grid, &PatchStatsBackend, config, &a.sizes, a.repeats, seed)?;
    emit(a.out.as_deref(), &header, |w| report.write_csv(w))
}

fn step_study(a: &StepStudyArgs, seed: u64) -> CliResult {
    let mut header = Header::new("step-study", seed);
    let grid = resolve_grid(&a.grid, seed, &mut header)?;
    let frontend = frontend_config(a.frontend.as_deref(), &mut header)?;
    header.set("steps", a.steps.iter().map(|s| format_float(*s)).collect::<Vec<_>>().join(","));
    let config = PipelineConfig {
        frontend,
        signal_metrics: false,
        ..PipelineConfig::default()
    };
    let corpus = load_corpus(&a.manifest, &mut header)?;
    stage(format!("step study over {} grid entries", grid.len()));
    let rows = step_length_study(&corpus, &grid, &PatchStatsBackend, config, &a.steps)?;
    emit(a.out.as_deref(), &header, |w| StepRow::write_csv(&rows, w))
}

fn synth_corpus(a: &SynthCorpusArgs, seed: u64) -> CliResult {
    let manifest = write_synth_corpus(&a.out_dir, a.evaluation, a.background, a.seconds, seed)?;
    stage(format!(
        "{} clips written; manifest at {}",
        manifest.len(),
        a.out_dir.join("manifest.csv").display()
    ));
    Ok(())
}
