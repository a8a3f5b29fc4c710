//! Pipeline stages. Each stage reads the previous stage's artifacts from the
//! output directory, so `run` and a chain of single-stage calls produce the
//! same files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use znnrad::alsoa::optimize;
use znnrad::diezin::{predict, residual_trace, train, DieznnError, LinearSystem, Variant};
use znnrad::ewt_features::extract_features;
use znnrad::ingest::{group_of, load_dataset, split_groups};
use znnrad::metrics::{accuracy, confusion, emit_report, traces_svg, EvalReport, SampleOutcome};
use znnrad::ukf_denoise::denoise_image;
use znnrad::{seed, DieznnParams, Label, NoiseSpec};

use crate::artifacts::{
    features_csv, read_features, series_csv, write_json, write_text, ArtifactEntry, DenoisedSet, FeatureRow, Gains,
    ModelArtifact, RunManifest, StageTiming, TuneArtifact, ARTIFACT_VERSION,
};
use crate::config::{DatasetSource, PipelineConfig};
use crate::error::CliError;
use crate::synthetic;

pub const DATASET_DIR: &str = "dataset";
pub const DENOISED_FILE: &str = "denoised.bin";
pub const FEATURES_FILE: &str = "features.csv";
pub const TUNE_FILE: &str = "tune.json";
pub const TUNE_HISTORY_FILE: &str = "tune_history.csv";
pub const MODEL_FILE: &str = "model.json";
pub const RESIDUAL_FILE: &str = "residual.csv";
pub const NOISE_CSV_FILE: &str = "noise_traces.csv";
pub const NOISE_SVG_FILE: &str = "noise_traces.svg";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Key separating the tuning hold-out from the train/test split.
const TUNE_SPLIT_KEY: u64 = 0x7E57;

/// Validated configuration plus the worker pool for one invocation.
pub struct Context {
    pub config: PipelineConfig,
    pub digest: String,
    pub jobs: usize,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(config: PipelineConfig, jobs: usize) -> Result<Self, CliError> {
        config.validate()?;
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
        let digest = config.digest();
        Ok(Self { config, digest, jobs, pool })
    }

    pub fn output(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn ensure_output(&self) -> Result<(), CliError> {
        fs::create_dir_all(self.output()).map_err(|e| CliError::io(self.output(), e))
    }

    fn check_digest(&self, path: &Path, found: Option<&str>) {
        if found != Some(self.digest.as_str()) {
            log::warn!("{} was produced by a different configuration ({found:?})", path.display());
        }
    }
}

/// The image directory to ingest, generating phantoms first if configured.
pub fn dataset_root(ctx: &Context, explicit: Option<&Path>) -> Result<PathBuf, CliError> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    match &ctx.config.dataset {
        DatasetSource::Directory(p) => Ok(p.clone()),
        DatasetSource::Synthetic => {
            let root = ctx.path(DATASET_DIR);
            synthetic::generate(&root, &ctx.config.synthetic, ctx.config.seed)?;
            Ok(root)
        }
    }
}

/// Ingest, augment and denoise every image.
pub fn stage_denoise(ctx: &Context, dataset: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    ctx.ensure_output()?;
    let root = dataset_root(ctx, dataset)?;
    let loaded = load_dataset::<f64>(&root)?;
    for s in &loaded.skipped {
        log::warn!("skipped {}: {}", s.path.display(), s.reason);
    }
    let data = loaded.dataset.augmented(ctx.config.augment_multiplier, ctx.config.seed)?;
    let params = ctx.config.ukf;
    let samples = ctx.pool.install(|| {
        data.into_samples()
            .into_par_iter()
            .map(|mut s| {
                s.image = denoise_image(&s.image, &params)?;
                Ok(s)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let path = ctx.path(DENOISED_FILE);
    DenoisedSet { config_digest: ctx.digest.clone(), samples }.write(&path)?;
    Ok(vec![path])
}

pub fn stage_extract(ctx: &Context, input: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    ctx.ensure_output()?;
    let input = input.map_or_else(|| ctx.path(DENOISED_FILE), Path::to_path_buf);
    let set = DenoisedSet::read(&input)?;
    ctx.check_digest(&input, Some(&set.config_digest));
    let settings = &ctx.config.features;
    let rows = ctx.pool.install(|| {
        set.samples
            .par_iter()
            .map(|s| {
                let features = extract_features(&s.image, settings)
                    .map_err(|e| CliError::stage("extract", format!("{}: {e}", s.source_id)))?;
                Ok(FeatureRow { source_id: s.source_id.clone(), features: features.with_label(s.label) })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let path = ctx.path(FEATURES_FILE);
    write_text(&path, features_csv(&rows, &ctx.digest))?;
    Ok(vec![path])
}

fn load_features(ctx: &Context, input: Option<&Path>) -> Result<Vec<FeatureRow>, CliError> {
    let path = input.map_or_else(|| ctx.path(FEATURES_FILE), Path::to_path_buf);
    let (rows, digest) = read_features(&path)?;
    ctx.check_digest(&path, digest.as_deref());
    Ok(rows)
}

/// Group-aware `(train, test)` partition of feature rows.
pub fn split_rows(rows: &[FeatureRow], test_fraction: f64, seed: u64) -> Result<(Vec<FeatureRow>, Vec<FeatureRow>), CliError> {
    let plan = split_groups(rows.iter().map(|r| (group_of(&r.source_id), r.label())), test_fraction, seed)?;
    let (test, train) = rows.iter().cloned().partition(|r| plan.is_test(group_of(&r.source_id)));
    Ok((train, test))
}

fn labelled(rows: &[FeatureRow]) -> Vec<znnrad::FeatureVector> {
    rows.iter().map(|r| r.features).collect()
}

fn gains_params(base: &DieznnParams, g: Gains) -> DieznnParams {
    DieznnParams { eta: g.eta, phi: g.phi, mu: g.mu, ..*base }
}

/// ALSOA over `(eta, phi, mu)`; fitness is `1 - accuracy` on a held-out
/// subset of the training groups.
pub fn stage_tune(ctx: &Context, features: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let settings = ctx
        .config
        .alsoa
        .ok_or_else(|| CliError::Config("tune needs an [alsoa] section in the config".into()))?;
    ctx.ensure_output()?;
    let rows = load_features(ctx, features)?;
    let (train_rows, _) = split_rows(&rows, ctx.config.test_fraction, ctx.config.seed)?;
    let inner_seed = seed::mix(ctx.config.seed, TUNE_SPLIT_KEY, 0);
    let (fit_rows, val_rows) = split_rows(&train_rows, settings.validation_fraction, inner_seed)?;
    let fit = labelled(&fit_rows);
    let base = ctx.config.dieznn;
    let noise = ctx.config.noise;
    let objective = |x: &[f64]| -> Result<f64, DieznnError> {
        let params = gains_params(&base, Gains { eta: x[0], phi: x[1], mu: x[2] });
        let model = train(&fit, &params, &noise)?;
        let truth: Vec<Label> = val_rows.iter().map(FeatureRow::label).collect();
        let predicted: Vec<Label> = val_rows.iter().map(|r| predict(&model, &r.features).0).collect();
        let counts = confusion(&truth, &predicted).map_err(|e| DieznnError::Training(e.to_string()))?;
        Ok(1.0 - accuracy::<f64>(&counts).map_err(|e| DieznnError::Training(e.to_string()))?)
    };
    let result = ctx.pool.install(|| optimize(&objective, &settings.alsoa(ctx.config.seed)))?;
    let p = &result.best_position;
    let artifact = TuneArtifact {
        format_version: ARTIFACT_VERSION,
        config_digest: ctx.digest.clone(),
        best: Gains { eta: p[0], phi: p[1], mu: p[2] },
        best_fitness: result.best_fitness,
        history: result.history.clone(),
    };
    let json = ctx.path(TUNE_FILE);
    write_json(&json, &artifact)?;
    let csv = ctx.path(TUNE_HISTORY_FILE);
    let rows = result.history.iter().enumerate().map(|(k, &f)| (k.to_string(), f));
    write_text(&csv, series_csv("iteration,best_fitness", rows, &ctx.digest))?;
    Ok(vec![json, csv])
}

/// Trains on the training split. With an `[alsoa]` section the gains come
/// from the tune artifact.
pub fn stage_train(ctx: &Context, features: Option<&Path>, tune: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    ctx.ensure_output()?;
    let rows = load_features(ctx, features)?;
    let (train_rows, _) = split_rows(&rows, ctx.config.test_fraction, ctx.config.seed)?;
    let mut params = ctx.config.dieznn;
    if ctx.config.alsoa.is_some() || tune.is_some() {
        let path = tune.map_or_else(|| ctx.path(TUNE_FILE), Path::to_path_buf);
        let tuned = TuneArtifact::read(&path)?;
        ctx.check_digest(&path, Some(&tuned.config_digest));
        params = gains_params(&params, tuned.best);
    }
    let model = train(&labelled(&train_rows), &params, &ctx.config.noise)?;
    let residuals = model.training_trace.iter().map(|&(s, r)| (format!("{s:.16e}"), r));
    let csv = ctx.path(RESIDUAL_FILE);
    write_text(&csv, series_csv("clock,residual", residuals, &ctx.digest))?;
    let json = ctx.path(MODEL_FILE);
    write_json(&json, &ModelArtifact { format_version: ARTIFACT_VERSION, config_digest: ctx.digest.clone(), model })?;
    Ok(vec![json, csv])
}

pub fn evaluate_rows(ctx: &Context, rows: &[FeatureRow], model: &ModelArtifact) -> Result<EvalReport, CliError> {
    let (_, test_rows) = split_rows(rows, ctx.config.test_fraction, ctx.config.seed)?;
    let outcomes = test_rows
        .iter()
        .map(|r| {
            let (predicted, score) = predict(&model.model, &r.features);
            SampleOutcome { source_id: r.source_id.clone(), truth: r.label(), predicted, score }
        })
        .collect();
    Ok(EvalReport::from_outcomes(outcomes, ctx.config.seed, ctx.digest.clone())?)
}

pub fn stage_evaluate(ctx: &Context, features: Option<&Path>, model: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    ctx.ensure_output()?;
    let rows = load_features(ctx, features)?;
    let model_path = model.map_or_else(|| ctx.path(MODEL_FILE), Path::to_path_buf);
    let model = ModelArtifact::read(&model_path)?;
    ctx.check_digest(&model_path, Some(&model.config_digest));
    let report = evaluate_rows(ctx, &rows, &model)?;
    log::info!("accuracy {:.4}, roc {:.4}", report.accuracy, report.roc);
    Ok(emit_report(&report, ctx.output())?)
}

pub type Trace = (String, Vec<(f64, f64)>);

/// Residual traces of every variant under no, constant and linear noise,
/// on the scalar system `1 * w = 1`.
pub fn noise_traces(ctx: &Context) -> Result<Vec<Trace>, CliError> {
    let system = LinearSystem::scalar(1.0, 1.0)?;
    let ne = ctx.config.noise_experiment;
    let noises = [("none", NoiseSpec::none()), ("constant", NoiseSpec::constant(ne.c0)), ("linear", NoiseSpec::linear(ne.c0, ne.c1))];
    let mut out = Vec::new();
    for variant in Variant::ALL {
        let params = ctx.config.dieznn.with_variant(variant);
        for (name, noise) in &noises {
            let trace = residual_trace(&system, &params, noise)
                .map_err(|e| CliError::stage("noise-experiment", format!("{}/{name}: {e}", variant.as_str())))?;
            out.push((format!("{}/{name}", variant.as_str()), trace));
        }
    }
    Ok(out)
}

pub fn stage_noise_experiment(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    ctx.ensure_output()?;
    let traces = noise_traces(ctx)?;
    let mut csv = String::from("variant,noise,clock,residual\n");
    for (name, trace) in &traces {
        let (variant, noise) = name.split_once('/').expect("trace names are variant/noise");
        for (s, r) in trace {
            csv.push_str(&format!("{variant},{noise},{s:.16e},{r:.16e}\n"));
        }
    }
    csv.push_str(&crate::artifacts::digest_line(&ctx.digest));
    let csv_path = ctx.path(NOISE_CSV_FILE);
    write_text(&csv_path, csv)?;
    let svg_path = ctx.path(NOISE_SVG_FILE);
    write_text(&svg_path, traces_svg(&traces, &ctx.digest))?;
    Ok(vec![csv_path, svg_path])
}

fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Full pipeline: denoise, extract, optional tune, train, evaluate.
pub fn cmd_run(ctx: &Context) -> Result<RunManifest, CliError> {
    ctx.ensure_output()?;
    let config_path = ctx.path(CONFIG_FILE);
    write_text(&config_path, ctx.config.to_toml())?;
    let mut produced = vec![config_path];
    let mut timings = Vec::new();
    let mut timed = |name: &str, f: &dyn Fn() -> Result<Vec<PathBuf>, CliError>| -> Result<(), CliError> {
        let start = Instant::now();
        produced.extend(f()?);
        timings.push(StageTiming { stage: name.to_string(), seconds: start.elapsed().as_secs_f64() });
        Ok(())
    };
    timed("denoise", &|| stage_denoise(ctx, None))?;
    timed("extract", &|| stage_extract(ctx, None))?;
    if ctx.config.alsoa.is_some() {
        timed("tune", &|| stage_tune(ctx, None))?;
    }
    timed("train", &|| stage_train(ctx, None, None))?;
    timed("evaluate", &|| stage_evaluate(ctx, None, None))?;

    let artifacts = produced
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(ctx.output()).unwrap_or(p);
            Ok(ArtifactEntry { path: rel.display().to_string(), sha256: file_sha256(p)? })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = RunManifest {
        format_version: ARTIFACT_VERSION,
        seed: ctx.config.seed,
        config_digest: ctx.digest.clone(),
        jobs: ctx.jobs,
        timings,
        artifacts,
    };
    write_json(&ctx.path(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
