use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mgr_core::audio_io::read_wav;
use mgr_core::dataset::{
    balance, build_feature_dataset, load_features, random_split, save_features, select_fold_split, stratified_kfold,
    FeatureDataset, Manifest, SplitAssignment, SplitRatios,
};
use mgr_core::dsp::DspConfig;
use mgr_core::models::{experiment, ExperimentSpec, Model, ModelKind, ModelSpec};
use mgr_core::nn::checkpoint;
use mgr_core::nn::gradcheck::{check_layer_over_seeds, GradCheckConfig, GradCheckReport, LAYER_NAMES};
use mgr_core::nn::AdamConfig;
use mgr_core::synth::{default_genres, write_corpus, CorpusConfig};
use mgr_core::train::{evaluate, predict_clip, train_with, TrainConfig, TrainReport};

use crate::plot::training_curves_svg;
use crate::{
    Cli, Command, EvalArgs, ExtractArgs, GradcheckArgs, PredictArgs, ReportArgs, SplitArgs, SynthArgs, TrainArgs,
    UsageError,
};

const DEFAULT_SEGMENTS: usize = 30;

/// Optional defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    dsp: Option<DspConfig>,
    segments: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
}

/// Sidecar written next to a feature file so later stages know how it was made.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExtractionInfo {
    genres: Vec<String>,
    dsp: DspConfig,
    segments: usize,
}

/// Stored in the checkpoint's topology block.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    model: ModelSpec,
    experiment: Option<ExperimentSpec>,
    extraction: Option<ExtractionInfo>,
    seed: u64,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn sidecar(features: &Path) -> PathBuf {
    PathBuf::from(format!("{}.info.json", features.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
        None => Ok(FileConfig::default()),
    }
}

fn parse_ratios(s: &str) -> Result<SplitRatios> {
    s.parse::<SplitRatios>().map_err(|e| usage(format!("--ratios: {e}")))
}

fn load_dataset(path: &Path) -> Result<FeatureDataset> {
    load_features(path).with_context(|| format!("loading features {}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a, &cfg),
        Command::Split(a) => split(a),
        Command::Train(a) => train_cmd(a, &cfg),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Report(a) => report(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let all = default_genres();
    if a.genres < 2 || a.genres > all.len() {
        return Err(usage(format!("--genres must be in 2..={}", all.len())));
    }
    if a.clips_per_genre == 0 || !(a.clip_seconds > 0.0) {
        return Err(usage("--clips-per-genre and --clip-seconds must be positive"));
    }
    let cfg = CorpusConfig {
        genres: all.into_iter().take(a.genres).collect(),
        clips_per_genre: a.clips_per_genre,
        clip_seconds: a.clip_seconds,
        seed: a.seed,
    };
    let manifest = write_corpus(&cfg, &a.out)?;
    println!(
        "wrote {} clips in {} genres to {}",
        manifest.entries.len(),
        manifest.registry.len(),
        a.out.display()
    );
    Ok(())
}

fn extract(a: ExtractArgs, cfg: &FileConfig) -> Result<()> {
    let dsp = cfg.dsp.clone().unwrap_or_default();
    let segments = a.segments.or(cfg.segments).unwrap_or(DEFAULT_SEGMENTS);
    let mut manifest = Manifest::load(&a.manifest).with_context(|| format!("loading {}", a.manifest.display()))?;
    if let Some(n) = a.balance {
        manifest = balance(&manifest, n, a.seed)?;
    }
    let ds = build_feature_dataset(&manifest, segments, &dsp)?;
    save_features(&ds, &a.out)?;
    let info = ExtractionInfo {
        genres: manifest.registry.names().to_vec(),
        dsp,
        segments,
    };
    write_json(&sidecar(&a.out), &info)?;
    println!(
        "extracted {} samples of shape ({}, {}) from {} clips",
        ds.len(),
        ds.frames,
        ds.n_mfcc,
        manifest.entries.len()
    );
    Ok(())
}

fn make_split(
    ds: &FeatureDataset,
    ratios: SplitRatios,
    kfold: usize,
    fold: Option<usize>,
    seed: u64,
) -> Result<SplitAssignment> {
    if kfold == 0 {
        if fold.is_some() {
            return Err(usage("--fold needs --kfold"));
        }
        return Ok(random_split(ds, ratios, seed)?);
    }
    let folds = stratified_kfold(ds, kfold, seed)?;
    Ok(select_fold_split(&folds, fold.unwrap_or(kfold - 1), ratios, seed)?)
}

fn split(a: SplitArgs) -> Result<()> {
    let ratios = parse_ratios(&a.ratios)?;
    let ds = load_dataset(&a.features)?;
    let s = make_split(&ds, ratios, a.kfold, a.fold, a.seed)?;
    write_json(&a.out, &s)?;
    let (tr, va, te) = s.sizes();
    println!("train {tr} valid {va} test {te}");
    Ok(())
}

fn train_cmd(a: TrainArgs, cfg: &FileConfig) -> Result<()> {
    let kind: ModelKind = a.model.parse().map_err(usage)?;
    let exp = match a.experiment {
        Some(n) => Some(ExperimentSpec {
            seed: a.seed,
            ..experiment(n, kind).map_err(|e| usage(e.to_string()))?
        }),
        None => None,
    };
    let ds = load_dataset(&a.features)?;
    let info: Option<ExtractionInfo> = {
        let p = sidecar(&a.features);
        if p.exists() {
            Some(read_json(&p)?)
        } else {
            None
        }
    };
    let input_shape = [ds.frames, ds.n_mfcc];
    if let Some(e) = &exp {
        if e.input_shape != input_shape {
            bail!(
                "experiment {} expects ({}, {}) inputs but the features are ({}, {})",
                e.number,
                e.input_shape[0],
                e.input_shape[1],
                ds.frames,
                ds.n_mfcc
            );
        }
    }

    let split = match &a.split {
        Some(p) => {
            if a.ratios.is_some() || a.kfold > 0 || a.fold.is_some() {
                return Err(usage("--split cannot be combined with --ratios, --kfold or --fold"));
            }
            let s: SplitAssignment = read_json(p)?;
            s.validate(ds.len())?;
            s
        }
        None => {
            let ratios = match (&a.ratios, &exp) {
                (Some(r), _) => parse_ratios(r)?,
                (None, Some(e)) => SplitRatios::from_weights(e.ratios[0], e.ratios[1], e.ratios[2])?,
                (None, None) => parse_ratios("8:1:1")?,
            };
            make_split(&ds, ratios, a.kfold, a.fold, a.seed)?
        }
    };

    let spec = ModelSpec {
        kind,
        input_shape,
        num_classes: ds.num_classes,
        extra_dropout: exp.as_ref().is_some_and(|e| e.extra_dropout),
    };
    let tc = TrainConfig {
        epochs: a.epochs.or(cfg.epochs).or(exp.as_ref().map(|e| e.epochs)).unwrap_or(30),
        batch_size: a.batch_size.or(cfg.batch_size).unwrap_or(32),
        seed: a.seed,
        optimizer: AdamConfig {
            learning_rate: a
                .lr
                .or(cfg.learning_rate)
                .unwrap_or(AdamConfig::default().learning_rate),
            ..AdamConfig::default()
        },
    };
    if tc.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    let mut model = Model::<f32>::build(spec.clone(), a.seed)?;
    let mut opt = mgr_core::nn::Adam::new(tc.optimizer);
    let mut report = train_with(&mut model, &ds, &split, &tc, &mut opt)?;
    report.experiment = exp.clone();

    let meta = CheckpointMeta {
        model: spec,
        experiment: exp,
        extraction: info,
        seed: a.seed,
    };
    checkpoint::save(&a.out, &model.net, &serde_json::to_value(&meta)?, Some(&opt))
        .with_context(|| format!("writing {}", a.out.display()))?;
    let report_path = a
        .report
        .unwrap_or_else(|| PathBuf::from(format!("{}.report.json", a.out.display())));
    fs::write(&report_path, report.to_json() + "\n")?;
    for e in &report.epochs {
        eprintln!(
            "epoch {:>3}  train loss {:.4} acc {:.4}  valid loss {:.4} acc {:.4}  ({:.1}s)",
            e.epoch, e.train_loss, e.train_accuracy, e.valid_loss, e.valid_accuracy, e.seconds
        );
    }
    println!("test loss {:.6} accuracy {:.6}", report.test_loss, report.test_accuracy);
    Ok(())
}

fn load_model(path: &Path) -> Result<(Model<f32>, CheckpointMeta)> {
    let ck = checkpoint::load::<f32>(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let meta: CheckpointMeta = serde_json::from_value(ck.meta).context("checkpoint metadata")?;
    if ck.net.configs() != meta.model.layers()? {
        bail!("checkpoint topology does not match its model spec");
    }
    Ok((
        Model {
            spec: meta.model.clone(),
            net: ck.net,
        },
        meta,
    ))
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    part: String,
    samples: usize,
    loss: f64,
    accuracy: f64,
}

fn eval(a: EvalArgs) -> Result<()> {
    let (mut model, _) = load_model(&a.checkpoint)?;
    let ds = load_dataset(&a.features)?;
    let indices: Vec<u32> = match (a.part.as_str(), &a.split) {
        ("all", _) => (0..ds.len() as u32).collect(),
        (part @ ("train" | "valid" | "test"), Some(p)) => {
            let s: SplitAssignment = read_json(p)?;
            s.validate(ds.len())?;
            match part {
                "train" => s.train,
                "valid" => s.valid,
                _ => s.test,
            }
        }
        ("train" | "valid" | "test", None) => return Err(usage("--part other than all needs --split")),
        (other, _) => return Err(usage(format!("unknown --part {other:?}"))),
    };
    let (loss, accuracy) = evaluate(&mut model, &ds, &indices)?;
    let out = EvalOutput {
        part: a.part,
        samples: indices.len(),
        loss,
        accuracy,
    };
    println!("loss {loss:.6} accuracy {accuracy:.6}");
    println!("{}", serde_json::to_string(&out)?);
    if let Some(p) = &a.out {
        write_json(p, &out)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PredictOutput {
    genre_index: usize,
    genre: Option<String>,
    probabilities: Vec<f64>,
}

fn predict(a: PredictArgs) -> Result<()> {
    let (mut model, meta) = load_model(&a.checkpoint)?;
    let clip = read_wav(&a.wav).with_context(|| format!("reading {}", a.wav.display()))?;
    let dsp = meta.extraction.as_ref().map(|i| i.dsp.clone()).unwrap_or_default();
    let segments = a
        .segments
        .or(meta.extraction.as_ref().map(|i| i.segments))
        .unwrap_or(DEFAULT_SEGMENTS);
    let (genre_index, probabilities) = predict_clip(&mut model, &clip, segments, &dsp)?;
    let genre = meta
        .extraction
        .as_ref()
        .and_then(|i| i.genres.get(genre_index).cloned());
    let out = PredictOutput {
        genre_index,
        genre,
        probabilities,
    };
    match &out.genre {
        Some(g) => println!("{g} ({genre_index}) p = {:.4}", out.probabilities[genre_index]),
        None => println!("class {genre_index} p = {:.4}", out.probabilities[genre_index]),
    }
    println!("{}", serde_json::to_string(&out)?);
    if let Some(p) = &a.out {
        write_json(p, &out)?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let names: Vec<&str> = if a.layer == "all" {
        LAYER_NAMES.to_vec()
    } else if LAYER_NAMES.contains(&a.layer.as_str()) {
        vec![a.layer.as_str()]
    } else {
        return Err(usage(format!(
            "unknown --layer {:?}; expected all or one of {LAYER_NAMES:?}",
            a.layer
        )));
    };
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let base = GradCheckConfig {
        seed: a.seed,
        ..GradCheckConfig::default()
    };
    let mut rows: Vec<GradCheckReport> = Vec::new();
    println!(
        "{:<12} {:>12} {:>8} {:>8}  result",
        "layer", "max_rel_err", "checked", "excluded"
    );
    for name in names {
        let r = check_layer_over_seeds(name, a.seeds, &base)?;
        let checked: usize = r.tensors.iter().map(|t| t.checked).sum();
        let excluded: usize = r.tensors.iter().map(|t| t.excluded).sum();
        println!(
            "{:<12} {:>12.3e} {:>8} {:>8}  {}",
            name,
            r.max_rel_err(),
            checked,
            excluded,
            if r.passed() { "PASS" } else { "FAIL" }
        );
        rows.push(r);
    }
    if let Some(p) = &a.out {
        write_json(p, &rows)?;
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.layer.as_str()).collect();
    if !failed.is_empty() {
        bail!("gradient check failed for {}", failed.join(", "));
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let r = TrainReport::from_json(&text).with_context(|| format!("parsing {}", a.report.display()))?;
    let csv = PathBuf::from(format!("{}.csv", a.out.display()));
    let svg = PathBuf::from(format!("{}.svg", a.out.display()));
    fs::write(&csv, r.to_csv())?;
    fs::write(&svg, training_curves_svg(&r))?;
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}
