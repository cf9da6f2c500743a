use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use fssei::baseline::{instantaneous_features, InstFeatureExtractor, FEATURE_NAMES};
use fssei::complex_nn::EmbeddingModel;
use fssei::fewshot::{monte_carlo_cached, FeatureCache, FeatureExtractor, FewShotConfig, FewShotPlan, MonteCarloStats, Standardize};
use fssei::metrics::{pca_project, silhouette};
use fssei::rng::derive_seed;
use fssei::signal_sim::{generate_dataset, make_emitter_profile, read_dataset, write_dataset, DatasetRole, LabeledDataset};
use fssei::trainer::{load_checkpoint, save_checkpoint, train_embedding_with, EpochTelemetry, TrainConfig};

use crate::config::{load_json, load_or_default, AblateConfig, SimConfig};
use crate::manifest::RunManifest;
use crate::{AblateArgs, CliError, EvalArgs, FeaturesArgs, ProjectArgs, SimulateArgs, TrainArgs};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg: SimConfig = load_or_default(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    create_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("simulate", &cfg)?;
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }
    let mut profiles_out = Vec::new();
    for (name, group, role) in [
        ("auxiliary", &cfg.auxiliary, DatasetRole::Auxiliary),
        ("pool", &cfg.pool, DatasetRole::Pool),
    ] {
        let profiles: Vec<_> = group.seeds().map(|s| make_emitter_profile(s, cfg.severity)).collect();
        let seed = derive_seed(cfg.seed, name);
        let data = generate_dataset(&profiles, group.bursts_per_emitter, cfg.snr_db, seed, &cfg.burst, role)?;
        let path = args.out_dir.join(format!("{name}.cvsei"));
        write_dataset(&data, &path)?;
        log::info!("wrote {} bursts of {} emitters to {}", data.len(), group.emitters, path.display());
        manifest.seeds.insert(name.to_string(), seed);
        manifest.output(&path)?;
        profiles_out.push(serde_json::json!({ "group": name, "profiles": profiles }));
    }
    let profiles_path = args.out_dir.join("emitters.json");
    write_json(&profiles_path, &profiles_out)?;
    manifest.output(&profiles_path)?;
    manifest.seeds.insert("master".into(), cfg.seed);
    manifest.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.write(&args.out_dir.join("manifest.json"))
}

fn telemetry_rows(t: &[EpochTelemetry]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = [
        "epoch",
        "train_loss",
        "val_loss",
        "train_softmax",
        "train_triplet",
        "train_center",
        "val_softmax",
        "val_triplet",
        "val_center",
    ]
    .map(String::from)
    .to_vec();
    let rows = t
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.train.total.to_string(),
                opt(e.val.map(|v| v.total)),
                e.train.softmax.to_string(),
                opt(e.train.triplet),
                opt(e.train.center),
                opt(e.val.map(|v| v.softmax)),
                opt(e.val.and_then(|v| v.triplet)),
                opt(e.val.and_then(|v| v.center)),
            ]
        })
        .collect();
    (header, rows)
}

fn train_one(
    aux: &LabeledDataset,
    cfg: &TrainConfig,
    out: &Path,
    manifest: &mut RunManifest,
    label: &str,
) -> Result<EmbeddingModel, CliError> {
    let started = Instant::now();
    let outcome = train_embedding_with(aux, cfg, |e| {
        log::info!("[{label}] epoch {} train {:.5}", e.epoch, e.train.total);
    })?;
    save_checkpoint(&outcome.model, out)?;
    let csv_path = sibling(out, ".telemetry.csv");
    let (header, rows) = telemetry_rows(&outcome.telemetry);
    write_rows(&csv_path, &header, &rows)?;
    manifest.output(out)?;
    manifest.output(&csv_path)?;
    manifest.timings_s.insert(format!("train_{label}"), started.elapsed().as_secs_f64());
    Ok(outcome.model)
}

const DESK_NOTE: &str = "desk schedule: 30 epochs, eta 0.05, alpha 0.5";

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg: TrainConfig =
        if args.desk { TrainConfig::desk() } else { load_or_default(args.config.as_deref())? };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.eta {
        cfg.eta = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.lambda {
        cfg.loss.lambda = v;
    }
    if let Some(v) = &args.variant {
        cfg.loss = cfg.loss.with_variant(v)?;
    }
    let aux = read_dataset(&args.data)?;
    let mut manifest = RunManifest::new("train", &cfg)?;
    manifest.input(&args.data)?;
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }
    manifest.seeds.insert("train".into(), cfg.seed);
    if args.desk {
        manifest.notes.push(DESK_NOTE.into());
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    train_one(&aux, &cfg, &args.out, &mut manifest, cfg.loss.variant_name())?;
    manifest.write(&sibling(&args.out, ".manifest.json"))
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    ways: usize,
    shots: usize,
    test_per_class: usize,
    ensemble_size: usize,
    extractor: &'a str,
    classes: Vec<usize>,
    stats: &'a MonteCarloStats,
    /// Silhouette coefficient of each member's test-set features.
    silhouette: Vec<f64>,
    confusion: Vec<Vec<usize>>,
}

fn load_members(paths: &[PathBuf], manifest: &mut RunManifest) -> Result<Vec<EmbeddingModel>, CliError> {
    paths
        .iter()
        .map(|p| {
            manifest.input(p)?;
            Ok(load_checkpoint(p)?)
        })
        .collect()
}

fn test_silhouettes(cache: &FeatureCache, plan: &FewShotPlan) -> Result<Vec<f64>, CliError> {
    (0..cache.members())
        .map(|m| Ok(silhouette(&cache.rows_of(m, &plan.test), &plan.test_labels)?.sc))
        .collect()
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if args.checkpoints.is_empty() && !args.baseline {
        return Err(CliError::Usage("give at least one --checkpoint or --baseline".into()));
    }
    let mut cfg: FewShotConfig = load_or_default(args.config.as_deref())?;
    cfg.ways = args.ways.unwrap_or(cfg.ways);
    cfg.shots = args.shots.unwrap_or(cfg.shots);
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    cfg.test_per_class = args.test_per_class.unwrap_or(cfg.test_per_class);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.ensemble_size = if args.baseline { 1 } else { args.checkpoints.len() };
    if args.baseline {
        cfg.lr.standardize = Standardize::PerFeature;
    }
    let pool = read_dataset(&args.data)?;
    let mut manifest = RunManifest::new("eval", &cfg)?;
    manifest.input(&args.data)?;
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }
    manifest.seeds.insert("fewshot".into(), cfg.seed);
    let models = load_members(&args.checkpoints, &mut manifest)?;
    let members: Vec<&dyn FeatureExtractor> = if args.baseline {
        vec![&InstFeatureExtractor]
    } else {
        models.iter().map(|m| m as &dyn FeatureExtractor).collect()
    };
    create_dir(&args.out_dir)?;
    let plan = FewShotPlan::for_config(&pool, &cfg)?;
    let cache = FeatureCache::new(&members, &pool)?;
    let result = monte_carlo_cached(&cache, &plan, &cfg)?;
    let summary = EvalSummary {
        ways: cfg.ways,
        shots: cfg.shots,
        test_per_class: cfg.test_per_class,
        ensemble_size: members.len(),
        extractor: if args.baseline { "baseline" } else { "embedding" },
        classes: result.classes.clone(),
        stats: &result.stats,
        silhouette: test_silhouettes(&cache, &plan)?,
        confusion: result.confusion.clone(),
    };
    let summary_path = args.out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    let trials_path = args.out_dir.join("trials.csv");
    let rows: Vec<Vec<String>> =
        result.stats.accuracies.iter().enumerate().map(|(t, a)| vec![t.to_string(), a.to_string()]).collect();
    write_rows(&trials_path, &["trial".into(), "accuracy".into()], &rows)?;
    manifest.output(&summary_path)?;
    manifest.output(&trials_path)?;
    manifest.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.write(&args.out_dir.join("manifest.json"))?;
    println!(
        "{}-way {}-shot, M={}: mean accuracy {:.4} over {} trials",
        cfg.ways,
        cfg.shots,
        members.len(),
        result.stats.mean,
        result.stats.trials
    );
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    variant: String,
    silhouette: f64,
    shots: Vec<usize>,
    stats: Vec<MonteCarloStats>,
}

pub fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg: AblateConfig = match &args.config {
        Some(p) => load_json(p)?,
        None => AblateConfig::default(),
    };
    if let Some(s) = &args.shots {
        cfg.shots = s.clone();
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(t) = args.trials {
        cfg.fewshot.trials = t;
    }
    if let Some(seed) = args.seed {
        cfg.train.seed = derive_seed(seed, "train");
        cfg.fewshot.seed = derive_seed(seed, "fewshot");
    }
    if cfg.shots.is_empty() || cfg.variants.is_empty() {
        return Err(CliError::Config("shots and variants must be non-empty".into()));
    }
    cfg.fewshot.ensemble_size = 1;
    let aux = read_dataset(&args.aux)?;
    let pool = read_dataset(&args.pool)?;
    let mut manifest = RunManifest::new("ablate", &cfg)?;
    manifest.input(&args.aux)?;
    manifest.input(&args.pool)?;
    manifest.seeds.insert("train".into(), cfg.train.seed);
    manifest.seeds.insert("fewshot".into(), cfg.fewshot.seed);
    if args.config.is_none() {
        manifest.notes.push(DESK_NOTE.into());
    }
    create_dir(&args.out_dir)?;

    let mut table = Vec::new();
    for variant in &cfg.variants {
        let mut tcfg = cfg.train.clone();
        tcfg.loss = tcfg.loss.with_variant(variant)?;
        let name = tcfg.loss.variant_name();
        let model = train_one(&aux, &tcfg, &args.out_dir.join(format!("{name}.ckpt")), &mut manifest, name)?;
        let members: Vec<&dyn FeatureExtractor> = vec![&model];
        let cache = FeatureCache::new(&members, &pool)?;
        let mut stats = Vec::new();
        let mut sc = None;
        for &k in &cfg.shots {
            let fcfg = FewShotConfig { shots: k, ..cfg.fewshot.clone() };
            let plan = FewShotPlan::for_config(&pool, &fcfg)?;
            if sc.is_none() {
                sc = Some(test_silhouettes(&cache, &plan)?[0]);
            }
            let r = monte_carlo_cached(&cache, &plan, &fcfg)?;
            log::info!("[{name}] {k}-shot mean accuracy {:.4}", r.stats.mean);
            stats.push(r.stats);
        }
        table.push(AblationRow { variant: name.to_string(), silhouette: sc.unwrap_or(0.0), shots: cfg.shots.clone(), stats });
    }

    let mut header = vec!["variant".to_string(), "silhouette".to_string()];
    header.extend(cfg.shots.iter().map(|k| format!("acc_{k}shot")));
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            let mut row = vec![r.variant.clone(), r.silhouette.to_string()];
            row.extend(r.stats.iter().map(|s| s.mean.to_string()));
            row
        })
        .collect();
    let csv_path = args.out_dir.join("ablation.csv");
    write_rows(&csv_path, &header, &rows)?;
    let json_path = args.out_dir.join("ablation.json");
    write_json(&json_path, &table)?;
    manifest.output(&csv_path)?;
    manifest.output(&json_path)?;
    manifest.timings_s.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.write(&args.out_dir.join("manifest.json"))
}

pub fn features(args: &FeaturesArgs) -> Result<(), CliError> {
    let data = read_dataset(&args.data)?;
    let mut header = vec!["label".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    let mut degenerate = 0usize;
    let mut rows = Vec::with_capacity(data.len());
    for (s, &l) in data.signals.iter().zip(&data.labels) {
        let f = instantaneous_features(s)?;
        degenerate += f.degenerate.iter().filter(|&&d| d).count();
        let mut row = vec![l.to_string()];
        row.extend(f.values.iter().map(|v| v.to_string()));
        rows.push(row);
    }
    if degenerate > 0 {
        log::warn!("{degenerate} feature components had zero variance; their skewness and kurtosis were set to 0");
    }
    write_rows(&args.out, &header, &rows)?;
    let cfg = serde_json::json!({ "data": args.data });
    let mut manifest = RunManifest::new("features", &cfg)?;
    manifest.input(&args.data)?;
    manifest.output(&args.out)?;
    manifest.write(&sibling(&args.out, ".manifest.json"))
}

pub fn project(args: &ProjectArgs) -> Result<(), CliError> {
    let data = read_dataset(&args.data)?;
    let cfg = serde_json::json!({ "data": args.data, "checkpoint": args.checkpoint, "baseline": args.baseline });
    let mut manifest = RunManifest::new("project", &cfg)?;
    manifest.input(&args.data)?;
    let features = match &args.checkpoint {
        Some(p) if !args.baseline => {
            manifest.input(p)?;
            load_checkpoint(p)?.extract(&data.signals)?
        }
        _ => InstFeatureExtractor.extract(&data.signals)?,
    };
    let xy = pca_project(&features)?;
    let rows: Vec<Vec<String>> = xy
        .outer_iter()
        .zip(&data.labels)
        .map(|(r, l)| vec![r[0].to_string(), r[1].to_string(), l.to_string()])
        .collect();
    write_rows(&args.out, &["x".into(), "y".into(), "label".into()], &rows)?;
    manifest.output(&args.out)?;
    manifest.write(&sibling(&args.out, ".manifest.json"))
}
