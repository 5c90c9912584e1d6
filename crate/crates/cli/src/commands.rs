//! The six subcommand implementations. All of them write whole files
//! in one shot (reports are serialized fully before any IO) and the
//! manifest is always the last file a generation run produces, so an
//! interrupted or failing run never leaves a dataset that looks
//! complete.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use contactq_core::activation::{build_multires, ActivationGrid};
use contactq_core::contact::{body_diagonal, detect_pairs, Scene};
use contactq_core::features::OracleThresholds;
use contactq_core::model::{
    score_input, train as train_model, Model, ModelWeights, NetConfig, TrainConfig,
};
use contactq_core::pointfile::{pair_csv, parse_pair_csv, parse_scene_csv};
use contactq_core::synthgen::{
    build_manifest, generate_pair, materialize_pair, rotation_sweep, scale_sweep,
    translation_sweep, BuildConfig, GenPlan, PairSpec,
};

use crate::dataset::{load_manifest, load_split_samples};
use crate::formats::{
    history_csv, sha256_hex, sweep_csv, to_json_text, DetectFile, DiskEntry, DiskManifest,
    EvalFile, ScoreFile, HISTORY_FILE, MANIFEST_FILE, POINTS_DIR, WEIGHTS_FILE,
};
use crate::{
    DetectArgs, EvalArgs, GenerateArgs, PlanKind, ScoreArgs, SplitKind, SweepArgs, SweepKind,
    TrainArgs,
};

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write to the given file, or to stdout when no path was given.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_weights(path: &Path) -> Result<(Model<f32>, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading weights {}", path.display()))?;
    let weights: ModelWeights = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing weights {}", path.display()))?;
    let model = Model::from_weights(&weights)?;
    Ok((model, sha256_hex(&bytes)))
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let plan = match args.plan {
        PlanKind::Default => GenPlan::default_plan(),
        PlanKind::Table => GenPlan::table_plan(),
    };
    let config = BuildConfig {
        augmentations: args.augmentations,
        train_fraction: args.train_fraction,
        seed: args.seed,
        thresholds: OracleThresholds::default(),
    };
    let manifest = build_manifest(&plan, &config)?;

    let points_dir = args.out.join(POINTS_DIR);
    fs::create_dir_all(&points_dir)
        .with_context(|| format!("creating {}", points_dir.display()))?;

    let mut entries = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let pair = materialize_pair(entry)?;
        let rel = format!("{POINTS_DIR}/pair_{:05}.csv", entry.id);
        write_file(&args.out.join(&rel), &pair_csv(&pair))?;
        entries.push(DiskEntry {
            entry: *entry,
            points_path: rel,
        });
    }

    let disk = DiskManifest {
        seed: manifest.seed,
        train_fraction: manifest.train_fraction,
        augmentations: manifest.augmentations,
        entries,
    };
    write_file(&args.out.join(MANIFEST_FILE), &to_json_text(&disk)?)?;
    println!(
        "wrote {} pairs ({} base) to {}",
        disk.entries.len(),
        plan.items.len(),
        args.out.display()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let manifest = load_manifest(&args.data)?;
    let net = NetConfig {
        coarse_res: args.coarse_res,
        fine_res: args.fine_res,
        head: args.head.into(),
        seed: args.seed,
        ..NetConfig::default()
    };
    let (train_set, val_set) =
        load_split_samples(&manifest, &args.data, net.coarse_res, net.fine_res)?;
    let tc = TrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        max_epochs: args.epochs,
        shuffle_seed: args.seed,
        ..TrainConfig::default()
    };

    let model = Model::<f32>::build(net)?;
    let outcome = train_model(model, &train_set, &val_set, &tc)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_file(
        &args.out.join(WEIGHTS_FILE),
        &to_json_text(&outcome.model.to_weights())?,
    )?;
    write_file(&args.out.join(HISTORY_FILE), &history_csv(&outcome.history))?;

    let last = outcome.history.last().expect("at least one epoch");
    let best = outcome
        .history
        .iter()
        .find(|h| h.epoch == outcome.best_epoch)
        .unwrap_or(last);
    println!(
        "trained {} epochs on {}+{} samples; kept epoch {} (val loss {:.4}, val accuracy {:.4})",
        outcome.history.len(),
        train_set.len(),
        val_set.len(),
        outcome.best_epoch,
        best.val_loss,
        best.val_accuracy
    );
    Ok(())
}

fn slice_csv(grid: &ActivationGrid) -> String {
    let r = grid.resolution();
    let z = r / 2;
    let mut out = String::new();
    for y in 0..r {
        let row: Vec<String> = (0..r)
            .map(|x| grid.state_at(x, y, z).as_u8().to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let (model, weights_sha256) = load_weights(&args.weights)?;
    let text = fs::read_to_string(&args.points)
        .with_context(|| format!("reading points {}", args.points.display()))?;
    let pair = parse_pair_csv(&text)
        .with_context(|| format!("parsing points {}", args.points.display()))?;
    let config = *model.config();
    let input = build_multires(&pair, config.coarse_res, config.fine_res)?;
    let report = score_input(&model, &input)?;

    if args.emit_grids {
        let dir = args
            .out
            .as_deref()
            .and_then(Path::parent)
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let stem = args
            .points
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pair".into());
        write_file(
            &dir.join(format!("{stem}_coarse_slice.csv")),
            &slice_csv(&input.coarse),
        )?;
        write_file(
            &dir.join(format!("{stem}_fine_slice.csv")),
            &slice_csv(&input.fine),
        )?;
    }

    let file = ScoreFile {
        points_path: args.points.display().to_string(),
        weights_sha256,
        config,
        report,
    };
    emit(&args.out, &to_json_text(&file)?)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let (model, _) = load_weights(&args.weights)?;
    let config = *model.config();
    let specs: Vec<PairSpec> = match args.kind {
        SweepKind::Translate => translation_sweep(args.steps),
        SweepKind::Rotate => rotation_sweep(args.steps),
        SweepKind::Scale => scale_sweep(args.steps),
    };

    let mut rows = Vec::with_capacity(specs.len());
    for spec in &specs {
        let pair = generate_pair(spec)?;
        let input = build_multires(&pair, config.coarse_res, config.fine_res)?;
        let report = score_input(&model, &input)?;
        let param = match args.kind {
            SweepKind::Translate => spec.gap,
            SweepKind::Rotate => spec.angle_deg,
            SweepKind::Scale => spec.scale_b,
        };
        rows.push((param, report.probabilities, report.score));
    }
    emit(&args.out, &sweep_csv(&rows))
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    let text = fs::read_to_string(&args.points)
        .with_context(|| format!("reading scene {}", args.points.display()))?;
    let surfaces = parse_scene_csv(&text)
        .with_context(|| format!("parsing scene {}", args.points.display()))?;
    let scene = Scene::new(surfaces)?;
    let pairs = detect_pairs(&scene, args.fraction)?;
    let diagonal = body_diagonal(&scene);
    let file = DetectFile {
        points_path: args.points.display().to_string(),
        fraction: args.fraction,
        body_diagonal: diagonal,
        tolerance: args.fraction * diagonal,
        pairs,
    };
    emit(&args.out, &to_json_text(&file)?)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let (model, weights_sha256) = load_weights(&args.weights)?;
    let config = *model.config();
    let manifest = load_manifest(&args.data)?;
    let (train_set, val_set) =
        load_split_samples(&manifest, &args.data, config.coarse_res, config.fine_res)?;
    let (samples, split) = match args.split {
        SplitKind::Train => (train_set, "train"),
        SplitKind::Validation => (val_set, "validation"),
        SplitKind::All => {
            let mut all = train_set;
            all.extend(val_set);
            (all, "all")
        }
    };
    let report = contactq_core::model::evaluate(&model, &samples, args.batch)?;
    let file = EvalFile {
        data_dir: args.data.display().to_string(),
        split: split.into(),
        weights_sha256,
        config,
        report,
    };
    emit(&args.out, &to_json_text(&file)?)
}
