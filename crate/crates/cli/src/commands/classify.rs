//! `classify train|eval`: signature classifiers over a split manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use nilmkit_core::checkpoint::{load_checkpoint, save_checkpoint};
use nilmkit_core::classifier::{
    build_compact_cnn, build_simple_dnn, evaluate_classifier, train_classifier,
    ClassifierTrainConfig, HeadPreset, LabeledImage,
};
use nilmkit_core::metrics::{write_confusion_csv, write_confusion_svg};
use nilmkit_core::signature::{Split, SpectrogramImage};

use super::signatures::load_split_side;
use super::{require_exists, sibling, Globals};
use crate::manifest::{config_repr, write_manifest};
use crate::{ClassifyAction, ClassifyEvalArgs, ClassifyTrainArgs};

pub fn run(globals: &Globals, action: ClassifyAction) -> Result<()> {
    match action {
        ClassifyAction::Train(args) => train(globals, args),
        ClassifyAction::Eval(args) => eval(globals, args),
    }
}

fn to_labeled(
    images: &[(String, SpectrogramImage)],
    registry: &[String],
) -> Result<Vec<LabeledImage>> {
    images
        .iter()
        .map(|(label, img)| {
            let class_idx = registry
                .iter()
                .position(|l| l == label)
                .with_context(|| format!("label {label:?} missing from registry"))?;
            Ok(LabeledImage {
                pixels: img.pixels.clone(),
                width: img.width,
                height: img.height,
                class_idx,
            })
        })
        .collect()
}

fn write_registry(path: &Path, registry: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,label")?;
    for (i, label) in registry.iter().enumerate() {
        writeln!(w, "{i},{label}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_registry(path: &Path) -> Result<Vec<String>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().context("empty registry")??;
    if header.trim() != "index,label" {
        bail!("unexpected registry header {header:?}");
    }
    let mut registry = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (_, label) = line
            .split_once(',')
            .with_context(|| format!("bad registry line {line:?}"))?;
        registry.push(label.to_string());
    }
    Ok(registry)
}

fn train(globals: &Globals, args: ClassifyTrainArgs) -> Result<()> {
    require_exists(&args.manifest, "split manifest")?;
    let cc = &globals.config.classify;
    let config = ClassifierTrainConfig {
        epochs: args.epochs.unwrap_or(cc.epochs),
        batch_size: args.batch_size.unwrap_or(cc.batch_size),
        learning_rate: args.lr.unwrap_or(cc.learning_rate),
        seed: globals.seed,
    };
    let (train_images, registry) = load_split_side(&args.manifest, Split::Train)?;
    let labeled = to_labeled(&train_images, &registry)?;

    let mut network = match args.model.to_ascii_lowercase().as_str() {
        "simple-dnn" => build_simple_dnn(globals.seed),
        "compact-cnn" => {
            let preset = args
                .head
                .as_deref()
                .and_then(HeadPreset::parse)
                .context("compact-cnn needs --head resnet|alexnet|densenet")?;
            build_compact_cnn(preset, globals.seed)?
        }
        other => bail!("unknown model {other:?} (use simple-dnn or compact-cnn)"),
    };
    println!(
        "training {} on {} images, {} classes, lr {}",
        args.model,
        labeled.len(),
        registry.len(),
        config.learning_rate
    );
    let report = train_classifier(&mut network, &labeled, registry.len(), &config)?;
    println!(
        "train accuracy: first epoch {:.2}%, last epoch {:.2}%",
        report.epoch_train_accuracy.first().unwrap_or(&0.0),
        report.epoch_train_accuracy.last().unwrap_or(&0.0)
    );

    let ckpt = args
        .out
        .unwrap_or_else(|| globals.out_dir.join("classifier.ckpt"));
    save_checkpoint(&ckpt, &network)?;
    let registry_path = sibling(&ckpt, ".classes.csv");
    write_registry(&registry_path, &registry)?;
    let curves_path = sibling(&ckpt, ".curves.csv");
    {
        let mut w = BufWriter::new(File::create(&curves_path)?);
        writeln!(w, "epoch,loss,train_accuracy")?;
        for (i, (loss, acc)) in report
            .epoch_losses
            .iter()
            .zip(&report.epoch_train_accuracy)
            .enumerate()
        {
            writeln!(w, "{i},{loss:.6},{acc:.6}")?;
        }
        w.flush()?;
    }

    let params = vec![
        ("stage", "classify-train".to_string()),
        ("model", args.model.clone()),
        ("head", format!("{:?}", args.head)),
        ("manifest", args.manifest.display().to_string()),
        ("epochs", config.epochs.to_string()),
        ("batch_size", config.batch_size.to_string()),
        ("lr", format!("{}", config.learning_rate)),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "classify-train",
        globals.seed,
        &config_repr(&params),
        &[ckpt.clone(), registry_path, curves_path],
    )?;
    println!("checkpoint: {}", ckpt.display());
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn eval(globals: &Globals, args: ClassifyEvalArgs) -> Result<()> {
    require_exists(&args.ckpt, "classifier checkpoint")?;
    require_exists(&args.manifest, "split manifest")?;
    let network = load_checkpoint(&args.ckpt)?;
    let registry = read_registry(&sibling(&args.ckpt, ".classes.csv"))?;
    let (test_images, _) = load_split_side(&args.manifest, Split::Test)?;
    let labeled = to_labeled(&test_images, &registry)?;
    let (matrix, metrics) = evaluate_classifier(&network, &labeled, registry.len())?;

    let confusion_csv = globals.out_dir.join("classify-confusion.csv");
    let confusion_svg = globals.out_dir.join("classify-confusion.svg");
    write_confusion_csv(&confusion_csv, &matrix, &registry)?;
    write_confusion_svg(&confusion_svg, &matrix, &registry)?;
    let summary_path = globals.out_dir.join("classify-summary.txt");
    let mut summary = format!(
        "images: {}\naccuracy: {:.2}%\nmacro_f1: {:.4}\n",
        matrix.total(),
        metrics.accuracy_pct,
        metrics.macro_f1
    );
    for (i, c) in metrics.per_class.iter().enumerate() {
        summary.push_str(&format!(
            "class {}: precision {:.4} recall {:.4} f1 {:.4} support {}{}\n",
            registry.get(i).map(String::as_str).unwrap_or("?"),
            c.precision,
            c.recall,
            c.f1,
            c.support,
            if c.zero_division { " (zero-division)" } else { "" }
        ));
    }
    std::fs::write(&summary_path, &summary)?;
    print!("{summary}");

    let params = vec![
        ("stage", "classify-eval".to_string()),
        ("ckpt", args.ckpt.display().to_string()),
        ("manifest", args.manifest.display().to_string()),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "classify-eval",
        globals.seed,
        &config_repr(&params),
        &[confusion_csv, confusion_svg, summary_path],
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
