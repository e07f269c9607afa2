//! `nilm train|transfer|eval|site-eval` and the `site` alias commands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use nilmkit_core::checkpoint::{load_checkpoint, save_checkpoint};
use nilmkit_core::dataset::{
    compute_norm_stats, normalize, read_pair_csv, read_site_csv, read_stats_csv, write_stats_csv,
    NormStats, PairData, SiteClass,
};
use nilmkit_core::metrics::write_confusion_csv;
use nilmkit_core::metrics::ConfusionMatrix;
use nilmkit_core::nilm::{
    predict_windows, site_evaluate, tau_for_appliance, threshold_accuracy, train_appliance,
    transfer_train, Seq23PointSpec, TrainConfig, TrainReport,
};
use nilmkit_core::nn::Network;
use nilmkit_core::windowing::{build_windows, mid_index, WindowBatch, WindowConfig};

use super::{require_exists, sibling, Globals};
use crate::manifest::{config_repr, write_manifest};
use crate::{NilmAction, NilmEvalArgs, NilmTrainArgs, NilmTransferArgs, SiteAction, SiteEvalArgs, SiteTrainArgs};

pub fn run(globals: &Globals, action: NilmAction) -> Result<()> {
    match action {
        NilmAction::Train(args) => train(globals, args),
        NilmAction::Transfer(args) => transfer(globals, args),
        NilmAction::Eval(args) => eval(globals, args),
        NilmAction::SiteEval(args) => site_eval(globals, args),
    }
}

pub fn run_site(globals: &Globals, action: SiteAction) -> Result<()> {
    match action {
        SiteAction::Train(args) => site_train(globals, args),
        SiteAction::Eval(args) => site_eval(globals, args),
    }
}

struct Prepared {
    windows: WindowBatch,
    agg_stats: NormStats,
    app_stats: NormStats,
}

fn prepare(pair: &PairData, config: &WindowConfig) -> Result<Prepared> {
    let agg_stats = compute_norm_stats(&pair.aggregate).context("aggregate stats")?;
    let app_stats = compute_norm_stats(&pair.appliance).context("appliance stats")?;
    let aggregate = normalize(&pair.aggregate, &agg_stats);
    let appliance = normalize(&pair.appliance, &app_stats);
    let windows = build_windows(&aggregate, &appliance, config)?;
    Ok(Prepared {
        windows,
        agg_stats,
        app_stats,
    })
}

fn write_losses(path: &Path, report: &TrainReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,loss")?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        writeln!(w, "{i},{loss:.6}")?;
    }
    w.flush()?;
    Ok(())
}

fn save_model_bundle(
    ckpt: &Path,
    network: &Network,
    prepared: &Prepared,
    report: &TrainReport,
) -> Result<Vec<PathBuf>> {
    save_checkpoint(ckpt, network)?;
    let agg = sibling(ckpt, ".agg-stats.csv");
    let app = sibling(ckpt, ".app-stats.csv");
    let losses = sibling(ckpt, ".losses.csv");
    write_stats_csv(&agg, &prepared.agg_stats)?;
    write_stats_csv(&app, &prepared.app_stats)?;
    write_losses(&losses, report)?;
    Ok(vec![ckpt.to_path_buf(), agg, app, losses])
}

fn train(globals: &Globals, args: NilmTrainArgs) -> Result<()> {
    require_exists(&args.pairs, "pair file")?;
    let wc = &globals.config.windowing;
    let nc = &globals.config.nilm;
    let window_config = WindowConfig {
        start: 0,
        window_len: args.window_len.unwrap_or(wc.window_len),
        offset: args.offset.unwrap_or(wc.offset),
        budget: args.budget.unwrap_or(wc.budget),
    };
    let train_config = TrainConfig {
        epochs: args.epochs.unwrap_or(nc.epochs),
        batch_size: args.batch_size.unwrap_or(nc.batch_size),
        learning_rate: args.lr.unwrap_or(nc.learning_rate),
        ..TrainConfig::new(globals.seed)
    };
    let ckpt = args.out.unwrap_or_else(|| globals.out_dir.join("model.ckpt"));

    let pair = read_pair_csv(&args.pairs)?;
    let prepared = prepare(&pair, &window_config)?;
    let spec = Seq23PointSpec::with_window(window_config.window_len);
    let mut network = spec.build(globals.seed)?;
    println!(
        "training seq2-[3]point (L={}, {} windows, {} epochs)",
        window_config.window_len,
        prepared.windows.rows(),
        train_config.epochs
    );
    let report = train_appliance(&mut network, &prepared.windows, &train_config)?;
    println!(
        "loss: first epoch {:.6}, last epoch {:.6}",
        report.epoch_losses.first().unwrap_or(&f64::NAN),
        report.epoch_losses.last().unwrap_or(&f64::NAN)
    );
    let outputs = save_model_bundle(&ckpt, &network, &prepared, &report)?;

    let params = vec![
        ("stage", "nilm-train".to_string()),
        ("pairs", args.pairs.display().to_string()),
        ("window_len", window_config.window_len.to_string()),
        ("offset", window_config.offset.to_string()),
        ("budget", window_config.budget.to_string()),
        ("epochs", train_config.epochs.to_string()),
        ("batch_size", train_config.batch_size.to_string()),
        ("lr", format!("{}", train_config.learning_rate)),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "nilm-train",
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("checkpoint: {}", ckpt.display());
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn transfer(globals: &Globals, args: NilmTransferArgs) -> Result<()> {
    require_exists(&args.base, "base checkpoint")?;
    require_exists(&args.pairs, "pair file")?;
    let base = load_checkpoint(&args.base)?;
    let window_len = seq23_window_len(&base)?;
    let wc = &globals.config.windowing;
    let nc = &globals.config.nilm;
    let window_config = WindowConfig {
        start: 0,
        window_len,
        offset: wc.offset,
        budget: wc.budget,
    };
    let train_config = TrainConfig {
        epochs: args.epochs.unwrap_or(nc.epochs),
        batch_size: args.batch_size.unwrap_or(nc.batch_size),
        learning_rate: args.lr.unwrap_or(nc.learning_rate),
        ..TrainConfig::new(globals.seed)
    };
    let ckpt = args
        .out
        .unwrap_or_else(|| globals.out_dir.join("transfer.ckpt"));

    let pair = read_pair_csv(&args.pairs)?;
    let prepared = prepare(&pair, &window_config)?;
    let spec = Seq23PointSpec::with_window(window_len);
    println!(
        "transfer training from {} ({} windows, conv layers frozen)",
        args.base.display(),
        prepared.windows.rows()
    );
    let (network, report) = transfer_train(&base, &spec, &prepared.windows, &train_config)?;
    let outputs = save_model_bundle(&ckpt, &network, &prepared, &report)?;

    let params = vec![
        ("stage", "nilm-transfer".to_string()),
        ("base", args.base.display().to_string()),
        ("pairs", args.pairs.display().to_string()),
        ("window_len", window_len.to_string()),
        ("epochs", train_config.epochs.to_string()),
        ("batch_size", train_config.batch_size.to_string()),
        ("lr", format!("{}", train_config.learning_rate)),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "nilm-transfer",
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("checkpoint: {}", ckpt.display());
    println!("manifest: {}", manifest.display());
    Ok(())
}

/// Window length implied by a seq2-[3]point checkpoint's structure.
fn seq23_window_len(network: &Network) -> Result<usize> {
    Ok(Seq23PointSpec::infer(network)?.window_len)
}

fn load_stats(
    explicit: Option<&Path>,
    ckpt: &Path,
    suffix: &str,
    what: &str,
) -> Result<NormStats> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => sibling(ckpt, suffix),
    };
    require_exists(&path, what)?;
    Ok(read_stats_csv(&path)?)
}

fn eval(globals: &Globals, args: NilmEvalArgs) -> Result<()> {
    require_exists(&args.ckpt, "checkpoint")?;
    require_exists(&args.pairs, "pair file")?;
    let tau = match (args.tau, args.appliance.as_deref()) {
        (Some(t), _) => t,
        (None, Some(name)) => tau_for_appliance(name)
            .with_context(|| format!("no published threshold for appliance {name:?}"))?,
        (None, None) => bail!("provide --tau or --appliance"),
    };
    let network = load_checkpoint(&args.ckpt)?;
    let window_len = seq23_window_len(&network)?;
    let agg_stats = load_stats(args.agg_stats.as_deref(), &args.ckpt, ".agg-stats.csv", "aggregate stats")?;
    let app_stats = load_stats(args.app_stats.as_deref(), &args.ckpt, ".app-stats.csv", "appliance stats")?;

    let wc = &globals.config.windowing;
    let window_config = WindowConfig {
        start: 0,
        window_len,
        offset: args.offset.unwrap_or(wc.offset),
        budget: args.budget.unwrap_or(wc.budget),
    };
    let pair = read_pair_csv(&args.pairs)?;
    let aggregate = normalize(&pair.aggregate, &agg_stats);
    let appliance = normalize(&pair.appliance, &app_stats);
    let windows = build_windows(&aggregate, &appliance, &window_config)?;
    let (pd, gt) = predict_windows(&network, &windows)?;
    let mut report = threshold_accuracy(&pd, &gt, tau)?;
    report.appliance = args.appliance.clone();

    let points_path = globals.out_dir.join("eval-points.csv");
    {
        let mut w = BufWriter::new(File::create(&points_path)?);
        writeln!(w, "pd,gt,d")?;
        for (p, g) in report.predictions.iter().zip(&report.ground_truth) {
            writeln!(w, "{p:.6},{g:.6},{:.6}", (p - g).abs())?;
        }
        w.flush()?;
    }
    let summary_path = globals.out_dir.join("eval-summary.txt");
    let summary = format!(
        "appliance: {}\ntau: {tau} (normalized units)\npoints: {}\ncorrect: {}\naccuracy: {:.2}%\n",
        report.appliance.as_deref().unwrap_or("-"),
        report.total,
        report.correct,
        report.accuracy_pct()
    );
    std::fs::write(&summary_path, &summary)?;
    print!("{summary}");

    let params = vec![
        ("stage", "nilm-eval".to_string()),
        ("ckpt", args.ckpt.display().to_string()),
        ("pairs", args.pairs.display().to_string()),
        ("tau", format!("{tau}")),
        ("offset", window_config.offset.to_string()),
        ("budget", window_config.budget.to_string()),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "nilm-eval",
        globals.seed,
        &config_repr(&params),
        &[points_path, summary_path],
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn site_train(globals: &Globals, args: SiteTrainArgs) -> Result<()> {
    require_exists(&args.site, "site file")?;
    let site = read_site_csv(&args.site)?;
    let pair = PairData {
        aggregate: site.aggregate.clone(),
        appliance: site.appliance.clone(),
    };
    let wc = &globals.config.windowing;
    let nc = &globals.config.nilm;
    let window_config = WindowConfig {
        start: 0,
        window_len: args.window_len.unwrap_or(wc.window_len),
        offset: args.offset.unwrap_or(wc.offset),
        budget: args.budget.unwrap_or(wc.budget),
    };
    let train_config = TrainConfig {
        epochs: args.epochs.unwrap_or(nc.epochs),
        batch_size: args.batch_size.unwrap_or(nc.batch_size),
        learning_rate: args.lr.unwrap_or(nc.learning_rate),
        ..TrainConfig::new(globals.seed)
    };
    let ckpt = args.out.unwrap_or_else(|| globals.out_dir.join("site.ckpt"));

    let prepared = prepare(&pair, &window_config)?;
    let spec = Seq23PointSpec::with_window(window_config.window_len);
    let mut network = spec.build(globals.seed)?;
    println!(
        "training site model (L={}, {} windows, {} epochs)",
        window_config.window_len,
        prepared.windows.rows(),
        train_config.epochs
    );
    let report = train_appliance(&mut network, &prepared.windows, &train_config)?;
    let outputs = save_model_bundle(&ckpt, &network, &prepared, &report)?;

    let params = vec![
        ("stage", "site-train".to_string()),
        ("site", args.site.display().to_string()),
        ("window_len", window_config.window_len.to_string()),
        ("offset", window_config.offset.to_string()),
        ("budget", window_config.budget.to_string()),
        ("epochs", train_config.epochs.to_string()),
        ("batch_size", train_config.batch_size.to_string()),
        ("lr", format!("{}", train_config.learning_rate)),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "site-train",
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("checkpoint: {}", ckpt.display());
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn site_eval(globals: &Globals, args: SiteEvalArgs) -> Result<()> {
    require_exists(&args.ckpt, "checkpoint")?;
    require_exists(&args.site, "site file")?;
    let network = load_checkpoint(&args.ckpt)?;
    let window_len = seq23_window_len(&network)?;
    let app_stats = load_stats(args.stats.as_deref(), &args.ckpt, ".app-stats.csv", "appliance stats")?;
    let agg_stats = load_stats(args.agg_stats.as_deref(), &args.ckpt, ".agg-stats.csv", "aggregate stats")?;

    let site = read_site_csv(&args.site)?;
    let wc = &globals.config.windowing;
    let window_config = WindowConfig {
        start: 0,
        window_len,
        offset: args.offset.unwrap_or(wc.offset),
        budget: args.budget.unwrap_or(wc.budget),
    };
    let aggregate = normalize(&site.aggregate, &agg_stats);
    let appliance = normalize(&site.appliance, &app_stats);
    let windows = build_windows(&aggregate, &appliance, &window_config)?;
    let mid = mid_index(window_len);
    let labels: Vec<SiteClass> = windows
        .starts()
        .iter()
        .map(|&s| site.classes[s + mid])
        .collect();
    let report = site_evaluate(&network, &windows, &app_stats, &labels)?;

    let mut matrix = ConfusionMatrix::new(4);
    for (t, row) in report.confusion.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            for _ in 0..count {
                matrix.record(t, p)?;
            }
        }
    }
    let class_names: Vec<String> = SiteClass::ALL.iter().map(|c| c.to_string()).collect();
    let confusion_path = globals.out_dir.join("site-confusion.csv");
    write_confusion_csv(&confusion_path, &matrix, &class_names)?;
    let summary_path = globals.out_dir.join("site-summary.txt");
    let summary = format!(
        "windows: {}\ncorrect: {}\naccuracy: {:.2}%\n",
        report.total,
        report.correct(),
        report.accuracy_pct()
    );
    std::fs::write(&summary_path, &summary)?;
    print!("{summary}");

    let params = vec![
        ("stage", "site-eval".to_string()),
        ("ckpt", args.ckpt.display().to_string()),
        ("site", args.site.display().to_string()),
        ("offset", window_config.offset.to_string()),
        ("budget", window_config.budget.to_string()),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "site-eval",
        globals.seed,
        &config_repr(&params),
        &[confusion_path, summary_path],
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
