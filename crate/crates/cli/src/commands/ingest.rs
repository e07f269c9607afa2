//! `ingest redd|refit|synth`: parse or generate data, write the synced
//! house file, pair files, and site files.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use nilmkit_core::dataset::{
    build_appliance_pair, parse_redd_house, parse_refit_house, redd_to_synced,
    site_data_from_columns, synth_generate, synth_site, write_pair_csv, write_site_csv,
    write_synced_csv, ParseReport, SyncedHouse, SynthConfig,
};

use super::{require_exists, Globals};
use crate::manifest::{config_repr, write_manifest};
use crate::IngestSource;

pub fn run(globals: &Globals, source: IngestSource) -> Result<()> {
    match source {
        IngestSource::Redd {
            house,
            appliance,
            split_ratio,
        } => run_redd(globals, house, appliance, split_ratio),
        IngestSource::Refit {
            file,
            aggregate_col,
            appliance_col,
            split_ratio,
        } => run_refit(globals, file, aggregate_col, appliance_col, split_ratio),
        IngestSource::Synth {
            config,
            appliance,
            split_ratio,
        } => run_synth(globals, config, appliance, split_ratio),
    }
}

fn print_report(report: &ParseReport) {
    println!(
        "parsed {} lines, skipped {}",
        report.lines_total, report.lines_skipped
    );
    for w in &report.warnings {
        println!("warning: {w}");
    }
}

fn write_house_outputs(
    globals: &Globals,
    stage: &str,
    synced: &SyncedHouse,
    appliance: Option<&String>,
    split_ratio: Option<f64>,
    params: Vec<(&str, String)>,
) -> Result<()> {
    let mut outputs = Vec::new();
    let synced_path = globals.out_dir.join("house-synced.csv");
    write_synced_csv(&synced_path, synced)?;
    println!(
        "synced house: {} rows, {} columns (N+3), mains gaps {:?} -> {}",
        synced.rows(),
        synced.column_count(),
        synced.mains_gaps(),
        synced_path.display()
    );
    outputs.push(synced_path);

    if let Some(name) = appliance {
        let ratio = split_ratio.unwrap_or(globals.config.nilm.split_ratio);
        let (train, test) = build_appliance_pair(synced, name, ratio)?;
        let slug: String = name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let train_path = globals.out_dir.join(format!("{slug}-train.csv"));
        let test_path = globals.out_dir.join(format!("{slug}-test.csv"));
        write_pair_csv(&train_path, &train)?;
        write_pair_csv(&test_path, &test)?;
        println!(
            "pair files: {} train rows, {} test rows",
            train.len(),
            test.len()
        );
        outputs.push(train_path);
        outputs.push(test_path);
    }
    let manifest = write_manifest(
        &globals.out_dir,
        stage,
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn run_redd(
    globals: &Globals,
    house: PathBuf,
    appliance: Option<String>,
    split_ratio: Option<f64>,
) -> Result<()> {
    require_exists(&house, "house directory")?;
    let parsed = parse_redd_house(&house).context("parsing REDD house")?;
    print_report(&parsed.report);
    let (synced, warnings) = redd_to_synced(&parsed)?;
    for w in warnings {
        println!("warning: {w}");
    }
    let params = vec![
        ("stage", "ingest-redd".to_string()),
        ("house", house.display().to_string()),
        ("appliance", format!("{appliance:?}")),
        ("split_ratio", format!("{split_ratio:?}")),
        ("seed", globals.seed.to_string()),
    ];
    write_house_outputs(
        globals,
        "ingest-redd",
        &synced,
        appliance.as_ref(),
        split_ratio,
        params,
    )
}

fn run_refit(
    globals: &Globals,
    file: PathBuf,
    aggregate_col: String,
    appliance_col: String,
    split_ratio: Option<f64>,
) -> Result<()> {
    require_exists(&file, "REFIT csv")?;
    let parsed = parse_refit_house(&file).context("parsing REFIT csv")?;
    print_report(&parsed.report);
    let aggregate = if aggregate_col.eq_ignore_ascii_case("aggregate") {
        parsed.aggregate.values().to_vec()
    } else {
        parsed
            .appliance(&aggregate_col)
            .with_context(|| format!("column {aggregate_col:?} not found"))?
            .values()
            .to_vec()
    };
    let appliance = parsed
        .appliance(&appliance_col)
        .with_context(|| format!("column {appliance_col:?} not found"))?
        .values()
        .to_vec();
    let site = site_data_from_columns(aggregate, appliance)?;

    let mut outputs = Vec::new();
    if let Some(ratio) = split_ratio {
        let (train, test) = site.split(ratio)?;
        let train_path = globals.out_dir.join("site-train.csv");
        let test_path = globals.out_dir.join("site-test.csv");
        write_site_csv(&train_path, &train)?;
        write_site_csv(&test_path, &test)?;
        println!("site files: {} train rows, {} test rows", train.len(), test.len());
        outputs.push(train_path);
        outputs.push(test_path);
    } else {
        let path = globals.out_dir.join("site.csv");
        write_site_csv(&path, &site)?;
        println!("site file: {} rows -> {}", site.len(), path.display());
        outputs.push(path);
    }
    let params = vec![
        ("stage", "ingest-refit".to_string()),
        ("file", file.display().to_string()),
        ("aggregate_col", aggregate_col),
        ("appliance_col", appliance_col),
        ("split_ratio", format!("{split_ratio:?}")),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "ingest-refit",
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn run_synth(
    globals: &Globals,
    config_path: PathBuf,
    appliance: Option<String>,
    split_ratio: Option<f64>,
) -> Result<()> {
    require_exists(&config_path, "synth config")?;
    let text = std::fs::read_to_string(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let cfg = SynthConfig::from_toml(&text)?;
    let params = vec![
        ("stage", "ingest-synth".to_string()),
        ("config", text.clone()),
        ("appliance", format!("{appliance:?}")),
        ("split_ratio", format!("{split_ratio:?}")),
        ("seed", globals.seed.to_string()),
    ];

    if let Some(site_cfg) = &cfg.site {
        let site = synth_site(site_cfg, globals.seed)?;
        let mut outputs = Vec::new();
        if let Some(ratio) = split_ratio {
            let (train, test) = site.split(ratio)?;
            let train_path = globals.out_dir.join("site-train.csv");
            let test_path = globals.out_dir.join("site-test.csv");
            write_site_csv(&train_path, &train)?;
            write_site_csv(&test_path, &test)?;
            println!(
                "synthetic site: {} train rows, {} test rows",
                train.len(),
                test.len()
            );
            outputs.push(train_path);
            outputs.push(test_path);
        } else {
            let path = globals.out_dir.join("site.csv");
            write_site_csv(&path, &site)?;
            println!("synthetic site: {} rows -> {}", site.len(), path.display());
            outputs.push(path);
        }
        let manifest = write_manifest(
            &globals.out_dir,
            "ingest-synth",
            globals.seed,
            &config_repr(&params),
            &outputs,
        )?;
        println!("manifest: {}", manifest.display());
        return Ok(());
    }

    if cfg.appliances.is_empty() {
        bail!("synth config has neither [[appliance]] entries nor a [site] table");
    }
    let synced = synth_generate(&cfg, globals.seed)?;
    write_house_outputs(
        globals,
        "ingest-synth",
        &synced,
        appliance.as_ref(),
        split_ratio,
        params,
    )
}
