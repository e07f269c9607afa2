//! `windows`: build or reuse a normalized window cache for a pair file.

use anyhow::{Context, Result};

use nilmkit_core::dataset::{compute_norm_stats, normalize, read_pair_csv, write_stats_csv};
use nilmkit_core::windowing::{build_windows, load_window_cache, save_window_cache, WindowConfig};

use super::{require_exists, sibling, Globals};
use crate::manifest::{config_repr, write_manifest};
use crate::WindowsArgs;

pub fn run(globals: &Globals, args: WindowsArgs) -> Result<()> {
    require_exists(&args.pairs, "pair file")?;
    let wc = &globals.config.windowing;
    let config = WindowConfig {
        start: 0,
        window_len: args.window_len.unwrap_or(wc.window_len),
        offset: args.offset.unwrap_or(wc.offset),
        budget: args.budget.unwrap_or(wc.budget),
    };
    let cache_path = args
        .cache
        .unwrap_or_else(|| globals.out_dir.join("windows.bin"));

    if cache_path.exists() {
        if let Some(batch) = load_window_cache(&cache_path, &config)? {
            println!(
                "cache {} is valid for this config ({} rows); reusing",
                cache_path.display(),
                batch.rows()
            );
            return Ok(());
        }
        println!("cache exists but config hash differs; rebuilding");
    }

    let pair = read_pair_csv(&args.pairs)?;
    let agg_stats = compute_norm_stats(&pair.aggregate).context("aggregate stats")?;
    let app_stats = compute_norm_stats(&pair.appliance).context("appliance stats")?;
    let aggregate = normalize(&pair.aggregate, &agg_stats);
    let appliance = normalize(&pair.appliance, &app_stats);
    let batch = build_windows(&aggregate, &appliance, &config)?;
    save_window_cache(&cache_path, &batch, &config)?;
    let agg_path = sibling(&cache_path, ".agg-stats.csv");
    let app_path = sibling(&cache_path, ".app-stats.csv");
    write_stats_csv(&agg_path, &agg_stats)?;
    write_stats_csv(&app_path, &app_stats)?;
    println!(
        "built {} windows of length {} -> {}",
        batch.rows(),
        config.window_len,
        cache_path.display()
    );

    let params = vec![
        ("stage", "windows".to_string()),
        ("pairs", args.pairs.display().to_string()),
        ("window_len", config.window_len.to_string()),
        ("offset", config.offset.to_string()),
        ("budget", config.budget.to_string()),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "windows",
        globals.seed,
        &config_repr(&params),
        &[cache_path, agg_path, app_path],
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
