//! `behavior`: max/mean power summary plus transient-state histogram for
//! one appliance in a synced house file.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};

use nilmkit_core::behavior::{power_summary, transient_histogram};
use nilmkit_core::dataset::{read_synced_csv, TimeSeries};
use nilmkit_core::metrics::{write_histogram_csv, write_histogram_svg};

use super::{require_exists, Globals};
use crate::manifest::{config_repr, write_manifest};
use crate::BehaviorArgs;

pub fn run(globals: &Globals, args: BehaviorArgs) -> Result<()> {
    require_exists(&args.house, "synced house file")?;
    let house = read_synced_csv(&args.house)?;
    let column = house
        .appliance(&args.appliance)
        .with_context(|| format!("appliance {:?} not in house file", args.appliance))?;
    let series = TimeSeries::new(house.timestamps().to_vec(), column.to_vec())?;
    let start = args
        .start
        .or_else(|| house.timestamps().first().copied())
        .context("house file is empty")?;
    let period = (start, start + args.days as i64 * 86_400);

    let house_name = args
        .house
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "house".into());
    let summary = power_summary(&series, period, &house_name, &args.appliance)?;
    let hist = transient_histogram(column)?;

    let summary_path = globals.out_dir.join("behavior-summary.csv");
    {
        let mut w = BufWriter::new(File::create(&summary_path)?);
        writeln!(w, "house,appliance,start,end,max_watts,mean_watts,samples")?;
        writeln!(
            w,
            "{},{},{},{},{:.6},{:.6},{}",
            summary.house,
            summary.appliance,
            summary.period.0,
            summary.period.1,
            summary.max_watts,
            summary.mean_watts,
            summary.samples
        )?;
        w.flush()?;
    }
    let labeled = hist.counts();
    let labels: Vec<&str> = labeled.iter().map(|(l, _)| *l).collect();
    let counts: Vec<u64> = labeled.iter().map(|(_, c)| *c).collect();
    let hist_csv = globals.out_dir.join("behavior-histogram.csv");
    let hist_svg = globals.out_dir.join("behavior-histogram.svg");
    write_histogram_csv(&hist_csv, &labels, &counts)?;
    write_histogram_svg(&hist_svg, &labels, &counts)?;

    println!(
        "{} / {}: max {:.1} W, mean {:.1} W over {} samples",
        summary.house, summary.appliance, summary.max_watts, summary.mean_watts, summary.samples
    );
    for (label, count) in labeled {
        println!("{label}: {count}");
    }

    let params = vec![
        ("stage", "behavior".to_string()),
        ("house", args.house.display().to_string()),
        ("appliance", args.appliance.clone()),
        ("days", args.days.to_string()),
        ("start", format!("{start}")),
        ("seed", globals.seed.to_string()),
    ];
    let manifest = write_manifest(
        &globals.out_dir,
        "behavior",
        globals.seed,
        &config_repr(&params),
        &[summary_path, hist_csv, hist_svg],
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
