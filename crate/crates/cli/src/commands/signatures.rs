//! `signatures generate|split`: image generation from a synced house file
//! and balanced split construction.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use nilmkit_core::dataset::read_synced_csv;
use nilmkit_core::signature::{
    load_png, save_png, sliding_spectrogram_dataset, split_train_test, CwtConfig, Provenance,
    SlidingConfig, SpectrogramImage, Split, StftConfig, TransformKind, WindowFn,
};

use super::{require_exists, Globals};
use crate::manifest::{config_repr, write_manifest};
use crate::{SignaturesAction, SignaturesGenerateArgs, SignaturesSplitArgs};

pub fn run(globals: &Globals, action: SignaturesAction) -> Result<()> {
    match action {
        SignaturesAction::Generate(args) => generate(globals, args),
        SignaturesAction::Split(args) => split(globals, args),
    }
}

fn generate(globals: &Globals, args: SignaturesGenerateArgs) -> Result<()> {
    require_exists(&args.house, "synced house file")?;
    let kind = TransformKind::parse(&args.transform)
        .with_context(|| format!("unknown transform {:?}", args.transform))?;
    let sc = &globals.config.signatures;
    let sliding = SlidingConfig {
        max_r: args.max_r.unwrap_or(sc.max_r),
        data_offset: args.data_offset.unwrap_or(sc.data_offset),
        max_iters: args.max_iters.unwrap_or(sc.max_iters),
    };
    let cwt = CwtConfig::new(sc.scale_min, sc.scale_max)?;
    let stft = StftConfig {
        segment_len: sc.segment_len,
        hop: sc.hop,
        window: WindowFn::Hann,
    };

    let house = read_synced_csv(&args.house)?;
    let house_name = args
        .house
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "house".into());
    let channels: Vec<String> = if args.channel.eq_ignore_ascii_case("all") {
        house.appliance_names().to_vec()
    } else {
        vec![args.channel.clone()]
    };

    let image_dir = globals.out_dir.join("signatures");
    std::fs::create_dir_all(&image_dir)?;
    let mut entries: Vec<(PathBuf, SpectrogramImage)> = Vec::new();
    let mut next_id = 0u64;
    for channel in &channels {
        let readings = house
            .appliance(channel)
            .with_context(|| format!("appliance {channel:?} not in house file"))?;
        let ctx = nilmkit_core::signature::SlidingContext {
            house: &house_name,
            channel,
            label: channel,
            cwt,
            stft,
            out_w: sc.out_w,
            out_h: sc.out_h,
            first_id: next_id,
        };
        let images = sliding_spectrogram_dataset(readings, &sliding, kind, &ctx)?;
        next_id += images.len() as u64;
        let label_dir = image_dir.join(slug(channel));
        std::fs::create_dir_all(&label_dir)?;
        for img in images {
            let path = label_dir.join(format!("{}-{:06}.png", kind.as_str(), img.id));
            save_png(&img, &path)?;
            entries.push((path, img));
        }
    }
    println!(
        "generated {} {} images over {} channel(s)",
        entries.len(),
        kind.as_str(),
        channels.len()
    );

    let manifest_csv = globals.out_dir.join("signatures-manifest.csv");
    write_image_manifest(&manifest_csv, &entries.iter().map(|(p, i)| (p.clone(), i, None)).collect::<Vec<_>>())?;

    let params = vec![
        ("stage", "signatures-generate".to_string()),
        ("house", args.house.display().to_string()),
        ("channel", args.channel.clone()),
        ("transform", kind.as_str().to_string()),
        ("max_r", sliding.max_r.to_string()),
        ("data_offset", sliding.data_offset.to_string()),
        ("max_iters", sliding.max_iters.to_string()),
        ("scales", format!("{}..={}", cwt.scale_min, cwt.scale_max)),
        ("stft", format!("{}x{}", stft.segment_len, stft.hop)),
        ("out", format!("{}x{}", sc.out_w, sc.out_h)),
        ("seed", globals.seed.to_string()),
    ];
    let mut outputs: Vec<PathBuf> = entries.into_iter().map(|(p, _)| p).collect();
    outputs.push(manifest_csv);
    let manifest = write_manifest(
        &globals.out_dir,
        "signatures-generate",
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Manifest columns: path,label,kind,house,channel,start,augmented,ancestor,id,split.
fn write_image_manifest(
    path: &Path,
    rows: &[(PathBuf, &SpectrogramImage, Option<Split>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "path,label,kind,house,channel,start,augmented,ancestor,id,split")?;
    for (img_path, img, split) in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            img_path.display(),
            img.label,
            img.kind.as_str(),
            img.provenance.house,
            img.provenance.channel,
            img.provenance.start,
            img.augmented as u8,
            img.ancestor,
            img.id,
            split.map(|s| s.as_str()).unwrap_or("")
        )?;
    }
    w.flush()?;
    Ok(())
}

struct ManifestRow {
    path: PathBuf,
    label: String,
    kind: TransformKind,
    house: String,
    channel: String,
    start: usize,
    augmented: bool,
    ancestor: u64,
    id: u64,
    split: Option<Split>,
}

fn read_image_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().context("empty manifest")??;
    let expected = "path,label,kind,house,channel,start,augmented,ancestor,id,split";
    if header.trim() != expected {
        bail!("unexpected manifest header {header:?}");
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            bail!("manifest row {}: expected 10 fields", i + 2);
        }
        rows.push(ManifestRow {
            path: PathBuf::from(f[0]),
            label: f[1].to_string(),
            kind: TransformKind::parse(f[2]).with_context(|| format!("row {}: kind", i + 2))?,
            house: f[3].to_string(),
            channel: f[4].to_string(),
            start: f[5].parse().with_context(|| format!("row {}: start", i + 2))?,
            augmented: f[6] == "1",
            ancestor: f[7].parse().with_context(|| format!("row {}: ancestor", i + 2))?,
            id: f[8].parse().with_context(|| format!("row {}: id", i + 2))?,
            split: match f[9] {
                "" => None,
                "train" => Some(Split::Train),
                "test" => Some(Split::Test),
                other => bail!("manifest row {}: bad split {other:?}", i + 2),
            },
        });
    }
    Ok(rows)
}

fn load_image(row: &ManifestRow) -> Result<SpectrogramImage> {
    let (width, height, pixels) = load_png(&row.path)?;
    Ok(SpectrogramImage {
        width,
        height,
        pixels,
        kind: row.kind,
        label: row.label.clone(),
        provenance: Provenance {
            house: row.house.clone(),
            channel: row.channel.clone(),
            start: row.start,
        },
        augmented: row.augmented,
        id: row.id,
        ancestor: row.ancestor,
    })
}

fn split(globals: &Globals, args: SignaturesSplitArgs) -> Result<()> {
    require_exists(&args.manifest, "image manifest")?;
    let rows = read_image_manifest(&args.manifest)?;
    if rows.is_empty() {
        bail!("manifest {} lists no images", args.manifest.display());
    }
    let mut labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
    labels.sort();
    labels.dedup();
    let classes = labels.len();
    let per_class_train = args.train / classes;
    let per_class_test = args.test / classes;
    if per_class_train == 0 || per_class_test == 0 {
        bail!(
            "{} classes cannot fill train={} test={} (at least one per class)",
            classes,
            args.train,
            args.test
        );
    }
    if args.train % classes != 0 || args.test % classes != 0 {
        println!(
            "note: totals are not divisible by {} classes; using {} train and {} test per class",
            classes, per_class_train, per_class_test
        );
    }
    let images = rows
        .iter()
        .map(load_image)
        .collect::<Result<Vec<_>>>()?;
    let result = split_train_test(
        images,
        per_class_train,
        per_class_test,
        globals.config.signatures.augment_budget,
        globals.seed,
    )?;

    // Persist generated augmentations and build the split manifest.
    let aug_dir = globals.out_dir.join("signatures-augmented");
    std::fs::create_dir_all(&aug_dir)?;
    let path_by_id: std::collections::BTreeMap<u64, PathBuf> =
        rows.iter().map(|r| (r.id, r.path.clone())).collect();
    let mut manifest_rows: Vec<(PathBuf, &SpectrogramImage, Option<Split>)> = Vec::new();
    for entry in &result.entries {
        let img = &entry.image;
        let path = match path_by_id.get(&img.id) {
            Some(p) => p.clone(),
            None => {
                let p = aug_dir.join(format!("{}-aug-{:06}.png", slug(&img.label), img.id));
                save_png(img, &p)?;
                p
            }
        };
        manifest_rows.push((path, img, Some(entry.split)));
    }
    let split_manifest = globals.out_dir.join("split-manifest.csv");
    write_image_manifest(&split_manifest, &manifest_rows)?;
    for label in &labels {
        println!(
            "{label}: train {} test {}",
            result.count(Split::Train, label),
            result.count(Split::Test, label)
        );
    }

    let params = vec![
        ("stage", "signatures-split".to_string()),
        ("manifest", args.manifest.display().to_string()),
        ("train", args.train.to_string()),
        ("test", args.test.to_string()),
        ("per_class_train", per_class_train.to_string()),
        ("per_class_test", per_class_test.to_string()),
        ("augment_budget", globals.config.signatures.augment_budget.to_string()),
        ("seed", globals.seed.to_string()),
    ];
    let mut outputs: Vec<PathBuf> = manifest_rows.iter().map(|(p, _, _)| p.clone()).collect();
    outputs.push(split_manifest);
    let manifest = write_manifest(
        &globals.out_dir,
        "signatures-split",
        globals.seed,
        &config_repr(&params),
        &outputs,
    )?;
    println!("manifest: {}", manifest.display());
    Ok(())
}

/// Shared by `classify`: loads one side of a split manifest as images with
/// a sorted class registry.
pub fn load_split_side(
    manifest_path: &Path,
    want: Split,
) -> Result<(Vec<(String, SpectrogramImage)>, Vec<String>)> {
    let rows = read_image_manifest(manifest_path)?;
    let mut labels: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
    labels.sort();
    labels.dedup();
    let mut images = Vec::new();
    for row in rows.iter().filter(|r| r.split == Some(want)) {
        images.push((row.label.clone(), load_image(row)?));
    }
    if images.is_empty() {
        bail!(
            "manifest {} has no rows in the {} split",
            manifest_path.display(),
            want.as_str()
        );
    }
    Ok((images, labels))
}
