//! Balanced, ancestor-disjoint train/test splits.
//!
//! Every class contributes exactly `per_class_train` and `per_class_test`
//! images. Originals are preferred; seeded augmentations fill shortfalls.
//! An original and all of its augmentations stay on one side of the split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::augment::random_augment;
use super::image::SpectrogramImage;
use super::SignatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitEntry {
    pub image: SpectrogramImage,
    pub split: Split,
}

#[derive(Debug, Clone, Default)]
pub struct SplitResult {
    pub entries: Vec<SplitEntry>,
}

impl SplitResult {
    pub fn count(&self, split: Split, label: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.split == split && e.image.label == label)
            .count()
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .entries
            .iter()
            .map(|e| e.image.label.clone())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }

    pub fn side(&self, split: Split) -> impl Iterator<Item = &SplitEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// Splits `images` (originals, possibly with pre-made augmentations) into a
/// balanced manifest. `augment_budget` caps generated augmentations per
/// class.
pub fn split_train_test(
    images: Vec<SpectrogramImage>,
    per_class_train: usize,
    per_class_test: usize,
    augment_budget: usize,
    seed: u64,
) -> Result<SplitResult, SignatureError> {
    if per_class_train == 0 || per_class_test == 0 {
        return Err(SignatureError::BadConfig(
            "per-class train and test counts must be >= 1".into(),
        ));
    }
    // Group by class, then by ancestor within the class.
    let mut by_class: BTreeMap<String, BTreeMap<u64, Vec<SpectrogramImage>>> = BTreeMap::new();
    let mut next_id = images.iter().map(|i| i.id).max().map_or(0, |m| m + 1);
    for img in images {
        by_class
            .entry(img.label.clone())
            .or_default()
            .entry(img.ancestor)
            .or_default()
            .push(img);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = SplitResult::default();
    for (label, groups) in by_class {
        let originals = groups
            .values()
            .flat_map(|g| g.iter())
            .filter(|i| !i.augmented)
            .count();
        if originals == 0 {
            return Err(SignatureError::ClassWithoutOriginals(label));
        }
        if groups.len() < 2 {
            return Err(SignatureError::InsufficientOriginals(label, groups.len()));
        }
        let mut group_list: Vec<Vec<SpectrogramImage>> = groups.into_values().collect();
        group_list.shuffle(&mut rng);

        // Allocate ancestor groups to the test side proportionally to the
        // requested quotas, keeping at least one group per side.
        let k = group_list.len();
        let want_test = (k as f64 * per_class_test as f64
            / (per_class_train + per_class_test) as f64)
            .round() as usize;
        let test_groups = want_test.clamp(1, k - 1);
        let (test_side, train_side) = group_list.split_at(test_groups);

        let mut budget = augment_budget;
        let test_images = fill_side(
            test_side,
            per_class_test,
            &label,
            &mut budget,
            augment_budget,
            &mut next_id,
            &mut rng,
        )?;
        let train_images = fill_side(
            train_side,
            per_class_train,
            &label,
            &mut budget,
            augment_budget,
            &mut next_id,
            &mut rng,
        )?;
        result.entries.extend(test_images.into_iter().map(|image| SplitEntry {
            image,
            split: Split::Test,
        }));
        result.entries.extend(train_images.into_iter().map(|image| SplitEntry {
            image,
            split: Split::Train,
        }));
    }
    Ok(result)
}

/// Picks `quota` images for one side: originals first, existing
/// augmentations next, freshly generated augmentations last.
fn fill_side(
    groups: &[Vec<SpectrogramImage>],
    quota: usize,
    label: &str,
    budget: &mut usize,
    budget_cap: usize,
    next_id: &mut u64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SpectrogramImage>, SignatureError> {
    let mut picked: Vec<SpectrogramImage> = Vec::with_capacity(quota);
    for img in groups.iter().flat_map(|g| g.iter()).filter(|i| !i.augmented) {
        if picked.len() == quota {
            return Ok(picked);
        }
        picked.push(img.clone());
    }
    for img in groups.iter().flat_map(|g| g.iter()).filter(|i| i.augmented) {
        if picked.len() == quota {
            return Ok(picked);
        }
        picked.push(img.clone());
    }
    // Round-robin over this side's originals for fresh augmentations.
    let originals: Vec<&SpectrogramImage> = groups
        .iter()
        .flat_map(|g| g.iter())
        .filter(|i| !i.augmented)
        .collect();
    let mut source = 0usize;
    while picked.len() < quota {
        if *budget == 0 {
            return Err(SignatureError::AugmentBudgetExhausted(
                label.to_string(),
                budget_cap,
            ));
        }
        *budget -= 1;
        let mut img = random_augment(originals[source % originals.len()], rng)?;
        img.id = *next_id;
        *next_id += 1;
        picked.push(img);
        source += 1;
    }
    Ok(picked)
}
