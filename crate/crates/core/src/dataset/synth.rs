//! Seeded synthetic datasets: duty-cycle appliance houses and four-class
//! site data, both sized for desk-scale experiments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use super::site::{site_data_from_columns, SiteData};
use super::sync::SyncedHouse;
use super::DataError;

/// One synthetic appliance: a 2-4 state duty-cycle machine with a wattage
/// and a dwell-time range (in samples) per state. States cycle in order.
#[derive(Debug, Clone, Deserialize)]
pub struct SynthAppliance {
    pub name: String,
    pub states: Vec<f64>,
    pub dwell: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SynthConfig {
    pub length: usize,
    /// Gaussian noise sigma as a fraction of the clean aggregate mean.
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default, rename = "appliance")]
    pub appliances: Vec<SynthAppliance>,
    /// When present, `synth_site` parameters for site-data generation.
    #[serde(default)]
    pub site: Option<SiteSynthConfig>,
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        toml::from_str(text).map_err(|e| DataError::InvalidSynthConfig(e.to_string()))
    }
}

fn validate(cfg: &SynthConfig) -> Result<(), DataError> {
    if cfg.length == 0 {
        return Err(DataError::InvalidSynthConfig("length must be > 0".into()));
    }
    if !cfg.noise_level.is_finite() || cfg.noise_level < 0.0 {
        return Err(DataError::InvalidSynthConfig(format!(
            "noise_level {} must be a non-negative fraction",
            cfg.noise_level
        )));
    }
    for app in &cfg.appliances {
        if !(2..=4).contains(&app.states.len()) {
            return Err(DataError::InvalidSynthConfig(format!(
                "appliance {:?} has {} states; need 2-4",
                app.name,
                app.states.len()
            )));
        }
        if app.dwell.len() != app.states.len() {
            return Err(DataError::InvalidSynthConfig(format!(
                "appliance {:?}: dwell entries must match state count",
                app.name
            )));
        }
        if app.states.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DataError::InvalidSynthConfig(format!(
                "appliance {:?}: state wattages must be finite and >= 0",
                app.name
            )));
        }
        if app.dwell.iter().any(|[lo, hi]| *lo == 0 || lo > hi) {
            return Err(DataError::InvalidSynthConfig(format!(
                "appliance {:?}: dwell ranges must satisfy 1 <= lo <= hi",
                app.name
            )));
        }
    }
    Ok(())
}

/// Generates a synced synthetic house. The aggregate (mains1 + mains2)
/// equals the sum of the appliance columns plus zero-mean Gaussian noise on
/// mains1, clipped at 0; with `noise_level = 0` additivity is exact. Ground
/// truth appliance columns are retained untouched.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<SyncedHouse, DataError> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.length;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cfg.appliances.len());
    for app in &cfg.appliances {
        columns.push(run_state_machine(app, n, &mut rng));
    }

    // mains2 carries the odd-index appliances; mains1 the rest plus noise.
    let mut mains1 = vec![0.0; n];
    let mut mains2 = vec![0.0; n];
    for (i, col) in columns.iter().enumerate() {
        let target = if i % 2 == 0 { &mut mains1 } else { &mut mains2 };
        for (t, v) in target.iter_mut().zip(col) {
            *t += v;
        }
    }
    if cfg.noise_level > 0.0 && !cfg.appliances.is_empty() {
        let clean_mean = columns
            .iter()
            .flat_map(|c| c.iter())
            .sum::<f64>()
            / n as f64;
        let sigma = cfg.noise_level * clean_mean;
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| DataError::InvalidSynthConfig(e.to_string()))?;
            for v in mains1.iter_mut() {
                *v = (*v + normal.sample(&mut rng)).max(0.0);
            }
        }
    }

    let timestamps: Vec<i64> = (0..n as i64).collect();
    let names = cfg.appliances.iter().map(|a| a.name.clone()).collect();
    Ok(SyncedHouse::from_columns(
        timestamps, mains1, mains2, names, columns, 0, 0,
    ))
}

fn run_state_machine(app: &SynthAppliance, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut state = 0usize;
    while out.len() < n {
        let [lo, hi] = app.dwell[state];
        let dwell = rng.random_range(lo..=hi);
        let watts = app.states[state];
        for _ in 0..dwell {
            if out.len() == n {
                break;
            }
            out.push(watts);
        }
        state = (state + 1) % app.states.len();
    }
    out
}

/// Site-data generation: the site dwells on wattage levels that sit inside
/// the four class bands, with small in-band jitter. The appliance column
/// equals the aggregate (a single metered group), so threshold labels of
/// both columns coincide.
#[derive(Debug, Clone, Deserialize)]
pub struct SiteSynthConfig {
    pub length: usize,
    /// Dwell-time range (samples) on each level.
    #[serde(default = "default_site_dwell")]
    pub dwell: [usize; 2],
    /// In-band jitter sigma in watts.
    #[serde(default = "default_site_jitter")]
    pub jitter: f64,
}

fn default_site_dwell() -> [usize; 2] {
    [20, 60]
}

fn default_site_jitter() -> f64 {
    0.4
}

/// Wattage bands per class, kept clear of the 10/15/80 W boundaries so the
/// jitter cannot flip a label.
const SITE_BANDS: [(f64, f64); 4] = [(2.0, 8.0), (10.8, 14.2), (17.0, 75.0), (85.0, 180.0)];

pub fn synth_site(cfg: &SiteSynthConfig, seed: u64) -> Result<SiteData, DataError> {
    if cfg.length == 0 {
        return Err(DataError::InvalidSynthConfig("length must be > 0".into()));
    }
    if cfg.dwell[0] == 0 || cfg.dwell[0] > cfg.dwell[1] {
        return Err(DataError::InvalidSynthConfig(
            "site dwell range must satisfy 1 <= lo <= hi".into(),
        ));
    }
    if !cfg.jitter.is_finite() || cfg.jitter < 0.0 {
        return Err(DataError::InvalidSynthConfig("jitter must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, cfg.jitter.max(f64::MIN_POSITIVE))
        .map_err(|e| DataError::InvalidSynthConfig(e.to_string()))?;
    let mut aggregate = Vec::with_capacity(cfg.length);
    while aggregate.len() < cfg.length {
        let band = SITE_BANDS[rng.random_range(0..SITE_BANDS.len())];
        let level = rng.random_range(band.0..band.1);
        let dwell = rng.random_range(cfg.dwell[0]..=cfg.dwell[1]);
        for _ in 0..dwell {
            if aggregate.len() == cfg.length {
                break;
            }
            let jitter = if cfg.jitter > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            // Clamp into the band so the label always matches the level.
            aggregate.push((level + jitter).clamp(band.0, band.1));
        }
    }
    site_data_from_columns(aggregate.clone(), aggregate)
}
