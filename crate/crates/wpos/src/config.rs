//! Experiment configuration, read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use wpos_core::channel::ChannelParams;
use wpos_core::geometry::{default_sensor_positions, Point3, SceneConfig, ZoneLayout, DEFAULT_SENSOR_COUNT, SPEED_OF_LIGHT};
use wpos_core::pdp::{DetectionParams, CALIBRATION_SAMPLES};
use wpos_core::selection::KlDimFactor;
use wpos_nn::{AdamConfig, ModelKind, TrainingParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dr: f64,
    pub dh: f64,
    /// Explicit sensor positions; the twelve-sensor default when absent.
    pub sensors: Option<Vec<[f64; 3]>>,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self { dx: 6.0, dy: 3.0, dz: 2.0, dr: 10.0, dh: 4.0, sensors: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneSection {
    pub rings: usize,
    pub sectors: usize,
}

impl Default for ZoneSection {
    fn default() -> Self {
        Self { rings: 2, sectors: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub f_min: usize,
    pub f_max: usize,
    /// Criterion weight ε with and without the direct path.
    pub weight_los: f64,
    pub weight_nlos: f64,
    /// Neighbor rank `u` of the KL estimator.
    pub neighbors: usize,
    pub kl_dim_factor: KlDimFactor,
    /// Training records per zone used for the KL estimate.
    pub max_per_zone: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            f_min: 4,
            f_max: 10,
            weight_los: 0.8,
            weight_nlos: 0.6,
            neighbors: 30,
            kl_dim_factor: KlDimFactor::FeatureCount,
            max_per_zone: 400,
        }
    }
}

impl SelectionSection {
    pub fn grid(&self) -> std::ops::RangeInclusive<usize> {
        self.f_min..=self.f_max
    }

    pub fn weight(&self, los: bool) -> f64 {
        if los {
            self.weight_los
        } else {
            self.weight_nlos
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_fraction: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Base seed for noise calibration, network initialization and shuffling.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub scene: SceneSection,
    pub zones: ZoneSection,
    pub channel: ChannelParams,
    pub detection: DetectionParams,
    pub snr_db: Vec<f64>,
    /// Direct-path settings to simulate.
    pub los: Vec<bool>,
    /// One frozen environment per seed.
    pub scenario_seeds: Vec<u64>,
    pub d_train: usize,
    pub d_test: usize,
    pub calibration_samples: usize,
    pub selection: SelectionSection,
    pub models: Vec<ModelKind>,
    pub training: TrainingSection,
    /// Independent redraws of fading, noise and initialization per cell.
    pub repeats: usize,
    /// Also dump every raw PDP as CSV.
    pub write_csv: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            out_dir: PathBuf::from("runs/desk"),
            scene: SceneSection::default(),
            zones: ZoneSection::default(),
            channel: ChannelParams::default(),
            detection: DetectionParams::default(),
            snr_db: vec![15.0],
            los: vec![true],
            scenario_seeds: vec![101, 102],
            d_train: 4000,
            d_test: 1000,
            calibration_samples: CALIBRATION_SAMPLES,
            selection: SelectionSection::default(),
            models: ModelKind::ALL.to_vec(),
            training: TrainingSection::default(),
            repeats: 3,
            write_csv: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate().with_context(|| format!("validating config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn scene(&self) -> Result<SceneConfig> {
        let s = &self.scene;
        let sensors = match &s.sensors {
            Some(points) => points.iter().map(|&p| Point3::from(p)).collect(),
            None => default_sensor_positions(s.dx, s.dy, s.dz, DEFAULT_SENSOR_COUNT)?,
        };
        let scene = SceneConfig { dx: s.dx, dy: s.dy, dz: s.dz, dr: s.dr, dh: s.dh, sensors, c: SPEED_OF_LIGHT };
        scene.validate()?;
        Ok(scene)
    }

    pub fn zone_layout(&self) -> Result<ZoneLayout> {
        Ok(ZoneLayout::new(self.zones.rings, self.zones.sectors, self.scene.dr)?)
    }

    pub fn num_zones(&self) -> usize {
        self.zones.rings * self.zones.sectors
    }

    pub fn training_params(&self, seed: u64, threads: usize) -> TrainingParams {
        let t = &self.training;
        TrainingParams {
            adam: AdamConfig { learning_rate: t.learning_rate, beta1: t.beta1, beta2: t.beta2, epsilon: t.epsilon },
            batch_size: t.batch_size,
            epochs: t.epochs,
            validation_fraction: t.validation_fraction,
            seed,
            threads,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        self.scene()?;
        self.zone_layout()?;
        self.channel.validate()?;
        self.detection.validate()?;
        ensure!(self.d_train >= 1 && self.d_test >= 1, "d_train and d_test must be at least 1");
        ensure!(!self.snr_db.is_empty() && self.snr_db.iter().all(|s| s.is_finite()), "snr_db needs finite values");
        ensure!(!self.los.is_empty(), "los needs at least one setting");
        ensure!(!self.scenario_seeds.is_empty(), "scenario_seeds is empty");
        ensure!(self.repeats >= 1, "repeats must be at least 1");
        ensure!(self.calibration_samples >= 1, "calibration_samples must be at least 1");
        let mut seen = BTreeSet::new();
        for s in std::iter::once(self.seed).chain(self.scenario_seeds.iter().copied()) {
            if !seen.insert(s) {
                bail!("seed {s} is used more than once; the base seed and scenario seeds must be distinct");
            }
        }
        let distinct = |v: Vec<String>, what: &str| -> Result<()> {
            let n = v.len();
            ensure!(v.into_iter().collect::<BTreeSet<_>>().len() == n, "{what} contains duplicates");
            Ok(())
        };
        distinct(self.snr_db.iter().map(|s| s.to_string()).collect(), "snr_db")?;
        distinct(self.los.iter().map(|s| s.to_string()).collect(), "los")?;
        distinct(self.models.iter().map(|s| s.to_string()).collect(), "models")?;
        let sel = &self.selection;
        let nb = self.detection.num_bins();
        ensure!(
            1 <= sel.f_min && sel.f_min <= sel.f_max && sel.f_max < nb,
            "feature grid [{}, {}] must lie in 1..{nb}",
            sel.f_min,
            sel.f_max
        );
        ensure!(
            (0.0..=1.0).contains(&sel.weight_los) && (0.0..=1.0).contains(&sel.weight_nlos),
            "criterion weights must be in [0, 1]"
        );
        ensure!(sel.neighbors >= 1 && sel.max_per_zone > sel.neighbors, "need max_per_zone > neighbors >= 1");
        let t = &self.training;
        ensure!(t.batch_size >= 1, "batch_size must be positive");
        ensure!((0.0..1.0).contains(&t.validation_fraction), "validation_fraction must be in [0, 1)");
        ensure!(t.learning_rate >= 0.0, "learning_rate must be nonnegative");
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.scene().unwrap().num_sensors(), 12);
        assert_eq!(cfg.num_zones(), 8);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            "schema_version = 1\nd_train = 100\nmodels = [\"pnn\"]\n[detection]\nintegration_ns = 4.0\n[channel]\nmean_clusters = 2.0\n",
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.detection.num_bins(), 50);
        assert_eq!(cfg.channel.rays_per_path, 6);
        assert_eq!(cfg.models, vec![ModelKind::Pnn]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(&|c| c.schema_version = 2));
        assert!(bad(&|c| c.d_test = 0));
        assert!(bad(&|c| c.scenario_seeds = vec![5, 5]));
        assert!(bad(&|c| c.scenario_seeds = vec![c.seed]));
        assert!(bad(&|c| c.selection.f_max = 100));
        assert!(bad(&|c| c.scene.dr = 2.0));
        assert!(toml::from_str::<ExperimentConfig>("unknown_key = 3").is_err());
    }
}
