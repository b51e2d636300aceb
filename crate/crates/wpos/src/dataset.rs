//! Dataset generation and the on-disk layout.
//!
//! One *cell* is a (scenario seed, direct-path setting, SNR, repeat) tuple. Its
//! directory holds:
//!
//! - `scenario.json`: the frozen environment;
//! - `noise.json`: the calibrated noise level;
//! - `pdp.bin`: every raw PDP (see [`write_pdp_bin`]);
//! - `records.jsonl`: per record split, zone, target, stream and TOA/RSS features;
//! - `features_F{F}.jsonl`: top-F powers and bin indices for every F in the grid;
//! - `pdp.csv` when CSV output is enabled.
//!
//! Record `i` draws its target and channel from one stream and its receiver noise
//! from another, both keyed by (scenario seed, repeat, i). Neither depends on the
//! SNR or the direct-path setting, so cells that differ only in those share
//! targets and fading.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use wpos_core::channel::{generate_scenario, realize, Scenario};
use wpos_core::features::{toa_rss_features, FeatureRecord};
use wpos_core::geometry::sample_target_location;
use wpos_core::pdp::{calibrate_noise, deposit_energy, synthesize_pdp};
use wpos_core::rng::{mix, stream};

use crate::config::ExperimentConfig;

const PDP_MAGIC: &[u8; 8] = b"WPOSPDP\0";
const PDP_VERSION: u32 = 1;
pub const RECORD_SCHEMA: u32 = 1;

const TAG_CHANNEL: u64 = 0xC4A1;
const TAG_NOISE: u64 = 0x9015E;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: u64,
    pub los: bool,
    pub snr_db: f64,
    pub repeat: usize,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!("s{}_{}_snr{}_r{}", self.scenario, if self.los { "los" } else { "nlos" }, self.snr_db, self.repeat)
    }

    /// Seed shared by every stream of this cell's records.
    pub fn record_seed(&self) -> u64 {
        mix(self.scenario, self.repeat as u64)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dir_name())
    }
}

/// Every cell of the configuration, in a fixed order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &scenario in &cfg.scenario_seeds {
        for &los in &cfg.los {
            for &snr_db in &cfg.snr_db {
                for repeat in 0..cfg.repeats {
                    out.push(Cell { scenario, los, snr_db, repeat });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub schema: u32,
    pub index: usize,
    pub scenario: u64,
    pub split: Split,
    pub zone: usize,
    pub target: [f64; 3],
    /// Streams `(seed, index)` for the channel and for the noise.
    pub channel_stream: [u64; 2],
    pub noise_stream: [u64; 2],
    /// First threshold crossing per sensor, in bins.
    pub toa: Vec<usize>,
    /// Total received energy per sensor.
    pub rss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseInfo {
    pub snr_db: f64,
    pub sigma2: Vec<f64>,
    pub calibration_seed: u64,
    pub calibration_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureLine {
    index: usize,
    #[serde(flatten)]
    record: FeatureRecord,
}

/// All records of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub cell: Cell,
    pub scenario: Scenario,
    pub noise: NoiseInfo,
    pub records: Vec<RecordMeta>,
    pub sensors: usize,
    pub bins: usize,
    /// `records x sensors x bins`, row-major.
    pub pdps: Vec<f64>,
}

impl CellData {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pdp(&self, record: usize, sensor: usize) -> &[f64] {
        let start = (record * self.sensors + sensor) * self.bins;
        &self.pdps[start..start + self.bins]
    }

    pub fn record_pdp(&self, record: usize) -> &[f64] {
        let k = self.sensors * self.bins;
        &self.pdps[record * k..(record + 1) * k]
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.records.iter().filter(|r| r.split == split).map(|r| r.index).collect()
    }

    /// Top-`f` features of every record.
    pub fn features(&self, f: usize) -> Result<Vec<FeatureRecord>> {
        self.records
            .iter()
            .map(|r| {
                let mut powers = Vec::with_capacity(self.sensors * f);
                let mut bins = Vec::with_capacity(self.sensors * f);
                for m in 0..self.sensors {
                    let (p, b) = wpos_core::features::extract_features(self.pdp(r.index, m), f)?;
                    powers.extend(p);
                    bins.extend(b);
                }
                Ok(FeatureRecord { sensors: self.sensors, f, powers, bins, zone: r.zone })
            })
            .collect()
    }
}

/// Noise level at 0 dB; other SNRs are a fixed rescaling of it.
pub fn reference_noise(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let scene = cfg.scene()?;
    Ok(calibrate_noise(&cfg.channel, &scene, 0.0, cfg.calibration_samples, cfg.seed)?)
}

fn generate_record(cfg: &ExperimentConfig, cell: &Cell, scenario: &Scenario, sigma2: &[f64], index: usize) -> Result<(RecordMeta, Vec<f64>)> {
    let scene = cfg.scene()?;
    let layout = cfg.zone_layout()?;
    let channel_seed = mix(cell.record_seed(), TAG_CHANNEL);
    let noise_seed = mix(cell.record_seed(), TAG_NOISE);
    let mut rng = stream(channel_seed, index as u64);
    let target = sample_target_location(&scene, &mut rng)?;
    let realization = realize(&cfg.channel, &scene, scenario, &target, cfg.detection.frame_ns, &mut rng)?;
    let energies = deposit_energy(&realization, &cfg.detection)?;
    let nu = cfg.detection.dof();
    let mut noise_rng = stream(noise_seed, index as u64);
    let mut pdps = Vec::with_capacity(scene.num_sensors() * cfg.detection.num_bins());
    let (mut toa, mut rss) = (Vec::new(), Vec::new());
    for (m, e) in energies.iter().enumerate() {
        let pdp = synthesize_pdp(e, sigma2[m], nu, &mut noise_rng)?;
        let (t, r) = toa_rss_features(pdp.as_slice(), sigma2[m], nu);
        toa.push(t);
        rss.push(r);
        pdps.extend_from_slice(pdp.as_slice());
    }
    let meta = RecordMeta {
        schema: RECORD_SCHEMA,
        index,
        scenario: cell.scenario,
        split: if index < cfg.d_train { Split::Train } else { Split::Test },
        zone: layout.zone_of(&target)?,
        target: target.to_array(),
        channel_stream: [channel_seed, index as u64],
        noise_stream: [noise_seed, index as u64],
        toa,
        rss,
    };
    Ok((meta, pdps))
}

/// Simulates one cell. `reference_sigma2` is the 0 dB noise level from [`reference_noise`].
pub fn generate_cell(cfg: &ExperimentConfig, cell: Cell, reference_sigma2: &[f64], threads: usize) -> Result<CellData> {
    let scene = cfg.scene()?;
    let scenario = generate_scenario(&cfg.channel, &scene, cell.los, &mut stream(cell.scenario, 0))?;
    let scale = 10f64.powf(-cell.snr_db / 10.0);
    let sigma2: Vec<f64> = reference_sigma2.iter().map(|s| s * scale).collect();
    let n = cfg.d_train + cfg.d_test;

    let threads = threads.clamp(1, n);
    let chunk = n.div_ceil(threads);
    let parts: Vec<Result<Vec<(RecordMeta, Vec<f64>)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (scenario, sigma2) = (&scenario, &sigma2);
                s.spawn(move || {
                    (t * chunk..((t + 1) * chunk).min(n)).map(|i| generate_record(cfg, &cell, scenario, sigma2, i)).collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generator thread panicked")).collect()
    });
    let mut records = Vec::with_capacity(n);
    let mut pdps = Vec::with_capacity(n * scene.num_sensors() * cfg.detection.num_bins());
    for part in parts {
        for (meta, p) in part.with_context(|| format!("generating cell {cell}"))? {
            records.push(meta);
            pdps.extend(p);
        }
    }
    Ok(CellData {
        cell,
        scenario,
        noise: NoiseInfo { snr_db: cell.snr_db, sigma2, calibration_seed: cfg.seed, calibration_samples: cfg.calibration_samples },
        records,
        sensors: scene.num_sensors(),
        bins: cfg.detection.num_bins(),
        pdps,
    })
}

/// Raw PDP dump: magic `WPOSPDP\0`, `u32` version, `u64` records, sensors and bins,
/// then every power as little-endian `f64`.
pub fn write_pdp_bin(path: &Path, data: &CellData) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    w.write_all(PDP_MAGIC)?;
    w.write_all(&PDP_VERSION.to_le_bytes())?;
    for v in [data.len(), data.sensors, data.bins] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in &data.pdps {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Returns `(records, sensors, bins, values)`.
pub fn read_pdp_bin(path: &Path) -> Result<(usize, usize, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?.read_to_end(&mut bytes)?;
    ensure!(bytes.len() >= 36 && &bytes[..8] == PDP_MAGIC, "{} is not a PDP dump", path.display());
    let version = u32::from_le_bytes(bytes[8..12].try_into()?);
    ensure!(version == PDP_VERSION, "{}: unsupported PDP version {version}", path.display());
    let dim = |k: usize| -> Result<usize> { Ok(u64::from_le_bytes(bytes[12 + 8 * k..20 + 8 * k].try_into()?) as usize) };
    let (n, m, nb) = (dim(0)?, dim(1)?, dim(2)?);
    let body = &bytes[36..];
    ensure!(body.len() == n * m * nb * 8, "{}: body holds {} bytes, header implies {}", path.display(), body.len(), n * m * nb * 8);
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((n, m, nb, values))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .map(|(i, line)| serde_json::from_str(&line?).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

pub fn features_file(f: usize) -> String {
    format!("features_F{f}.jsonl")
}

/// Writes a cell directory and returns the files written, relative to `dir`.
pub fn write_cell(dir: &Path, data: &CellData, grid: impl IntoIterator<Item = usize>, csv: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let mut add = |name: &str| {
        files.push(PathBuf::from(name));
        dir.join(name)
    };
    write_json(&add("scenario.json"), &data.scenario)?;
    write_json(&add("noise.json"), &data.noise)?;
    write_pdp_bin(&add("pdp.bin"), data)?;
    write_jsonl(&add("records.jsonl"), &data.records)?;
    for f in grid {
        let rows = data.features(f)?.into_iter().enumerate().map(|(index, record)| FeatureLine { index, record });
        write_jsonl(&add(&features_file(f)), rows)?;
    }
    if csv {
        let path = add("pdp.csv");
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut header = vec!["record".to_string(), "sensor".to_string()];
        header.extend((0..data.bins).map(|n| format!("bin{n}")));
        w.write_record(&header)?;
        for r in 0..data.len() {
            for m in 0..data.sensors {
                let mut row = vec![r.to_string(), m.to_string()];
                row.extend(data.pdp(r, m).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
    }
    Ok(files)
}

pub fn read_cell(dir: &Path, cell: Cell) -> Result<CellData> {
    ensure!(dir.is_dir(), "dataset directory {} is missing; run `wpos generate` first", dir.display());
    let scenario = read_json(&dir.join("scenario.json"))?;
    let noise: NoiseInfo = read_json(&dir.join("noise.json"))?;
    let records: Vec<RecordMeta> = read_jsonl(&dir.join("records.jsonl"))?;
    let (n, sensors, bins, pdps) = read_pdp_bin(&dir.join("pdp.bin"))?;
    ensure!(n == records.len(), "{}: {} PDP records but {} metadata lines", dir.display(), n, records.len());
    for (i, r) in records.iter().enumerate() {
        if r.index != i || r.schema != RECORD_SCHEMA {
            bail!("{}: record line {} has index {} and schema {}", dir.display(), i + 1, r.index, r.schema);
        }
    }
    Ok(CellData { cell, scenario, noise, records, sensors, bins, pdps })
}

/// Features of one F as written by [`write_cell`].
pub fn read_features(dir: &Path, f: usize) -> Result<Vec<FeatureRecord>> {
    let path = dir.join(features_file(f));
    ensure!(path.is_file(), "{} is missing; F = {f} is not in the generated grid", path.display());
    let lines: Vec<FeatureLine> = read_jsonl(&path)?;
    lines
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            ensure!(l.index == i && l.record.f == f, "{} line {} is out of order or has F = {}", path.display(), i + 1, l.record.f);
            Ok(l.record)
        })
        .collect()
}
