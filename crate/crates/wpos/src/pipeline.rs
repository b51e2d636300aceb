//! The CLI commands. Every command reads the configuration, works under
//! `out_dir` and records its outputs in `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use wpos_nn::{checkpoint, ModelKind};

use crate::config::ExperimentConfig;
use crate::dataset::{self, Cell};
use crate::experiment::{self, MetricsRow, TimingRow};
use crate::select;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub kind: String,
    /// Seed that generated the file.
    pub seed: u64,
    pub cell: Option<Cell>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub base_seed: u64,
    pub scenario_seeds: Vec<u64>,
    pub files: BTreeMap<PathBuf, ManifestEntry>,
}

impl Manifest {
    fn path(out: &Path) -> PathBuf {
        out.join("manifest.json")
    }

    pub fn load_or_new(cfg: &ExperimentConfig) -> Result<Self> {
        let path = Self::path(&cfg.out_dir);
        if path.is_file() {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
        }
        Ok(Self {
            schema_version: crate::config::SCHEMA_VERSION,
            base_seed: cfg.seed,
            scenario_seeds: cfg.scenario_seeds.clone(),
            files: BTreeMap::new(),
        })
    }

    pub fn add(&mut self, path: PathBuf, kind: &str, seed: u64, cell: Option<Cell>) {
        self.files.insert(path.clone(), ManifestEntry { path, kind: kind.into(), seed, cell });
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let path = Self::path(out);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

pub fn data_dir(cfg: &ExperimentConfig, cell: &Cell) -> PathBuf {
    cfg.out_dir.join("data").join(cell.dir_name())
}

fn model_file(kind: ModelKind, f: Option<usize>) -> String {
    match f {
        Some(f) => format!("{kind}_F{f}"),
        None => kind.to_string(),
    }
}

fn relative(cfg: &ExperimentConfig, p: &Path) -> PathBuf {
    p.strip_prefix(&cfg.out_dir).unwrap_or(p).to_path_buf()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| row.with_context(|| format!("parsing {}", path.display()))).collect()
}

/// Feature counts that a model is trained for: the grid for the P-NN, none otherwise.
fn feature_counts(cfg: &ExperimentConfig, kind: ModelKind) -> Vec<Option<usize>> {
    match kind {
        ModelKind::Pnn => cfg.selection.grid().map(Some).collect(),
        _ => vec![None],
    }
}

fn save_config(cfg: &ExperimentConfig, manifest: &mut Manifest) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
    manifest.add(PathBuf::from("config.toml"), "config", cfg.seed, None);
    Ok(())
}

pub fn cmd_generate(cfg: &ExperimentConfig, threads: usize) -> Result<()> {
    let mut manifest = Manifest::load_or_new(cfg)?;
    save_config(cfg, &mut manifest)?;
    log::info!("calibrating noise with {} target draws", cfg.calibration_samples);
    let reference = dataset::reference_noise(cfg)?;
    for cell in dataset::cells(cfg) {
        log::info!("generating {cell}");
        let data = dataset::generate_cell(cfg, cell, &reference, threads)?;
        let dir = data_dir(cfg, &cell);
        for file in dataset::write_cell(&dir, &data, cfg.selection.grid(), cfg.write_csv)? {
            manifest.add(relative(cfg, &dir.join(&file)), "dataset", cell.record_seed(), Some(cell));
        }
    }
    manifest.save(&cfg.out_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummaryRow {
    pub scenario: u64,
    pub los: bool,
    pub snr_db: f64,
    pub repeat: usize,
    pub weight: f64,
    pub f_star: usize,
}

pub fn cmd_select_f(cfg: &ExperimentConfig) -> Result<Vec<SelectionSummaryRow>> {
    let mut manifest = Manifest::load_or_new(cfg)?;
    let dir = cfg.out_dir.join("selection");
    std::fs::create_dir_all(&dir)?;
    let mut summary = Vec::new();
    for cell in dataset::cells(cfg) {
        let ddir = data_dir(cfg, &cell);
        let data = dataset::read_cell(&ddir, cell)?;
        let tables = select::select_for_cell(cfg, &data, |f| dataset::read_features(&ddir, f))
            .with_context(|| format!("feature-size selection for {cell}"))?;
        let path = dir.join(format!("{}.csv", cell.dir_name()));
        select::write_selection_csv(std::fs::File::create(&path)?, &tables)?;
        manifest.add(relative(cfg, &path), "selection", cell.record_seed(), Some(cell));
        log::info!("{cell}: F* = {}", tables.best_f);
        summary.push(SelectionSummaryRow {
            scenario: cell.scenario,
            los: cell.los,
            snr_db: cell.snr_db,
            repeat: cell.repeat,
            weight: cfg.selection.weight(cell.los),
            f_star: tables.best_f,
        });
    }
    let path = dir.join("summary.csv");
    write_csv(&path, &summary)?;
    manifest.add(relative(cfg, &path), "selection", cfg.seed, None);
    manifest.save(&cfg.out_dir)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HistoryRow {
    epoch: usize,
    loss: f64,
    train_acc: f64,
    val_acc: Option<f64>,
}

pub fn cmd_train(cfg: &ExperimentConfig, models: &[ModelKind], threads: usize) -> Result<()> {
    let mut manifest = Manifest::load_or_new(cfg)?;
    let mut timings = Vec::new();
    for cell in dataset::cells(cfg) {
        let ddir = data_dir(cfg, &cell);
        let data = dataset::read_cell(&ddir, cell)?;
        let mdir = cfg.out_dir.join("models").join(cell.dir_name());
        std::fs::create_dir_all(&mdir)?;
        for &kind in models {
            for f in feature_counts(cfg, kind) {
                let features = f.map(|f| dataset::read_features(&ddir, f)).transpose()?;
                let prepared = experiment::prepare(kind, &data, features.as_deref())?;
                let seed = experiment::run_seed(cfg, &cell, kind, f);
                let spec = experiment::model_spec(cfg, kind, f, seed, threads)?;
                log::info!("training {} on {cell}", model_file(kind, f));
                let trained = experiment::train_model(spec, &prepared.train)?;
                let name = model_file(kind, f);
                let ckpt = mdir.join(format!("{name}.bin"));
                checkpoint::save(&trained.model, &ckpt).with_context(|| format!("writing {}", ckpt.display()))?;
                let hist = mdir.join(format!("{name}_history.csv"));
                let rows: Vec<HistoryRow> = trained
                    .history
                    .iter()
                    .map(|h| HistoryRow { epoch: h.epoch, loss: h.loss, train_acc: h.train_acc, val_acc: h.val_acc })
                    .collect();
                write_csv(&hist, &rows)?;
                manifest.add(relative(cfg, &ckpt), "checkpoint", seed, Some(cell));
                manifest.add(relative(cfg, &hist), "history", seed, Some(cell));
                timings.push(TimingRow {
                    scenario: cell.scenario,
                    los: cell.los,
                    snr_db: cell.snr_db,
                    repeat: cell.repeat,
                    model: kind.to_string(),
                    f,
                    train_seconds: trained.seconds,
                });
            }
        }
    }
    // wall times vary between runs, so they live apart from the metrics
    let path = cfg.out_dir.join("timings.csv");
    write_csv(&path, &timings)?;
    manifest.add(relative(cfg, &path), "timings", cfg.seed, None);
    manifest.save(&cfg.out_dir)
}

pub fn cmd_eval(cfg: &ExperimentConfig, models: &[ModelKind]) -> Result<Vec<MetricsRow>> {
    let mut manifest = Manifest::load_or_new(cfg)?;
    let mut metrics = Vec::new();
    for cell in dataset::cells(cfg) {
        let ddir = data_dir(cfg, &cell);
        let data = dataset::read_cell(&ddir, cell)?;
        for &kind in models {
            for f in feature_counts(cfg, kind) {
                let ckpt = cfg.out_dir.join("models").join(cell.dir_name()).join(format!("{}.bin", model_file(kind, f)));
                let model = checkpoint::load(&ckpt).with_context(|| format!("loading {}; run `wpos train` first", ckpt.display()))?;
                let features = f.map(|f| dataset::read_features(&ddir, f)).transpose()?;
                let prepared = experiment::prepare(kind, &data, features.as_deref())?;
                metrics.push(MetricsRow {
                    scenario: cell.scenario,
                    los: cell.los,
                    snr_db: cell.snr_db,
                    repeat: cell.repeat,
                    model: kind.to_string(),
                    f,
                    feature_dim: prepared.feature_dim,
                    run_seed: model.spec().seed,
                    rate: experiment::classification_rate(&model, &prepared.test)?,
                });
            }
        }
    }
    let path = cfg.out_dir.join("metrics.csv");
    write_csv(&path, &metrics)?;
    manifest.add(relative(cfg, &path), "metrics", cfg.seed, None);
    for (name, rows) in [("summary.csv", summarize(&metrics)), ("tradeoff.csv", tradeoff(&metrics))] {
        let p = cfg.out_dir.join(name);
        write_csv(&p, &rows)?;
        manifest.add(relative(cfg, &p), "summary", cfg.seed, None);
    }
    manifest.save(&cfg.out_dir)?;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: Option<u64>,
    pub los: bool,
    pub snr_db: f64,
    pub model: String,
    pub f: Option<usize>,
    pub feature_dim: usize,
    pub runs: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn group(metrics: &[MetricsRow], per_scenario: bool) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Option<u64>, bool, String, String, Option<usize>), Vec<&MetricsRow>> = BTreeMap::new();
    for m in metrics {
        let key = (per_scenario.then_some(m.scenario), m.los, format!("{:020.6}", m.snr_db + 1e6), m.model.clone(), m.f);
        groups.entry(key).or_default().push(m);
    }
    groups
        .into_values()
        .map(|rows| {
            let rates: Vec<f64> = rows.iter().map(|r| r.rate).collect();
            let (mean_rate, std_rate) = mean_std(&rates);
            let first = rows[0];
            SummaryRow {
                scenario: per_scenario.then_some(first.scenario),
                los: first.los,
                snr_db: first.snr_db,
                model: first.model.clone(),
                f: first.f,
                feature_dim: first.feature_dim,
                runs: rows.len(),
                mean_rate,
                std_rate,
            }
        })
        .collect()
}

/// Mean and standard deviation over repeats, per scenario.
pub fn summarize(metrics: &[MetricsRow]) -> Vec<SummaryRow> {
    group(metrics, true)
}

/// Rate against feature dimension, pooled over scenarios.
pub fn tradeoff(metrics: &[MetricsRow]) -> Vec<SummaryRow> {
    group(metrics, false)
}

/// Text report of the pooled rates, with the P-NN at the selected F where known.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<String> {
    let metrics: Vec<MetricsRow> = read_csv(&cfg.out_dir.join("metrics.csv")).context("run `wpos eval` first")?;
    let selection_path = cfg.out_dir.join("selection").join("summary.csv");
    let selection: Vec<SelectionSummaryRow> = if selection_path.is_file() { read_csv(&selection_path)? } else { Vec::new() };
    let mut out = String::from("los   snr_db  model     F    dim   runs  rate_mean  rate_std\n");
    for r in tradeoff(&metrics) {
        out.push_str(&format!(
            "{:<5} {:>6}  {:<8} {:>3} {:>5} {:>6} {:>10.2} {:>9.2}\n",
            r.los,
            r.snr_db,
            r.model,
            r.f.map(|f| f.to_string()).unwrap_or_else(|| "-".into()),
            r.feature_dim,
            r.runs,
            r.mean_rate,
            r.std_rate
        ));
    }
    if !selection.is_empty() {
        out.push_str("\nP-NN at the selected F*:\n");
        for s in &selection {
            let rate = metrics
                .iter()
                .find(|m| {
                    m.model == "pnn" && m.f == Some(s.f_star) && m.scenario == s.scenario && m.los == s.los && m.snr_db == s.snr_db && m.repeat == s.repeat
                })
                .map(|m| format!("{:.2}", m.rate))
                .unwrap_or_else(|| "n/a".into());
            out.push_str(&format!(
                "scenario {} {} {} dB repeat {}: F* = {} rate {}\n",
                s.scenario,
                if s.los { "LOS" } else { "NLOS" },
                s.snr_db,
                s.repeat,
                s.f_star,
                rate
            ));
        }
    }
    let path = cfg.out_dir.join("report.txt");
    std::fs::write(&path, &out)?;
    let mut manifest = Manifest::load_or_new(cfg)?;
    manifest.add(relative(cfg, &path), "report", cfg.seed, None);
    manifest.save(&cfg.out_dir)?;
    Ok(out)
}

/// Prints the worked example and optionally writes it as CSV.
pub fn cmd_table1(out: Option<&Path>) -> Result<String> {
    let tables = select::table1(0.5)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        select::write_selection_csv(std::fs::File::create(dir.join("table1.csv"))?, &tables)?;
    }
    Ok(select::render_table1(&tables))
}
