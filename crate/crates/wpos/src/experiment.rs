//! Model inputs, training and evaluation for one cell.

use std::time::Instant;

use anyhow::{ensure, Result};
use serde::{Deserialize, Serialize};
use wpos_core::features::{assemble_matrices, DomainStats, FeatureRecord, NormalizationStats};
use wpos_core::rng::mix;
use wpos_nn::{
    accuracy, build_pdp_cnn, build_pnn, build_toa_rss_mlp, train, Dataset, EpochMetrics, Model, ModelKind, ModelSpec,
    Tensor,
};

use crate::config::ExperimentConfig;
use crate::dataset::{Cell, CellData, Split};

/// Network inputs of the training and test splits.
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    /// Input values per record.
    pub feature_dim: usize,
}

fn labels(data: &CellData, idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| data.records[i].zone).collect()
}

fn split_tensors(values: impl Fn(usize) -> Vec<f64>, idx: &[usize], shape: [usize; 3]) -> Result<Tensor> {
    let mut out = Vec::with_capacity(idx.len() * shape.iter().product::<usize>());
    for &i in idx {
        out.extend(values(i));
    }
    Ok(Tensor::new([idx.len(), shape[0], shape[1], shape[2]], out)?)
}

/// Normalized inputs for `kind`. The P-NN needs the cell's top-F `features`.
pub fn prepare(kind: ModelKind, data: &CellData, features: Option<&[FeatureRecord]>) -> Result<PreparedData> {
    let train_idx = data.indices(Split::Train);
    let test_idx = data.indices(Split::Test);
    ensure!(!train_idx.is_empty() && !test_idx.is_empty(), "cell {} needs training and test records", data.cell);
    let m = data.sensors;
    let build = |idx: &[usize], make: &dyn Fn(&[usize]) -> Result<Vec<Tensor>>| -> Result<Dataset> {
        Ok(Dataset::new(make(idx)?, labels(data, idx))?)
    };
    match kind {
        ModelKind::Pnn => {
            let features = features.ok_or_else(|| anyhow::anyhow!("the P-NN needs top-F features"))?;
            ensure!(features.len() == data.len(), "{} feature records for {} records", features.len(), data.len());
            let f = features[0].f;
            let train_records: Vec<FeatureRecord> = train_idx.iter().map(|&i| features[i].clone()).collect();
            let stats = NormalizationStats::fit(&train_records)?;
            let matrices = assemble_matrices(features, &stats)?;
            let make = |idx: &[usize]| -> Result<Vec<Tensor>> {
                Ok(vec![
                    split_tensors(|i| matrices[i].powers.clone(), idx, [1, m, f])?,
                    split_tensors(|i| matrices[i].bins.clone(), idx, [1, m, f])?,
                ])
            };
            Ok(PreparedData { train: build(&train_idx, &make)?, test: build(&test_idx, &make)?, feature_dim: 2 * f * m })
        }
        ModelKind::PdpCnn => {
            let stats = DomainStats::fit(train_idx.iter().flat_map(|&i| data.record_pdp(i).iter().copied()))?;
            let make = |idx: &[usize]| -> Result<Vec<Tensor>> {
                Ok(vec![split_tensors(
                    |i| data.record_pdp(i).iter().map(|&v| stats.apply(v)).collect(),
                    idx,
                    [1, m, data.bins],
                )?])
            };
            Ok(PreparedData { train: build(&train_idx, &make)?, test: build(&test_idx, &make)?, feature_dim: m * data.bins })
        }
        ModelKind::ToaRss => {
            let toa = DomainStats::fit(train_idx.iter().flat_map(|&i| data.records[i].toa.iter().map(|&t| t as f64)))?;
            let rss = DomainStats::fit(train_idx.iter().flat_map(|&i| data.records[i].rss.iter().copied()))?;
            let row = |i: usize| -> Vec<f64> {
                let r = &data.records[i];
                r.toa.iter().map(|&t| toa.apply(t as f64)).chain(r.rss.iter().map(|&v| rss.apply(v))).collect()
            };
            let make = |idx: &[usize]| -> Result<Vec<Tensor>> { Ok(vec![split_tensors(row, idx, [2 * m, 1, 1])?]) };
            Ok(PreparedData { train: build(&train_idx, &make)?, test: build(&test_idx, &make)?, feature_dim: 2 * m })
        }
    }
}

/// Seed of one training run, derived from the base seed, the cell's record
/// streams and the model.
pub fn run_seed(cfg: &ExperimentConfig, cell: &Cell, kind: ModelKind, f: Option<usize>) -> u64 {
    let tag = match kind {
        ModelKind::Pnn => 1,
        ModelKind::PdpCnn => 2,
        ModelKind::ToaRss => 3,
    };
    mix(mix(cfg.seed, cell.record_seed()), tag * 1000 + f.unwrap_or(0) as u64)
}

pub fn model_spec(cfg: &ExperimentConfig, kind: ModelKind, f: Option<usize>, seed: u64, threads: usize) -> Result<ModelSpec> {
    let m = cfg.scene()?.num_sensors();
    let zones = cfg.num_zones();
    let mut spec = match kind {
        ModelKind::Pnn => build_pnn(m, f.ok_or_else(|| anyhow::anyhow!("the P-NN needs a feature count"))?, zones),
        ModelKind::PdpCnn => build_pdp_cnn(m, cfg.detection.num_bins(), zones),
        ModelKind::ToaRss => build_toa_rss_mlp(m, zones),
    };
    spec.seed = seed;
    spec.training = cfg.training_params(mix(seed, 1), threads);
    Ok(spec)
}

pub struct TrainedModel {
    pub model: Model,
    pub history: Vec<EpochMetrics>,
    pub seconds: f64,
}

pub fn train_model(spec: ModelSpec, train_set: &Dataset) -> Result<TrainedModel> {
    let params = spec.training.clone();
    let mut model = Model::new(spec)?;
    let start = Instant::now();
    let history = train(&mut model, train_set, &params)?;
    Ok(TrainedModel { model, history, seconds: start.elapsed().as_secs_f64() })
}

/// Zone classification rate in percent.
pub fn classification_rate(model: &Model, test: &Dataset) -> Result<f64> {
    Ok(100.0 * accuracy(model, test)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: u64,
    pub los: bool,
    pub snr_db: f64,
    pub repeat: usize,
    pub model: String,
    pub f: Option<usize>,
    pub feature_dim: usize,
    pub run_seed: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scenario: u64,
    pub los: bool,
    pub snr_db: f64,
    pub repeat: usize,
    pub model: String,
    pub f: Option<usize>,
    pub train_seconds: f64,
}

/// Trains and evaluates one model in memory.
pub fn run_cell_model(
    cfg: &ExperimentConfig,
    data: &CellData,
    kind: ModelKind,
    features: Option<&[FeatureRecord]>,
    threads: usize,
) -> Result<(MetricsRow, TrainedModel)> {
    let f = features.map(|x| x[0].f).filter(|_| kind == ModelKind::Pnn);
    let prepared = prepare(kind, data, features)?;
    let seed = run_seed(cfg, &data.cell, kind, f);
    let trained = train_model(model_spec(cfg, kind, f, seed, threads)?, &prepared.train)?;
    let rate = classification_rate(&trained.model, &prepared.test)?;
    let c = data.cell;
    let row = MetricsRow {
        scenario: c.scenario,
        los: c.los,
        snr_db: c.snr_db,
        repeat: c.repeat,
        model: kind.to_string(),
        f,
        feature_dim: prepared.feature_dim,
        run_seed: seed,
        rate,
    };
    Ok((row, trained))
}
