use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossOutput, Model, TrainingParams};
use crate::optim::Adam;
use crate::tensor::Tensor;

/// Labelled records, one input tensor per model branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if inputs.iter().any(|t| t.batch() != labels.len()) {
            return Err(Error::Shape(format!("every input needs {} records", labels.len())));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.iter().map(|t| t.gather(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    /// `None` without a validation split.
    pub val_acc: Option<f64>,
}

/// Deterministic train/validation split of `n` records.
pub fn split_indices(n: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    idx.shuffle(&mut rng);
    let n_val = ((n as f64) * validation_fraction.clamp(0.0, 1.0)).round() as usize;
    let n_val = n_val.min(n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// One mini-batch gradient, optionally spread over worker threads.
fn batch_gradient(model: &Model, batch: &Dataset, threads: usize) -> Result<(LossOutput, Vec<Vec<f64>>)> {
    let n = batch.len();
    if threads <= 1 || n < 2 * threads {
        let mut grads = model.zero_grads();
        let out = model.loss_and_grad(&batch.inputs, &batch.labels, &mut grads)?;
        return Ok((out, grads));
    }
    let chunk = n.div_ceil(threads);
    let pieces: Vec<Vec<usize>> = (0..n).collect::<Vec<_>>().chunks(chunk).map(|c| c.to_vec()).collect();
    let results: Vec<Result<(LossOutput, Vec<Vec<f64>>, usize)>> = std::thread::scope(|s| {
        let handles: Vec<_> = pieces
            .iter()
            .map(|idx| {
                s.spawn(move || {
                    let part = batch.subset(idx);
                    let mut grads = model.zero_grads();
                    let out = model.loss_and_grad(&part.inputs, &part.labels, &mut grads)?;
                    Ok((out, grads, idx.len()))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut total = model.zero_grads();
    let mut loss = 0.0;
    let mut correct = 0;
    for r in results {
        let (out, grads, len) = r?;
        let w = len as f64 / n as f64;
        loss += w * out.loss;
        correct += out.correct;
        for (t, g) in total.iter_mut().zip(grads) {
            for (a, b) in t.iter_mut().zip(g) {
                *a += w * b;
            }
        }
    }
    Ok((LossOutput { loss, correct }, total))
}

/// Fraction of records whose arg-max prediction equals the label.
pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Shape("accuracy of an empty dataset".into()));
    }
    let mut correct = 0;
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(512) {
        let part = data.subset(chunk);
        let pred = model.predict(&part.inputs)?;
        correct += pred.iter().zip(&part.labels).filter(|(p, y)| p == y).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Mini-batch Adam training. Returns one entry per epoch.
pub fn train(model: &mut Model, data: &Dataset, params: &TrainingParams) -> Result<Vec<EpochMetrics>> {
    if params.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if params.epochs == 0 {
        return Ok(Vec::new());
    }
    if data.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    let (train_idx, val_idx) = split_indices(data.len(), params.validation_fraction, params.seed);
    let validation = (!val_idx.is_empty()).then(|| data.subset(&val_idx));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(2);
    let mut adam = Adam::new(params.adam, model);
    let mut order = train_idx;
    let mut history = Vec::with_capacity(params.epochs);
    for epoch in 1..=params.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for idx in order.chunks(params.batch_size) {
            let batch = data.subset(idx);
            let (out, grads) = batch_gradient(model, &batch, params.threads)?;
            adam.update(model, &grads);
            loss_sum += out.loss * idx.len() as f64;
            correct += out.correct;
        }
        let val_acc = validation.as_ref().map(|v| accuracy(model, v)).transpose()?;
        let m = EpochMetrics {
            epoch,
            loss: loss_sum / order.len() as f64,
            train_acc: correct as f64 / order.len() as f64,
            val_acc,
        };
        log::debug!("epoch {epoch}: loss {:.4} train {:.3} val {:?}", m.loss, m.train_acc, m.val_acc);
        history.push(m);
    }
    Ok(history)
}
