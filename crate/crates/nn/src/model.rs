//! Multi-branch classifier: each branch maps its own input to a flat vector,
//! the branch outputs are concatenated and a shared head produces the logits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Layer, LayerSpec, SampleShape};
use crate::loss::{softmax_cross_entropy, softmax_rows};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    /// `(channels, rows, cols)` of one input record.
    pub input: SampleShape,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of the training records held out for validation.
    pub validation_fraction: f64,
    /// Seed of the split and shuffling stream.
    pub seed: u64,
    /// Worker threads per mini-batch; 1 is the bit-reproducible mode.
    pub threads: usize,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self { adam: AdamConfig::default(), batch_size: 256, epochs: 50, validation_fraction: 0.1, seed: 0, threads: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub branches: Vec<BranchSpec>,
    /// Layers after the concatenation; the last must be `dense(classes)`.
    pub head: Vec<LayerSpec>,
    pub classes: usize,
    /// Weight initialization seed.
    pub seed: u64,
    pub training: TrainingParams,
}

impl ModelSpec {
    /// Flattened input size summed over branches.
    pub fn input_size(&self) -> usize {
        self.branches.iter().map(|b| b.input.iter().product::<usize>()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    branches: Vec<Vec<Layer>>,
    head: Vec<Layer>,
}

/// Activations kept for the backward pass.
struct Trace {
    branches: Vec<Vec<Tensor>>,
    head: Vec<Tensor>,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        if spec.branches.is_empty() {
            return Err(Error::Config("model needs at least one branch".into()));
        }
        if spec.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", spec.classes)));
        }
        match spec.head.last() {
            Some(LayerSpec::Dense { units }) if *units == spec.classes => {}
            _ => return Err(Error::Config(format!("head must end with dense({})", spec.classes))),
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut branches = Vec::new();
        let mut joined = 0;
        for (i, b) in spec.branches.iter().enumerate() {
            let mut shape = b.input;
            let mut layers = Vec::new();
            for l in &b.layers {
                let (layer, out) = Layer::build(l, shape, &mut rng)?;
                layers.push(layer);
                shape = out;
            }
            if shape[1] != 1 || shape[2] != 1 {
                return Err(Error::Config(format!("branch {i} ends with shape {shape:?}; add a flatten layer")));
            }
            joined += shape[0];
            branches.push(layers);
        }
        let mut shape = [joined, 1, 1];
        let mut head = Vec::new();
        for l in &spec.head {
            let (layer, out) = Layer::build(l, shape, &mut rng)?;
            head.push(layer);
            shape = out;
        }
        Ok(Self { spec, branches, head })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.branches.iter().flatten().chain(&self.head)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.branches.iter_mut().flatten().chain(self.head.iter_mut())
    }

    /// All parameter vectors in a fixed order: branches first, then the head.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        self.layers().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Zeroed gradient buffers matching [`Model::params`].
    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| vec![0.0; p.len()]).collect()
    }

    fn check_inputs(&self, inputs: &[Tensor]) -> Result<usize> {
        if inputs.len() != self.branches.len() {
            return Err(Error::Shape(format!("{} inputs for {} branches", inputs.len(), self.branches.len())));
        }
        let n = inputs[0].batch();
        for (x, b) in inputs.iter().zip(&self.spec.branches) {
            let s = x.shape();
            if s[1..] != b.input[..] || s[0] != n {
                return Err(Error::Shape(format!("input {s:?}, expected [{n}, {:?}]", b.input)));
            }
        }
        Ok(n)
    }

    fn forward_trace(&self, inputs: &[Tensor]) -> Result<Trace> {
        let n = self.check_inputs(inputs)?;
        let mut branches = Vec::with_capacity(self.branches.len());
        for (layers, x) in self.branches.iter().zip(inputs) {
            let mut acts = vec![x.clone()];
            for l in layers {
                let next = l.forward(acts.last().expect("nonempty"));
                acts.push(next);
            }
            branches.push(acts);
        }
        let width: usize = branches.iter().map(|a| a.last().expect("nonempty").sample_len()).sum();
        let mut joined = Vec::with_capacity(n * width);
        for i in 0..n {
            for acts in &branches {
                joined.extend_from_slice(acts.last().expect("nonempty").sample(i));
            }
        }
        let mut head = vec![Tensor::matrix(n, width, joined)?];
        for l in &self.head {
            let next = l.forward(head.last().expect("nonempty"));
            head.push(next);
        }
        Ok(Trace { branches, head })
    }

    pub fn logits(&self, inputs: &[Tensor]) -> Result<Tensor> {
        Ok(self.forward_trace(inputs)?.head.pop().expect("nonempty"))
    }

    /// Class probabilities, one row per record.
    pub fn forward(&self, inputs: &[Tensor]) -> Result<Tensor> {
        Ok(softmax_rows(&self.logits(inputs)?))
    }

    /// Arg-max class per record.
    pub fn predict(&self, inputs: &[Tensor]) -> Result<Vec<usize>> {
        let logits = self.logits(inputs)?;
        Ok((0..logits.batch()).map(|i| argmax(logits.sample(i))).collect())
    }

    /// Mean cross-entropy of the batch; its gradient is added to `grads`.
    pub fn loss_and_grad(&self, inputs: &[Tensor], labels: &[usize], grads: &mut [Vec<f64>]) -> Result<LossOutput> {
        let trace = self.forward_trace(inputs)?;
        let logits = trace.head.last().expect("nonempty");
        if labels.len() != logits.batch() || logits.batch() == 0 {
            return Err(Error::Shape(format!("{} labels for a batch of {}", labels.len(), logits.batch())));
        }
        let (loss, mut grad) = softmax_cross_entropy(logits, labels)?;
        let correct = (0..logits.batch()).filter(|&i| argmax(logits.sample(i)) == labels[i]).count();

        let offsets = self.param_offsets();
        let head_start = self.branches.len();
        for (k, layer) in self.head.iter().enumerate().rev() {
            let slot = offsets[head_start][k];
            grad = layer.backward(&trace.head[k], &grad, &mut grads[slot..slot + layer.num_param_tensors()]);
        }
        // split the joined gradient back into branch pieces
        let n = grad.batch();
        let widths: Vec<usize> = trace.branches.iter().map(|a| a.last().expect("nonempty").sample_len()).collect();
        let total: usize = widths.iter().sum();
        let mut start = 0;
        for (bi, (layers, acts)) in self.branches.iter().zip(&trace.branches).enumerate() {
            let w = widths[bi];
            let mut piece = Vec::with_capacity(n * w);
            for i in 0..n {
                piece.extend_from_slice(&grad.data()[i * total + start..i * total + start + w]);
            }
            start += w;
            let mut g = Tensor::new(acts.last().expect("nonempty").shape(), piece)?;
            for (k, layer) in layers.iter().enumerate().rev() {
                let slot = offsets[bi][k];
                g = layer.backward(&acts[k], &g, &mut grads[slot..slot + layer.num_param_tensors()]);
            }
        }
        Ok(LossOutput { loss, correct })
    }

    /// Index of the first parameter tensor of every layer, per branch and then the head.
    fn param_offsets(&self) -> Vec<Vec<usize>> {
        let mut next = 0;
        self.branches
            .iter()
            .chain(std::iter::once(&self.head))
            .map(|layers| {
                layers
                    .iter()
                    .map(|l| {
                        let at = next;
                        next += l.num_param_tensors();
                        at
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// Records whose arg-max matched the label.
    pub correct: usize,
}

/// Index of the largest value; the first on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_branch(classes: usize) -> ModelSpec {
        let branch = BranchSpec {
            input: [1, 3, 2],
            layers: vec![LayerSpec::conv3x3(2), LayerSpec::Relu, LayerSpec::Flatten],
        };
        ModelSpec {
            branches: vec![branch.clone(), branch],
            head: vec![LayerSpec::dense(4), LayerSpec::Relu, LayerSpec::dense(classes)],
            classes,
            seed: 3,
            training: TrainingParams::default(),
        }
    }

    fn inputs(n: usize) -> Vec<Tensor> {
        (0..2)
            .map(|k| Tensor::new([n, 1, 3, 2], (0..n * 6).map(|i| ((i * 7 + k * 3) % 5) as f64 - 2.0).collect()).unwrap())
            .collect()
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = Model::new(two_branch(5)).unwrap();
        let p = m.forward(&inputs(4)).unwrap();
        assert_eq!(p.shape(), [4, 5, 1, 1]);
        for i in 0..4 {
            assert!((p.sample(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let mut m = Model::new(two_branch(8)).unwrap();
        for p in m.params_mut() {
            p.fill(0.0);
        }
        let p = m.forward(&inputs(3)).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn identical_records_identical_rows() {
        let m = Model::new(two_branch(3)).unwrap();
        let x = inputs(1);
        let doubled: Vec<Tensor> = x.iter().map(|t| t.gather(&[0, 0])).collect();
        let p = m.forward(&doubled).unwrap();
        assert_eq!(p.sample(0), p.sample(1));
    }

    #[test]
    fn shape_errors() {
        let m = Model::new(two_branch(3)).unwrap();
        assert!(m.forward(&inputs(2)[..1]).is_err());
        let wrong = vec![Tensor::zeros([2, 1, 2, 3]), Tensor::zeros([2, 1, 3, 2])];
        assert!(m.forward(&wrong).is_err());
        let mut spec = two_branch(3);
        spec.head.pop();
        assert!(Model::new(spec).is_err());
        let mut spec = two_branch(3);
        spec.branches[0].layers.pop();
        assert!(Model::new(spec).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        assert_eq!(Model::new(two_branch(3)).unwrap(), Model::new(two_branch(3)).unwrap());
        let mut other = two_branch(3);
        other.seed = 4;
        assert_ne!(Model::new(two_branch(3)).unwrap(), Model::new(other).unwrap());
    }
}
