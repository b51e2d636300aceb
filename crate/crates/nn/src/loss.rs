use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax of a `(batch, classes)` tensor.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let k = logits.sample_len();
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::new(logits.shape(), out).expect("same shape")
}

/// Mean cross-entropy and its gradient `(p - onehot) / n` with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let n = logits.batch();
    let k = logits.sample_len();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Shape(format!("label {bad} outside {k} classes")));
    }
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        grad.data_mut()[i * k + y] -= 1.0;
    }
    let loss = loss / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("cross-entropy is {loss}; logits finite: {}", logits.is_finite())));
    }
    for g in grad.data_mut() {
        *g /= n as f64;
    }
    Ok((loss, grad))
}
