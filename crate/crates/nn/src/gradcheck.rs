use crate::error::Result;
use crate::model::Model;
use crate::tensor::Tensor;

/// Worst parameter gradient mismatch found by [`gradient_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// `(parameter tensor, element)` of the worst entry.
    pub worst: (usize, usize),
    pub checked: usize,
}

/// Compares back-propagated gradients of the mean cross-entropy with central
/// differences of step `h` for every parameter. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &Model, inputs: &[Tensor], labels: &[usize], h: f64) -> Result<GradCheck> {
    let mut analytic = model.zero_grads();
    model.loss_and_grad(inputs, labels, &mut analytic)?;
    let mut probe = model.clone();
    let mut result = GradCheck { max_relative_error: 0.0, worst: (0, 0), checked: 0 };
    let loss_at = |m: &Model| -> Result<f64> { Ok(m.loss_and_grad(inputs, labels, &mut m.zero_grads())?.loss) };
    for t in 0..analytic.len() {
        for i in 0..analytic[t].len() {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + h;
            let up = loss_at(&probe)?;
            probe.params_mut()[t][i] = orig - h;
            let down = loss_at(&probe)?;
            probe.params_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t][i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if err > result.max_relative_error {
                result.max_relative_error = err;
                result.worst = (t, i);
            }
            result.checked += 1;
        }
    }
    Ok(result)
}
