//! Exceedance and acquisition probabilities for the assumed signal bins.

use crate::error::{Error, Result};
use crate::selection::marcum::marcum_q;

/// Midpoint between the `f`-th largest mean power and the next one.
pub fn separating_threshold(mean_ordered: &[f64], f: usize) -> Result<f64> {
    if f == 0 || f >= mean_ordered.len() {
        return Err(Error::Domain(format!("threshold needs 1 <= F < {}, got {f}", mean_ordered.len())));
    }
    Ok(0.5 * (mean_ordered[f - 1] + mean_ordered[f]))
}

/// Probability that each assumed signal bin exceeds `threshold`.
///
/// The first Marcum argument is `sqrt(2 (λ/ψ²)²)`, with the ratio squared under
/// the root.
pub fn exceedance_probs(psi2: f64, lambda: &[f64], threshold: f64, nu: f64) -> Result<Vec<f64>> {
    if !(psi2 > 0.0) {
        return Err(Error::Domain(format!("psi2 must be positive, got {psi2}")));
    }
    let b = (2.0 * threshold / psi2).sqrt();
    lambda
        .iter()
        .map(|&l| {
            let ratio = l / psi2;
            marcum_q(nu / 2.0, (2.0 * ratio * ratio).sqrt(), b)
        })
        .collect()
}

/// Distribution of the number of exceeding bins (Poisson-binomial), entries `0..=F`.
pub fn acquisition_distribution(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("probability {bad} outside [0, 1]")));
    }
    let mut dist = vec![0.0; p.len() + 1];
    dist[0] = 1.0;
    for (i, &pi) in p.iter().enumerate() {
        for f in (0..=i + 1).rev() {
            let stay = dist[f] * (1.0 - pi);
            let take = if f > 0 { dist[f - 1] * pi } else { 0.0 };
            dist[f] = stay + take;
        }
    }
    Ok(dist)
}

/// Probability that exactly `f` of the bins exceed the threshold.
pub fn acquisition_prob(p: &[f64], f: usize) -> Result<f64> {
    if f > p.len() {
        return Err(Error::Domain(format!("f = {f} exceeds F = {}", p.len())));
    }
    Ok(acquisition_distribution(p)?[f])
}
