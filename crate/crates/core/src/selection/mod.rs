//! Adaptive feature-size selection.
//!
//! For every candidate `F` the selector scores two things:
//!
//! - **information**: the log-likelihood gain of modelling the `F` largest mean
//!   powers as signal bins, weighted by how many of those bins are expected to
//!   clear the signal/noise threshold (term (a));
//! - **separability**: the average nearest-neighbor KL divergence between zone
//!   feature distributions (term (b)).
//!
//! Both are normalized by their maximum over the grid and mixed with weight
//! `ε`; the chosen `F*` is the first maximizer.

pub mod acquisition;
pub mod knn;
pub mod likelihood;
pub mod marcum;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use acquisition::{acquisition_distribution, acquisition_prob, exceedance_probs, separating_threshold};
pub use knn::{kl_matrix, knn_kl, mean_kl};
pub use likelihood::{
    chi2_log_pdf_central, chi2_log_pdf_noncentral_approx, estimate_parameters, eta2, log_likelihood, ParameterEstimate,
};
pub use marcum::marcum_q;

/// Ordered mean powers of the ten-bin worked example (ν = 2, 15 dB, LOS).
pub const TABLE1_MEAN_ORDERED: [f64; 10] =
    [53.9e-7, 26.8e-7, 17.4e-7, 12.5e-7, 9.46e-7, 6.35e-7, 5.22e-7, 4.06e-7, 3.76e-7, 2.55e-7];

/// Separability terms for F = 3..=8 implied by the worked example's criterion values
/// `{0.79, 0.76, 0.89, 0.88, 0.87, 0.85}` at ε = 0.5.
pub const TABLE1_SEPARATION_TERMS: [f64; 6] = [0.925, 0.798, 0.994, 0.969, 0.946, 0.916];

/// Leading factor of the KNN divergence estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KlDimFactor {
    /// The feature count `F`.
    #[default]
    #[serde(rename = "F")]
    FeatureCount,
    /// The full vector dimension `2FM`.
    #[serde(rename = "2FM")]
    FullDimension,
}

impl KlDimFactor {
    pub fn value(self, f: usize, vector_dim: usize) -> f64 {
        match self {
            KlDimFactor::FeatureCount => f as f64,
            KlDimFactor::FullDimension => vector_dim as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionInputs {
    /// Ordered mean powers, nonincreasing, length `N_b`.
    pub mean_ordered: Vec<f64>,
    /// Chi-square degrees of freedom `2 W T_g`.
    pub dof: f64,
    pub f_min: usize,
    pub f_max: usize,
    /// Weight of the information term, in `[0, 1]`.
    pub weight: f64,
}

impl SelectionInputs {
    pub fn validate(&self) -> Result<()> {
        let nb = self.mean_ordered.len();
        if !(1 <= self.f_min && self.f_min <= self.f_max && self.f_max < nb) {
            return Err(Error::Config(format!(
                "feature range [{}, {}] must satisfy 1 <= F_min <= F_max < N_b = {nb}",
                self.f_min, self.f_max
            )));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::Config(format!("criterion weight {} outside [0, 1]", self.weight)));
        }
        if !(self.dof >= 1.0) {
            return Err(Error::Config(format!("degrees of freedom must be >= 1, got {}", self.dof)));
        }
        if self.mean_ordered.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("ordered mean powers must be nonincreasing".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> std::ops::RangeInclusive<usize> {
        self.f_min..=self.f_max
    }
}

/// Per-F intermediate values of the selection criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub f: usize,
    pub psi2: f64,
    pub lambda: Vec<f64>,
    pub eta2: Vec<f64>,
    pub log_likelihood: f64,
    pub ll_gain: f64,
    pub threshold: f64,
    pub exceedance: Vec<f64>,
    /// Acquisition distribution over `f = 0..=F`.
    pub acquisition: Vec<f64>,
    pub kl: f64,
    pub information_term: f64,
    pub separation_term: f64,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTables {
    pub ll0: f64,
    pub rows: Vec<SelectionRow>,
    pub best_f: usize,
}

impl SelectionTables {
    pub fn row(&self, f: usize) -> Option<&SelectionRow> {
        self.rows.iter().find(|r| r.f == f)
    }
}

/// Divide by the maximum; a non-positive maximum zeroes the sequence.
pub fn normalize_by_max(values: &[f64], what: &str) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        log::warn!("maximum of {what} over the F grid is {max}; term set to 0");
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| v / max).collect()
}

/// Expected fraction of useful bins times the normalized likelihood gain.
pub fn information_term(acquisition: &[f64], normalized_gain: f64) -> f64 {
    let f = (acquisition.len() - 1) as f64;
    acquisition.iter().enumerate().map(|(k, p)| p * k as f64 / f).sum::<f64>() * normalized_gain
}

/// `ε·(a) + (1-ε)·(b)` where (b) is `kl` normalized by its maximum.
pub fn combine_criterion(information: &[f64], kl: &[f64], weight: f64) -> Result<Vec<f64>> {
    if information.len() != kl.len() {
        return Err(Error::Shape(format!("{} information terms vs {} KL values", information.len(), kl.len())));
    }
    let separation = normalize_by_max(kl, "KL_F");
    Ok(information.iter().zip(&separation).map(|(a, b)| weight * a + (1.0 - weight) * b).collect())
}

/// Index of the first maximum.
pub fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Runs the full criterion. `kl[i]` is `KL_F` for the i-th F of the grid.
pub fn select_feature_size(inputs: &SelectionInputs, kl: &[f64]) -> Result<SelectionTables> {
    inputs.validate()?;
    let grid: Vec<usize> = inputs.grid().collect();
    if kl.len() != grid.len() {
        return Err(Error::Shape(format!("{} KL values for a grid of {}", kl.len(), grid.len())));
    }
    let e = &inputs.mean_ordered;
    let nu = inputs.dof;
    let ll0 = log_likelihood(e, 0, nu)?;

    let mut rows = Vec::with_capacity(grid.len());
    for (&f, &kl_f) in grid.iter().zip(kl) {
        let est = estimate_parameters(e, f)?;
        let ll = likelihood::log_likelihood_with(e, &est, nu)?;
        let threshold = separating_threshold(e, f)?;
        let exceedance = exceedance_probs(est.psi2, &est.lambda, threshold, nu)?;
        let acquisition = acquisition_distribution(&exceedance)?;
        rows.push(SelectionRow {
            f,
            psi2: est.psi2,
            eta2: est.lambda.iter().map(|&l| eta2(est.psi2, l, nu)).collect(),
            lambda: est.lambda,
            log_likelihood: ll,
            ll_gain: ll - ll0,
            threshold,
            exceedance,
            acquisition,
            kl: kl_f,
            information_term: 0.0,
            separation_term: 0.0,
            criterion: 0.0,
        });
    }

    let gains: Vec<f64> = rows.iter().map(|r| r.ll_gain).collect();
    let normalized_gain = normalize_by_max(&gains, "LL_F - LL_0");
    let separation = normalize_by_max(kl, "KL_F");
    for ((row, g), s) in rows.iter_mut().zip(normalized_gain).zip(separation) {
        row.information_term = information_term(&row.acquisition, g);
        row.separation_term = s;
        row.criterion = inputs.weight * row.information_term + (1.0 - inputs.weight) * s;
    }
    let criteria: Vec<f64> = rows.iter().map(|r| r.criterion).collect();
    let best_f = grid[first_argmax(&criteria)];
    Ok(SelectionTables { ll0, rows, best_f })
}

/// `KL_F` from zone-grouped feature vectors.
pub fn zone_kl(zones: &[Vec<Vec<f64>>], f: usize, neighbors: usize, factor: KlDimFactor) -> Result<f64> {
    let dim = zones.iter().flat_map(|z| z.first()).map(|v| v.len()).next().unwrap_or(0);
    let matrix = kl_matrix(zones, neighbors, factor.value(f, dim))?;
    Ok(mean_kl(&matrix, f))
}
