//! Nearest-neighbor KL divergence between zone feature distributions.

use crate::error::{Error, Result};

const DUPLICATE_EPS: f64 = 1e-12;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance from `x` to its `u`-th nearest neighbor in `set`, optionally skipping
/// the entry at `skip` (the point itself when searching its own set).
fn kth_distance(x: &[f64], set: &[Vec<f64>], u: usize, skip: Option<usize>, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(set.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(_, y)| sq_dist(x, y)));
    let (_, kth, _) = scratch.select_nth_unstable_by(u - 1, |a, b| a.total_cmp(b));
    let r = kth.sqrt();
    if r == 0.0 {
        log::warn!("zero nearest-neighbor distance (duplicate samples); using {DUPLICATE_EPS}");
        DUPLICATE_EPS
    } else {
        r
    }
}

fn check_sizes(p: &[Vec<f64>], q: &[Vec<f64>], u: usize, same: bool) -> Result<()> {
    if u == 0 {
        return Err(Error::Config("neighbor count must be at least 1".into()));
    }
    if p.len() <= u || (!same && q.len() < u) || (same && q.len() <= u) {
        return Err(Error::Domain(format!(
            "KL estimate with u={u} needs more samples (got {} and {})",
            p.len(),
            q.len()
        )));
    }
    let dim = p[0].len();
    if p.iter().chain(q).any(|v| v.len() != dim) {
        return Err(Error::Shape("feature vectors of different lengths".into()));
    }
    Ok(())
}

fn estimate(p: &[Vec<f64>], q: &[Vec<f64>], u: usize, dim_factor: f64, same: bool) -> Result<f64> {
    check_sizes(p, q, u, same)?;
    let mut scratch = Vec::with_capacity(p.len().max(q.len()));
    let mut log_ratio = 0.0;
    for (i, x) in p.iter().enumerate() {
        let own = kth_distance(x, p, u, Some(i), &mut scratch);
        let other = kth_distance(x, q, u, same.then_some(i), &mut scratch);
        log_ratio += (other / own).ln();
    }
    let n = p.len() as f64;
    Ok(dim_factor / n * log_ratio + (q.len() as f64 / (n - 1.0)).ln())
}

/// `D̂_u(P‖Q) = (k/|P|) Σ_x ln(r_Q(x) / r_P(x)) + ln(|Q| / (|P| - 1))`, with `r_S(x)` the
/// distance from `x` to its `u`-th nearest neighbor in `S` and `k = dim_factor`.
///
/// When `p` and `q` are the same slice the point itself is excluded from both searches.
pub fn knn_kl(p: &[Vec<f64>], q: &[Vec<f64>], u: usize, dim_factor: f64) -> Result<f64> {
    let same = std::ptr::eq(p, q);
    estimate(p, q, u, dim_factor, same)
}

/// All pairwise estimates `D̂_u(P_i‖P_j)` over the zone sample sets, diagonal included.
pub fn kl_matrix(zones: &[Vec<Vec<f64>>], u: usize, dim_factor: f64) -> Result<Vec<Vec<f64>>> {
    zones
        .iter()
        .enumerate()
        .map(|(i, p)| {
            zones
                .iter()
                .enumerate()
                .map(|(j, q)| estimate(p, q, u, dim_factor, i == j))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Average divergence over all ordered zone pairs, damped by `sqrt(F)`.
pub fn mean_kl(matrix: &[Vec<f64>], f: usize) -> f64 {
    let nz = matrix.len() as f64;
    let total: f64 = matrix.iter().flatten().sum();
    total / (nz * nz * (f as f64).sqrt())
}
