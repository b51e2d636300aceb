//! Chi-square models of the ordered mean bin powers.
//!
//! The first `F` entries of the ordered mean PDP are treated as signal bins
//! (noncentral chi-square, approximated by a central law with an inflated
//! scale `η²`), the rest as noise bins (central chi-square with scale `ψ²`).

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Log of the central chi-square density with scale `psi2` and `nu` degrees of freedom.
pub fn chi2_log_pdf_central(x: f64, psi2: f64, nu: f64) -> Result<f64> {
    check_domain(x, psi2, 0.0, nu)?;
    Ok(log_pdf_unchecked(x, psi2, nu, ln_gamma(nu / 2.0)?))
}

/// Scale of the central law that stands in for a noncentral one.
pub fn eta2(psi2: f64, lambda: f64, nu: f64) -> f64 {
    let num = 2.0 * nu * psi2 * psi2 + 4.0 * psi2 * lambda + (nu * psi2 + lambda).powi(2);
    (num / (nu * (2.0 + nu))).sqrt()
}

/// Log density of a signal bin: the central form evaluated at `η²(ψ², λ, ν)`.
pub fn chi2_log_pdf_noncentral_approx(x: f64, psi2: f64, lambda: f64, nu: f64) -> Result<f64> {
    check_domain(x, psi2, lambda, nu)?;
    Ok(log_pdf_unchecked(x, eta2(psi2, lambda, nu), nu, ln_gamma(nu / 2.0)?))
}

fn check_domain(x: f64, psi2: f64, lambda: f64, nu: f64) -> Result<()> {
    if !(x > 0.0) || !(psi2 > 0.0) || !(lambda >= 0.0) || !(nu >= 1.0) {
        return Err(Error::Domain(format!(
            "chi-square density needs x > 0, psi2 > 0, lambda >= 0, nu >= 1; got x={x}, psi2={psi2}, lambda={lambda}, nu={nu}"
        )));
    }
    Ok(())
}

fn log_pdf_unchecked(x: f64, scale: f64, nu: f64, lgamma_half_nu: f64) -> f64 {
    -0.5 * nu * (2.0 * scale).ln() + (0.5 * nu - 1.0) * x.ln() - lgamma_half_nu - x / (2.0 * scale)
}

/// Noise scale and per-bin noncentralities when the `f` largest bins carry signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterEstimate {
    pub psi2: f64,
    pub lambda: Vec<f64>,
}

/// `ψ²` is the plain mean of the `N_b - f` trailing entries; `λ_n` is the excess of
/// each leading entry over it, clipped at zero.
pub fn estimate_parameters(mean_ordered: &[f64], f: usize) -> Result<ParameterEstimate> {
    let nb = mean_ordered.len();
    if f >= nb {
        return Err(Error::Domain(format!("feature count {f} leaves no noise bins out of {nb}")));
    }
    let noise = &mean_ordered[f..];
    let psi2 = noise.iter().sum::<f64>() / noise.len() as f64;
    if !(psi2 > 0.0) {
        return Err(Error::Domain(format!("estimated noise scale must be positive, got {psi2}")));
    }
    let lambda = mean_ordered[..f]
        .iter()
        .enumerate()
        .map(|(n, &e)| {
            let l = e - psi2;
            if l < 0.0 {
                log::warn!("negative noncentrality {l:.3e} at bin {n} (F={f}) clipped to 0");
                0.0
            } else {
                l
            }
        })
        .collect();
    Ok(ParameterEstimate { psi2, lambda })
}

/// Joint log-likelihood of the ordered mean powers under the `f`-signal-bin model,
/// with parameters plugged in from [`estimate_parameters`]. `f = 0` is the all-noise model.
pub fn log_likelihood(mean_ordered: &[f64], f: usize, nu: f64) -> Result<f64> {
    let est = estimate_parameters(mean_ordered, f)?;
    log_likelihood_with(mean_ordered, &est, nu)
}

pub(crate) fn log_likelihood_with(mean_ordered: &[f64], est: &ParameterEstimate, nu: f64) -> Result<f64> {
    let mut ll = 0.0;
    for (n, &x) in mean_ordered.iter().enumerate() {
        ll += match est.lambda.get(n) {
            Some(&lambda) => chi2_log_pdf_noncentral_approx(x, est.psi2, lambda, nu)?,
            None => chi2_log_pdf_central(x, est.psi2, nu)?,
        };
    }
    Ok(ll)
}
