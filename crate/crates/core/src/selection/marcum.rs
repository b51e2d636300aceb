//! Generalized Marcum Q-function.
//!
//! `Q_m(a, b)` is the upper tail at `b²` of a noncentral chi-square variable with
//! `2m` degrees of freedom and noncentrality `a²`. Writing the noncentral law as a
//! Poisson(`a²/2`) mixture of central laws gives
//!
//! ```text
//! Q_m(a, b) = Σ_j  e^{-a²/2} (a²/2)^j / j!  ·  Q(m + j, b²/2)
//! ```
//!
//! with `Q(s, x)` the regularized upper incomplete gamma function. The sum is
//! evaluated outward from the Poisson mode so large noncentralities never
//! underflow the leading weight.

use crate::error::{Error, Result};
use crate::special::{gamma_q, ln_gamma};

const TOLERANCE: f64 = 1e-12;
const MAX_TERMS: usize = 1_000_000;

pub fn marcum_q(order: f64, a: f64, b: f64) -> Result<f64> {
    if !(order > 0.0) || !order.is_finite() {
        return Err(Error::Domain(format!("Marcum Q order must be positive, got {order}")));
    }
    if !(a >= 0.0) || !(b >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("Marcum Q arguments must be nonnegative, got a={a}, b={b}")));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if b.is_infinite() {
        return Ok(0.0);
    }
    let lambda = 0.5 * a * a;
    let x = 0.5 * b * b;
    if lambda == 0.0 {
        return gamma_q(order, x);
    }

    let mode = lambda.floor();
    let log_weight = |j: f64| -> Result<f64> { Ok(-lambda + j * lambda.ln() - ln_gamma(j + 1.0)?) };
    let w_mode = log_weight(mode)?.exp();

    let mut sum = w_mode * gamma_q(order + mode, x)?;
    // the evaluated weights should total 1; dividing by their sum cancels the
    // rounding error of the mode weight at large noncentrality
    let mut mass = w_mode;
    let mut terms = 1usize;

    // upward: weights shrink by lambda/(j+1) < 1 past the mode
    let mut w = w_mode;
    let mut j = mode;
    loop {
        w *= lambda / (j + 1.0);
        j += 1.0;
        sum += w * gamma_q(order + j, x)?;
        mass += w;
        terms += 1;
        let ratio = lambda / (j + 1.0);
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < TOLERANCE {
            break;
        }
        if terms > MAX_TERMS {
            return Err(Error::NoConvergence(terms));
        }
    }

    // downward: weights shrink by j/lambda <= 1 below the mode
    let mut w = w_mode;
    let mut j = mode;
    while j > 0.0 {
        w *= j / lambda;
        j -= 1.0;
        sum += w * gamma_q(order + j, x)?;
        mass += w;
        terms += 1;
        let ratio = j / lambda;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < TOLERANCE {
            break;
        }
        if terms > MAX_TERMS {
            return Err(Error::NoConvergence(terms));
        }
    }

    Ok((sum / mass).clamp(0.0, 1.0))
}
