//! Independent numerical oracles for the statistical tests.
#![allow(dead_code)]

use wpos_core::special::ln_gamma;

/// CDF of a central chi-square with an even number of degrees of freedom,
/// from the closed-form Erlang tail.
pub fn chi2_cdf_even_dof(x: f64, dof: u32) -> f64 {
    assert!(dof.is_multiple_of(2) && dof > 0);
    if x <= 0.0 {
        return 0.0;
    }
    let h = x / 2.0;
    let mut term = 1.0;
    let mut tail = 1.0;
    for k in 1..dof / 2 {
        term *= h / k as f64;
        tail += term;
    }
    1.0 - (-h).exp() * tail
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic with the Stephens small-sample correction.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..200 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Noncentral chi-square density as a Poisson mixture of central densities.
pub fn noncentral_chi2_pdf(x: f64, dof: f64, noncentrality: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let half = noncentrality / 2.0;
    let central = |k: f64| {
        let s = k / 2.0;
        ((s - 1.0) * x.ln() - x / 2.0 - s * 2f64.ln() - ln_gamma(s).unwrap()).exp()
    };
    if half == 0.0 {
        return central(dof);
    }
    let mut sum = 0.0;
    for j in 0..10_000 {
        let jf = j as f64;
        let w = (-half + jf * half.ln() - ln_gamma(jf + 1.0).unwrap()).exp();
        sum += w * central(dof + 2.0 * jf);
        if jf > half && w < 1e-20 {
            break;
        }
    }
    sum
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) + simpson(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // split first so narrow peaks are not missed by the initial estimate
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let m = 0.5 * (lo + hi);
            let (flo, fhi, fm) = (f(lo), f(hi), f(m));
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
            simpson(&f, lo, flo, hi, fhi, m, fm, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// `Q_order(a, b)` as one minus the integral of the noncentral chi-square density
/// with `2 order` degrees of freedom over `[0, b²]`, using `x = t²` to remove the
/// endpoint singularity of odd degrees of freedom.
pub fn marcum_by_quadrature(order: f64, a: f64, b: f64) -> f64 {
    let dof = 2.0 * order;
    let cdf = integrate(|t| noncentral_chi2_pdf(t * t, dof, a * a) * 2.0 * t, 0.0, b, 1e-12);
    1.0 - cdf
}
