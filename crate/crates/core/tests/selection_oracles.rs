mod support;

use wpos_core::selection::{acquisition_distribution, exceedance_probs, marcum_q};

use support::marcum_by_quadrature;

/// The 20-point (order, a, b) grid over orders {0.5, 1, 4} and a, b in [0, 6].
pub fn marcum_grid() -> Vec<(f64, f64, f64)> {
    (0..20)
        .map(|i| {
            let order = [0.5, 1.0, 4.0][i % 3];
            let a = 6.0 * ((i * 7) % 20) as f64 / 19.0;
            let b = 6.0 * ((i * 13 + 5) % 20) as f64 / 19.0;
            (order, a, b)
        })
        .collect()
}

#[test]
fn marcum_series_matches_density_quadrature() {
    let mut worst: f64 = 0.0;
    for (order, a, b) in marcum_grid() {
        let series = marcum_q(order, a, b).unwrap();
        let quad = marcum_by_quadrature(order, a, b);
        worst = worst.max((series - quad).abs());
        assert!((series - quad).abs() < 1e-6, "Q_{order}({a}, {b}): series {series}, quadrature {quad}");
    }
    assert!(worst < 1e-6);
}

#[test]
fn quadrature_oracle_knows_closed_forms() {
    // Q_1(0, b) = exp(-b²/2)
    for b in [0.3, 1.0, 2.5] {
        assert!((marcum_by_quadrature(1.0, 0.0, b) - (-b * b / 2.0f64).exp()).abs() < 1e-9);
    }
}

#[test]
fn huge_noncentrality_guarantees_exceedance() {
    let psi2 = 4.39e-7;
    let threshold = 7.91e-7;
    let mut last = 0.0;
    for scale in [1.0, 10.0, 100.0, 1e4] {
        let p = exceedance_probs(psi2, &[5.07e-7 * scale], threshold, 2.0).unwrap()[0];
        assert!(p >= last);
        last = p;
    }
    assert!(last > 1.0 - 1e-12);
    let dist = acquisition_distribution(&[1.0, 1.0, last]).unwrap();
    assert!((dist[3] - 1.0).abs() < 1e-9);
}

