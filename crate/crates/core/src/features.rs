//! Minimum-description features: the `F` largest bin powers of every sensor
//! together with the bins they came from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdp::PdpVector;

/// Number of noise standard deviations above the noise mean for the TOA detector.
pub const TOA_THRESHOLD_SIGMAS: f64 = 4.0;

/// Largest `f` powers in descending order with their bin indices. Ties go to the
/// smaller bin index.
pub fn extract_features(pdp: &[f64], f: usize) -> Result<(Vec<f64>, Vec<u32>)> {
    if f == 0 || f > pdp.len() {
        return Err(Error::Domain(format!("feature count {f} outside 1..={}", pdp.len())));
    }
    let mut order: Vec<u32> = (0..pdp.len() as u32).collect();
    order.sort_by(|&a, &b| pdp[b as usize].total_cmp(&pdp[a as usize]).then(a.cmp(&b)));
    order.truncate(f);
    let powers = order.iter().map(|&i| pdp[i as usize]).collect();
    Ok((powers, order))
}

/// Features of one data point. Matrices are row-major `sensors x f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub sensors: usize,
    pub f: usize,
    pub powers: Vec<f64>,
    pub bins: Vec<u32>,
    pub zone: usize,
}

impl FeatureRecord {
    pub fn from_pdps(pdps: &[PdpVector], f: usize, zone: usize) -> Result<Self> {
        let mut powers = Vec::with_capacity(pdps.len() * f);
        let mut bins = Vec::with_capacity(pdps.len() * f);
        for pdp in pdps {
            let (p, b) = extract_features(pdp.as_slice(), f)?;
            powers.extend(p);
            bins.extend(b);
        }
        Ok(Self { sensors: pdps.len(), f, powers, bins, zone })
    }

    /// Total number of feature values, `2 F M`.
    pub fn feature_count(&self) -> usize {
        self.powers.len() + self.bins.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub mean: f64,
    pub std: f64,
}

impl DomainStats {
    /// Population mean and standard deviation.
    pub fn fit<I: IntoIterator<Item = f64>>(values: I) -> Result<Self> {
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        let values: Vec<f64> = values.into_iter().collect();
        for &v in &values {
            n += 1;
            sum += v;
        }
        if n == 0 {
            return Err(Error::Domain("cannot fit normalization on no data".into()));
        }
        let mean = sum / n as f64;
        for &v in &values {
            sq += (v - mean) * (v - mean);
        }
        let std = (sq / n as f64).sqrt();
        if !(std > 0.0) {
            return Err(Error::Domain("feature domain has zero spread".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

/// z-score parameters for the power and bin-index domains, fitted on training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub power: DomainStats,
    pub index: DomainStats,
}

impl NormalizationStats {
    pub fn fit(records: &[FeatureRecord]) -> Result<Self> {
        Ok(Self {
            power: DomainStats::fit(records.iter().flat_map(|r| r.powers.iter().copied()))?,
            index: DomainStats::fit(records.iter().flat_map(|r| r.bins.iter().map(|&b| b as f64)))?,
        })
    }
}

/// Normalized `E` and `B` matrices of one record, row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrices {
    pub rows: usize,
    pub cols: usize,
    pub powers: Vec<f64>,
    pub bins: Vec<f64>,
    pub zone: usize,
}

impl FeatureMatrices {
    /// `[E | B]` flattened, the vector used for inter-zone distances.
    pub fn concatenated(&self) -> Vec<f64> {
        self.powers.iter().chain(&self.bins).copied().collect()
    }
}

pub fn assemble_matrices(records: &[FeatureRecord], stats: &NormalizationStats) -> Result<Vec<FeatureMatrices>> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    records
        .iter()
        .map(|r| {
            if r.f != first.f || r.sensors != first.sensors || r.powers.len() != r.sensors * r.f || r.bins.len() != r.powers.len() {
                return Err(Error::Shape(format!(
                    "record with M={}, F={} in a batch of M={}, F={}",
                    r.sensors, r.f, first.sensors, first.f
                )));
            }
            Ok(FeatureMatrices {
                rows: r.sensors,
                cols: r.f,
                powers: r.powers.iter().map(|&p| stats.power.apply(p)).collect(),
                bins: r.bins.iter().map(|&b| stats.index.apply(b as f64)).collect(),
                zone: r.zone,
            })
        })
        .collect()
}

/// Threshold TOA (in bins) and total received energy of one sensor's PDP.
///
/// The first bin above `σ²(1 + 4 sqrt(2/ν))` marks the arrival; a frame with no
/// crossing reports `N_b`.
pub fn toa_rss_features(pdp: &[f64], sigma2: f64, nu: f64) -> (usize, f64) {
    let threshold = sigma2 * (1.0 + TOA_THRESHOLD_SIGMAS * (2.0 / nu).sqrt());
    let toa = pdp.iter().position(|&e| e > threshold).unwrap_or(pdp.len());
    (toa, pdp.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extraction_examples() {
        assert_eq!(extract_features(&[0.1, 0.9, 0.5], 2).unwrap(), (vec![0.9, 0.5], vec![1, 2]));
        assert_eq!(extract_features(&[0.5, 0.5, 0.1], 2).unwrap().1, vec![0, 1]);
        let pdp: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let (_, mut bins) = extract_features(&pdp, 100).unwrap();
        bins.sort();
        assert_eq!(bins, (0..100).collect::<Vec<u32>>());
        assert!(extract_features(&pdp, 0).is_err());
        assert!(extract_features(&pdp, 101).is_err());
    }

    #[test]
    fn record_sizes_give_reduction_ratio() {
        let pdps: Vec<PdpVector> = (0..12).map(|m| PdpVector((0..100).map(|n| ((n * 7 + m) % 13) as f64).collect())).collect();
        for f in [3, 5, 10] {
            let rec = FeatureRecord::from_pdps(&pdps, f, 0).unwrap();
            let raw: usize = pdps.iter().map(|p| p.len()).sum();
            assert_eq!(rec.feature_count(), 2 * f * 12);
            assert_eq!(rec.feature_count() as f64 / raw as f64, 2.0 * f as f64 / 100.0);
        }
    }

    #[test]
    fn identity_normalization() {
        let rec = FeatureRecord { sensors: 1, f: 2, powers: vec![3.0, 1.0], bins: vec![4, 9], zone: 0 };
        let stats = NormalizationStats {
            power: DomainStats { mean: 0.0, std: 1.0 },
            index: DomainStats { mean: 0.0, std: 1.0 },
        };
        let m = assemble_matrices(&[rec], &stats).unwrap();
        assert_eq!(m[0].powers, vec![3.0, 1.0]);
        assert_eq!(m[0].bins, vec![4.0, 9.0]);
    }

    fn toy_records(offset: f64, n: usize) -> Vec<FeatureRecord> {
        (0..n)
            .map(|i| FeatureRecord {
                sensors: 2,
                f: 2,
                powers: vec![offset + i as f64, 0.5 * i as f64, 2.0, offset],
                bins: vec![(i % 7) as u32, 3, (i % 5) as u32, 1],
                zone: i % 3,
            })
            .collect()
    }

    #[test]
    fn training_batch_is_standardized() {
        let train = toy_records(0.0, 50);
        let stats = NormalizationStats::fit(&train).unwrap();
        let m = assemble_matrices(&train, &stats).unwrap();
        for values in [m.iter().flat_map(|r| r.powers.clone()).collect::<Vec<_>>(), m.iter().flat_map(|r| r.bins.clone()).collect()] {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9);
        }
        // frozen stats on shifted data do not recentre it
        let test = assemble_matrices(&toy_records(100.0, 20), &stats).unwrap();
        let mean = test.iter().flat_map(|r| r.powers.iter()).sum::<f64>() / 80.0;
        assert!(mean.abs() > 0.1);
    }

    #[test]
    fn mismatched_batch_is_rejected() {
        let mut recs = toy_records(0.0, 3);
        recs[1].f = 3;
        let stats = NormalizationStats::fit(&toy_records(0.0, 3)).unwrap();
        assert!(assemble_matrices(&recs, &stats).is_err());
        assert!(DomainStats::fit(vec![1.0; 4]).is_err());
    }

    #[test]
    fn toa_rss_examples() {
        assert_eq!(toa_rss_features(&[1.0; 100], 1.0, 8.0), (100, 100.0));
        let mut pdp = vec![1.0; 100];
        pdp[7] = 1e3;
        pdp[20] = 1e4;
        assert_eq!(toa_rss_features(&pdp, 1.0, 8.0).0, 7);
    }

    proptest! {
        #[test]
        fn extraction_invariants(pdp in prop::collection::vec(0.0..10.0f64, 1..60), f_frac in 0.0..1.0f64, c in 0.01..100.0f64) {
            let f = 1 + ((pdp.len() - 1) as f64 * f_frac) as usize;
            let (powers, bins) = extract_features(&pdp, f).unwrap();
            prop_assert!(powers.windows(2).all(|w| w[0] >= w[1]));
            let mut distinct = bins.clone();
            distinct.sort();
            distinct.dedup();
            prop_assert_eq!(distinct.len(), f);
            for (p, &b) in powers.iter().zip(&bins) {
                prop_assert_eq!(*p, pdp[b as usize]);
            }
            // powers scale, indices do not
            let scaled: Vec<f64> = pdp.iter().map(|v| v * c).collect();
            let (sp, sb) = extract_features(&scaled, f).unwrap();
            prop_assert_eq!(&sb, &bins);
            for (a, b) in sp.iter().zip(&powers) {
                prop_assert!((a - b * c).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn scatter_and_reextract(pdp in prop::collection::vec(0.1..10.0f64, 2..60), f_frac in 0.0..1.0f64) {
            let f = 1 + ((pdp.len() - 1) as f64 * f_frac) as usize;
            let (powers, bins) = extract_features(&pdp, f).unwrap();
            let mut sparse = vec![0.0; pdp.len()];
            for (p, &b) in powers.iter().zip(&bins) {
                sparse[b as usize] = *p;
            }
            let (p2, b2) = extract_features(&sparse, f).unwrap();
            prop_assert_eq!(p2, powers);
            prop_assert_eq!(b2, bins);
        }
    }
}
