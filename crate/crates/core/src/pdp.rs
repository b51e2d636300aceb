//! Energy-detected power delay profiles.
//!
//! Each ray deposits its energy `a²` in the bin that contains its arrival time.
//! The measured bin power is then drawn from the energy detector's output law:
//! a (noncentral) chi-square with `ν = 2 W T_g` degrees of freedom, scaled so
//! that noise-only bins average `σ²` and signal bins average `σ² + E`.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, ChannelRealization};
use crate::error::{Error, Result};
use crate::geometry::{sample_target_location, Point3, SceneConfig};
use crate::rng::stream;

/// Default number of target draws used to calibrate the noise level.
pub const CALIBRATION_SAMPLES: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    pub bandwidth_hz: f64,
    pub frame_ns: f64,
    pub integration_ns: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self { bandwidth_hz: 2e9, frame_ns: 200.0, integration_ns: 2.0 }
    }
}

impl DetectionParams {
    pub fn num_bins(&self) -> usize {
        (self.frame_ns / self.integration_ns).floor() as usize
    }

    /// `ν = 2 W T_g`.
    pub fn dof(&self) -> f64 {
        2.0 * self.bandwidth_hz * self.integration_ns * 1e-9
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.frame_ns > 0.0 && self.integration_ns > 0.0) {
            return Err(Error::Config("bandwidth, frame and integration period must be positive".into()));
        }
        if self.num_bins() < 1 {
            return Err(Error::Config(format!(
                "frame {} ns holds no {} ns bins",
                self.frame_ns, self.integration_ns
            )));
        }
        if self.dof() < 1.0 {
            return Err(Error::Config(format!("2 W T_g = {} must be at least 1", self.dof())));
        }
        Ok(())
    }
}

/// Bin powers of one frame at one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PdpVector(pub Vec<f64>);

impl PdpVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Sum of `a²` per bin and sensor.
pub fn deposit_energy(realization: &ChannelRealization, detection: &DetectionParams) -> Result<Vec<Vec<f64>>> {
    let nb = detection.num_bins();
    realization
        .sensors
        .iter()
        .map(|rays| {
            let mut bins = vec![0.0; nb];
            for r in rays {
                let bin = (r.arrival_ns / detection.integration_ns).floor();
                if !(r.arrival_ns >= 0.0) || bin >= nb as f64 {
                    return Err(Error::FrameOverflow { arrival_ns: r.arrival_ns, frame_ns: detection.frame_ns });
                }
                bins[bin as usize] += r.amplitude * r.amplitude;
            }
            Ok(bins)
        })
        .collect()
}

/// Mean direct-path pathloss (unit shadowing, no delay decay), averaged over
/// `targets` and then over sensors.
pub fn mean_los_pathloss(params: &ChannelParams, sensors: &[Point3], targets: &[Point3]) -> f64 {
    let pbar = params.ref_power_linear();
    let mut total = 0.0;
    for s in sensors {
        let mut acc = 0.0;
        for t in targets {
            acc += (t.distance(s) / params.ref_distance_m).powf(-params.pathloss_exponent);
        }
        total += pbar * acc / targets.len() as f64;
    }
    total / sensors.len() as f64
}

/// Noise level `σ²` for the requested SNR, identical for every sensor.
///
/// `samples` targets are drawn from the calibration stream `seed`; the result
/// depends only on the geometry, channel parameters, SNR and seed.
pub fn calibrate_noise(
    params: &ChannelParams,
    scene: &SceneConfig,
    snr_db: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::Config("noise calibration needs at least one sample".into()));
    }
    let mut rng = stream(seed, 0);
    let targets = (0..samples).map(|_| sample_target_location(scene, &mut rng)).collect::<Result<Vec<_>>>()?;
    let sigma2 = mean_los_pathloss(params, &scene.sensors, &targets) / 10f64.powf(snr_db / 10.0);
    Ok(vec![sigma2; scene.num_sensors()])
}

/// Draws from a noncentral chi-square with `nu` degrees of freedom.
pub struct NoncentralChiSquared {
    nu: f64,
    bulk: Option<ChiSquared<f64>>,
}

impl NoncentralChiSquared {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu >= 1.0) {
            return Err(Error::Domain(format!("degrees of freedom must be >= 1, got {nu}")));
        }
        // nu > 1: one shifted normal plus a central chi-square of nu - 1 dof
        let bulk = if nu > 1.0 { Some(ChiSquared::new(nu - 1.0).map_err(|e| Error::Domain(e.to_string()))?) } else { None };
        Ok(Self { nu, bulk })
    }

    pub fn sample<R: Rng + ?Sized>(&self, noncentrality: f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match &self.bulk {
            Some(chi) => {
                let shifted = z + noncentrality.sqrt();
                shifted * shifted + chi.sample(rng)
            }
            None if noncentrality > 0.0 => {
                // nu == 1: Poisson mixture of central laws
                let j = Poisson::new(noncentrality / 2.0).expect("positive").sample(rng);
                ChiSquared::new(self.nu + 2.0 * j).expect("positive dof").sample(rng)
            }
            None => z * z,
        }
    }
}

/// Measured bin powers `ε_n = (σ²/ν) X_n` with `X_n ~ χ'²(ν, ν E_n / σ²)`.
pub fn synthesize_pdp<R: Rng + ?Sized>(energies: &[f64], sigma2: f64, nu: f64, rng: &mut R) -> Result<PdpVector> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("noise level must be positive, got {sigma2}")));
    }
    let law = NoncentralChiSquared::new(nu)?;
    let scale = sigma2 / nu;
    Ok(PdpVector(energies.iter().map(|&e| scale * law.sample(nu * e / sigma2, rng)).collect()))
}
