//! Clustered multipath channel.
//!
//! A [`Scenario`] freezes the environment: cluster positions and log-normal
//! shadowing. Each measurement then draws ray delays, Nakagami fading and
//! phases for every (sensor, path, ray) triple. Path `l = 0` is the direct
//! path; path `l > 0` bounces off cluster `l`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_in_cylinder, Point3, SceneConfig};

const MAX_FRAME_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Mean of the Poisson cluster count.
    pub mean_clusters: f64,
    pub rays_per_path: usize,
    /// Mean gap between consecutive rays of a path (ns).
    pub ray_interarrival_ns: f64,
    /// Path decay constant (ns).
    pub path_decay_ns: f64,
    /// Ray decay constant (ns).
    pub ray_decay_ns: f64,
    pub pathloss_exponent: f64,
    pub ref_power_dbm: f64,
    pub ref_distance_m: f64,
    /// Variance of the shadowing in dB.
    pub shadow_var_db: f64,
    pub nakagami_mu_mean_db: f64,
    pub nakagami_mu_var_db: f64,
}

impl Default for ChannelParams {
    /// Residential UWB settings.
    fn default() -> Self {
        Self {
            mean_clusters: 3.0,
            rays_per_path: 6,
            ray_interarrival_ns: 1.5,
            path_decay_ns: 25.0,
            ray_decay_ns: 5.0,
            pathloss_exponent: 2.0,
            ref_power_dbm: -45.0,
            ref_distance_m: 1.0,
            shadow_var_db: 3.0,
            nakagami_mu_mean_db: 0.67,
            nakagami_mu_var_db: 0.28,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ray_interarrival_ns", self.ray_interarrival_ns),
            ("path_decay_ns", self.path_decay_ns),
            ("ray_decay_ns", self.ray_decay_ns),
            ("pathloss_exponent", self.pathloss_exponent),
            ("ref_distance_m", self.ref_distance_m),
            ("shadow_var_db", self.shadow_var_db),
            ("nakagami_mu_var_db", self.nakagami_mu_var_db),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mean_clusters >= 0.0 && self.mean_clusters.is_finite()) {
            return Err(Error::Config(format!("mean_clusters must be >= 0, got {}", self.mean_clusters)));
        }
        if self.rays_per_path == 0 {
            return Err(Error::Config("rays_per_path must be at least 1".into()));
        }
        if !self.ref_power_dbm.is_finite() || !self.nakagami_mu_mean_db.is_finite() {
            return Err(Error::Config("reference power and Nakagami mean must be finite".into()));
        }
        Ok(())
    }

    /// Reference power in linear units (mW).
    pub fn ref_power_linear(&self) -> f64 {
        db_to_linear(self.ref_power_dbm)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Zero-mean log-normal shadowing: `10 log10(S) ~ N(0, var_db)`.
fn draw_shadowing<R: Rng + ?Sized>(var_db: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(0.0, var_db.sqrt()).expect("validated variance");
    db_to_linear(normal.sample(rng))
}

/// Frozen environment shared by every measurement of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cluster_locations: Vec<Point3>,
    /// `S^s_m`, linear.
    pub sensor_shadowing: Vec<f64>,
    /// `S^c_l` for `l = 0..=L`; entry 0 is the direct path.
    pub path_shadowing: Vec<f64>,
    pub los_enabled: bool,
}

impl Scenario {
    pub fn num_clusters(&self) -> usize {
        self.cluster_locations.len()
    }
}

pub fn generate_scenario<R: Rng + ?Sized>(
    params: &ChannelParams,
    scene: &SceneConfig,
    los: bool,
    rng: &mut R,
) -> Result<Scenario> {
    params.validate()?;
    scene.validate()?;
    let clusters = if params.mean_clusters > 0.0 {
        Poisson::new(params.mean_clusters).map_err(|e| Error::Config(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let cluster_locations = (0..clusters).map(|_| sample_in_cylinder(scene.dr, scene.dh, rng)).collect();
    let sensor_shadowing = (0..scene.num_sensors()).map(|_| draw_shadowing(params.shadow_var_db, rng)).collect();
    let path_shadowing = (0..=clusters).map(|_| draw_shadowing(params.shadow_var_db, rng)).collect();
    Ok(Scenario { cluster_locations, sensor_shadowing, path_shadowing, los_enabled: los })
}

/// Extra delay (ns) of the bounce via `cluster` relative to the direct path.
pub fn cluster_excess_delay(target: &Point3, cluster: &Point3, sensor: &Point3, c: f64) -> f64 {
    let direct = target.distance(sensor);
    let bounced = cluster.distance(target) + sensor.distance(cluster);
    ((bounced - direct) / c * 1e9).max(0.0)
}

/// Ray offsets within a path: `τ_0 = 0` and exponential gaps of mean `mean_gap_ns`.
pub fn ray_delays<R: Rng + ?Sized>(rays: usize, mean_gap_ns: f64, rng: &mut R) -> Vec<f64> {
    let exp = Exp::new(1.0 / mean_gap_ns).expect("positive gap");
    let mut t = 0.0;
    let mut out = Vec::with_capacity(rays);
    for k in 0..rays {
        if k > 0 {
            t += exp.sample(rng);
        }
        out.push(t);
    }
    out
}

/// Mean-square gain `β = P̄ (d/d̄)^(-ξ) S^s S^c exp(-T/Γ - τ/γ)`.
pub fn pathloss(
    params: &ChannelParams,
    distance: f64,
    sensor_shadowing: f64,
    path_shadowing: f64,
    path_delay_ns: f64,
    ray_delay_ns: f64,
) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("pathloss needs a positive distance, got {distance}")));
    }
    Ok(params.ref_power_linear()
        * (distance / params.ref_distance_m).powf(-params.pathloss_exponent)
        * sensor_shadowing
        * path_shadowing
        * (-path_delay_ns / params.path_decay_ns - ray_delay_ns / params.ray_decay_ns).exp())
}

/// Nakagami-`mu` amplitude with `E[a²] = omega`.
pub fn nakagami_amplitude<R: Rng + ?Sized>(mu: f64, omega: f64, rng: &mut R) -> Result<f64> {
    if !(mu >= 0.5) || !mu.is_finite() {
        return Err(Error::Domain(format!("Nakagami shape must be >= 0.5, got {mu}")));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("Nakagami spread must be positive, got {omega}")));
    }
    let power = Gamma::new(mu, omega / mu).map_err(|e| Error::Domain(e.to_string()))?.sample(rng);
    Ok(power.sqrt())
}

/// Per-ray Nakagami shape: `10 log10(μ)` is normal, values below 0.5 are clipped.
pub fn draw_nakagami_shape<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> f64 {
    let normal = Normal::new(params.nakagami_mu_mean_db, params.nakagami_mu_var_db.sqrt()).expect("validated");
    db_to_linear(normal.sample(rng)).max(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub path: usize,
    pub index: usize,
    /// `d_m/c + T_{m,l} + τ_{m,l,k}` in ns.
    pub arrival_ns: f64,
    pub amplitude: f64,
    /// `β_{m,l,k}`.
    pub mean_power: f64,
    pub phase: f64,
}

/// One measurement: the rays seen by every sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub sensors: Vec<Vec<Ray>>,
}

impl ChannelRealization {
    pub fn max_arrival_ns(&self) -> f64 {
        self.sensors.iter().flatten().map(|r| r.arrival_ns).fold(0.0, f64::max)
    }
}

fn realize_sensor<R: Rng + ?Sized>(
    params: &ChannelParams,
    scene: &SceneConfig,
    scenario: &Scenario,
    target: &Point3,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Ray>> {
    let sensor = &scene.sensors[m];
    let distance = target.distance(sensor);
    let los_delay = distance / scene.c * 1e9;
    let mut rays = Vec::with_capacity((scenario.num_clusters() + 1) * params.rays_per_path);
    for path in 0..=scenario.num_clusters() {
        let path_delay =
            if path == 0 { 0.0 } else { cluster_excess_delay(target, &scenario.cluster_locations[path - 1], sensor, scene.c) };
        let offsets = ray_delays(params.rays_per_path, params.ray_interarrival_ns, rng);
        for (index, tau) in offsets.into_iter().enumerate() {
            let beta = pathloss(
                params,
                distance,
                scenario.sensor_shadowing[m],
                scenario.path_shadowing[path],
                path_delay,
                tau,
            )?;
            let mu = draw_nakagami_shape(params, rng);
            let faded = nakagami_amplitude(mu, beta, rng)?;
            let phase = 2.0 * PI * rng.random::<f64>();
            let amplitude = if path == 0 && !scenario.los_enabled { 0.0 } else { faded };
            rays.push(Ray { path, index, arrival_ns: los_delay + path_delay + tau, amplitude, mean_power: beta, phase });
        }
    }
    Ok(rays)
}

/// Draws one measurement. Sensors whose rays spill past `frame_ns` are redrawn.
pub fn realize<R: Rng + ?Sized>(
    params: &ChannelParams,
    scene: &SceneConfig,
    scenario: &Scenario,
    target: &Point3,
    frame_ns: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if scenario.sensor_shadowing.len() != scene.num_sensors()
        || scenario.path_shadowing.len() != scenario.num_clusters() + 1
    {
        return Err(Error::Shape("scenario does not match the scene".into()));
    }
    let mut sensors = Vec::with_capacity(scene.num_sensors());
    for m in 0..scene.num_sensors() {
        let mut attempt = 0;
        loop {
            let rays = realize_sensor(params, scene, scenario, target, m, rng)?;
            let last = rays.iter().map(|r| r.arrival_ns).fold(0.0, f64::max);
            if last < frame_ns {
                sensors.push(rays);
                break;
            }
            attempt += 1;
            log::warn!("sensor {m}: ray at {last:.2} ns overflows the {frame_ns} ns frame, redrawing");
            if attempt >= MAX_FRAME_RETRIES {
                return Err(Error::FrameOverflow { arrival_ns: last, frame_ns });
            }
        }
    }
    Ok(ChannelRealization { sensors })
}
