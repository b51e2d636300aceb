//! Sensor and target spaces.
//!
//! Sensors sit inside an axis-aligned box centered at the origin. Targets live
//! in a coaxial cylinder but outside the box. The horizontal disk of the
//! cylinder is cut into equal-width rings and equal-angle sectors, and the
//! resulting zone index is the classification label.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Sensor count that [`default_sensor_positions`] knows how to place.
pub const DEFAULT_SENSOR_COUNT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Geometry of the positioning area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Sensor-space box edge lengths (m).
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// Target-space cylinder radius and height (m).
    pub dr: f64,
    pub dh: f64,
    pub sensors: Vec<Point3>,
    /// Propagation speed (m/s).
    pub c: f64,
}

impl SceneConfig {
    /// Scene with the default twelve-sensor placement.
    pub fn with_default_sensors(dx: f64, dy: f64, dz: f64, dr: f64, dh: f64) -> Result<Self> {
        let sensors = default_sensor_positions(dx, dy, dz, DEFAULT_SENSOR_COUNT)?;
        let scene = Self { dx, dy, dz, dr, dh, sensors, c: SPEED_OF_LIGHT };
        scene.validate()?;
        Ok(scene)
    }

    /// 6 x 3 x 2 m sensor box inside a 10 m radius, 4 m tall cylinder.
    pub fn reference() -> Self {
        Self::with_default_sensors(6.0, 3.0, 2.0, 10.0, 4.0).expect("reference scene is valid")
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dx", self.dx), ("dy", self.dy), ("dz", self.dz), ("dr", self.dr), ("dh", self.dh), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.dh <= self.dz {
            return Err(Error::Config(format!("target height {} must exceed box height {}", self.dh, self.dz)));
        }
        let half_diag = (self.dx / 2.0).hypot(self.dy / 2.0);
        if self.dr <= half_diag {
            return Err(Error::Config(format!(
                "target radius {} must exceed the box half-diagonal {half_diag}",
                self.dr
            )));
        }
        if self.sensors.is_empty() {
            return Err(Error::Config("at least one sensor is required".into()));
        }
        for s in &self.sensors {
            if !self.in_box(s) {
                return Err(Error::Config(format!("sensor {s:?} lies outside the sensor box")));
            }
        }
        Ok(())
    }

    /// Closed containment test for the sensor box.
    pub fn in_box(&self, p: &Point3) -> bool {
        p.x.abs() <= self.dx / 2.0 && p.y.abs() <= self.dy / 2.0 && p.z.abs() <= self.dz / 2.0
    }

    pub fn in_cylinder(&self, p: &Point3) -> bool {
        p.horizontal_radius() <= self.dr && p.z.abs() <= self.dh / 2.0
    }

    pub fn cylinder_volume(&self) -> f64 {
        PI * self.dr * self.dr * self.dh
    }

    pub fn box_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Probability that a uniform cylinder point falls outside the box.
    /// With a valid scene the box is fully inside the cylinder.
    pub fn acceptance_probability(&self) -> f64 {
        1.0 - self.box_volume() / self.cylinder_volume()
    }
}

/// Eight box corners plus the centers of the four vertical faces.
pub fn default_sensor_positions(dx: f64, dy: f64, dz: f64, count: usize) -> Result<Vec<Point3>> {
    if count != DEFAULT_SENSOR_COUNT {
        return Err(Error::Config(format!(
            "default placement is defined for {DEFAULT_SENSOR_COUNT} sensors; {count} requires explicit positions"
        )));
    }
    let (hx, hy, hz) = (dx / 2.0, dy / 2.0, dz / 2.0);
    let mut out = Vec::with_capacity(count);
    for sz in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sx in [-1.0, 1.0] {
                out.push(Point3::new(sx * hx, sy * hy, sz * hz));
            }
        }
    }
    out.push(Point3::new(hx, 0.0, 0.0));
    out.push(Point3::new(-hx, 0.0, 0.0));
    out.push(Point3::new(0.0, hy, 0.0));
    out.push(Point3::new(0.0, -hy, 0.0));
    Ok(out)
}

/// Uniform point in the cylinder.
pub fn sample_in_cylinder<R: Rng + ?Sized>(radius: f64, height: f64, rng: &mut R) -> Point3 {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    let z = height * (rng.random::<f64>() - 0.5);
    Point3::new(r * theta.cos(), r * theta.sin(), z)
}

/// Uniform target location in the cylinder, conditioned on lying outside the sensor box.
pub fn sample_target_location<R: Rng + ?Sized>(scene: &SceneConfig, rng: &mut R) -> Result<Point3> {
    scene.validate()?;
    let p_accept = scene.acceptance_probability();
    if p_accept < 1e-6 {
        return Err(Error::DegenerateGeometry(p_accept));
    }
    loop {
        let p = sample_in_cylinder(scene.dr, scene.dh, rng);
        if !scene.in_box(&p) {
            return Ok(p);
        }
    }
}

/// Polar zone partition: `rings` equal-width annuli times `sectors` equal-angle wedges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneLayout {
    pub rings: usize,
    pub sectors: usize,
    pub radius: f64,
}

impl ZoneLayout {
    pub fn new(rings: usize, sectors: usize, radius: f64) -> Result<Self> {
        if rings == 0 || sectors == 0 {
            return Err(Error::Config("zone layout needs at least one ring and one sector".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("zone radius must be positive, got {radius}")));
        }
        Ok(Self { rings, sectors, radius })
    }

    /// Default layouts: 2x4 for 8 zones and 4x8 for 32 zones.
    pub fn for_zone_count(zones: usize, radius: f64) -> Result<Self> {
        match zones {
            8 => Self::new(2, 4, radius),
            32 => Self::new(4, 8, radius),
            _ => Err(Error::Config(format!("no default layout for {zones} zones; give rings and sectors"))),
        }
    }

    pub fn num_zones(&self) -> usize {
        self.rings * self.sectors
    }

    /// Outer radius of each ring, strictly increasing and ending at `radius`.
    pub fn ring_boundaries(&self) -> Vec<f64> {
        (1..=self.rings).map(|i| self.radius * i as f64 / self.rings as f64).collect()
    }

    /// Upper angle of each sector in radians, ending at 2π.
    pub fn sector_boundaries(&self) -> Vec<f64> {
        (1..=self.sectors).map(|i| 2.0 * PI * i as f64 / self.sectors as f64).collect()
    }

    /// Zone index `ring * sectors + sector`. Height is ignored.
    pub fn zone_of(&self, p: &Point3) -> Result<usize> {
        let r = p.horizontal_radius();
        if !(r <= self.radius) {
            return Err(Error::OutsideTarget(p.to_array(), self.radius));
        }
        let ring = ((r / self.radius * self.rings as f64) as usize).min(self.rings - 1);
        let angle = p.y.atan2(p.x).rem_euclid(2.0 * PI);
        let sector = ((angle / (2.0 * PI) * self.sectors as f64) as usize).min(self.sectors - 1);
        Ok(ring * self.sectors + sector)
    }

    /// Fraction of the disk covered by `zone`.
    pub fn zone_area_fraction(&self, zone: usize) -> f64 {
        let ring = zone / self.sectors;
        let (inner, outer) = (ring as f64 / self.rings as f64, (ring + 1) as f64 / self.rings as f64);
        (outer * outer - inner * inner) / self.sectors as f64
    }
}
