//! Cartesian <-> radar-bin coordinate mappings.
//!
//! The radar frame has boresight along +y, the horizontal radar's antenna
//! array along x and the vertical radar's array along z. A uniform linear
//! array along axis `a` measures the direction cosine of the target along
//! that axis, so azimuth bins are uniform in `u = x / range` and elevation
//! bins in `v = z / range`. One angle bin spans
//! [`RadarConfig::angle_sine_per_bin`] of sine space with boresight at bin
//! A/2, matching the fftshifted angle FFT of the DSP chain.

use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;

/// Cartesian position or velocity in meters (/s), radar frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn add(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn sub(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        self.sub(other).norm()
    }
}

/// Continuous (range, azimuth, elevation) bin coordinates of a Cartesian
/// point, before any rounding. `None` if the point is at the origin or
/// behind the radar plane (y <= 0).
pub fn cartesian_to_bins_continuous(pos: &Vec3, cfg: &RadarConfig) -> Option<(f64, f64, f64)> {
    let range = pos.norm();
    if range <= 0.0 || pos.y <= 0.0 {
        return None;
    }
    let u = pos.x / range;
    let v = pos.z / range;
    let r = range / cfg.range_resolution_m;
    let per_bin = cfg.angle_sine_per_bin();
    let a = cfg.center_angle_bin() as f64 + u / per_bin;
    let e = cfg.center_angle_bin() as f64 + v / per_bin;
    Some((r, a, e))
}

/// Cartesian point of continuous bin coordinates; inverse of
/// [`cartesian_to_bins_continuous`] up to quantization. Bins map to bin
/// centers: range = r * resolution, boresight at the center angle bin.
pub fn bins_to_cartesian(r: f64, a: f64, e: f64, cfg: &RadarConfig) -> Vec3 {
    let range = r * cfg.range_resolution_m;
    let per_bin = cfg.angle_sine_per_bin();
    let center = cfg.center_angle_bin() as f64;
    let u = (a - center) * per_bin;
    let v = (e - center) * per_bin;
    // Corner bins can have u^2 + v^2 > 1, which no physical direction
    // reaches; clamp the boresight component at zero there.
    let y = (1.0 - u * u - v * v).max(0.0).sqrt();
    Vec3::new(range * u, range * y, range * v)
}

/// Radial velocity of a point target, positive receding.
pub fn radial_velocity(pos: &Vec3, vel: &Vec3) -> f64 {
    let range = pos.norm();
    if range <= 0.0 {
        return 0.0;
    }
    pos.dot(vel) / range
}
