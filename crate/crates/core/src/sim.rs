//! Point-scatterer FMCW frame synthesis for the dual radar pair.
//!
//! Each scatterer contributes a complex sinusoid whose beat frequency over
//! fast time encodes range, whose chirp-to-chirp phase ramp encodes radial
//! doppler, and whose antenna-to-antenna phase ramp encodes the direction
//! cosine along the array axis: x for the horizontal radar, z for the
//! vertical (90-degree rotated) one. The three ramps are separable, so a
//! scatterer is synthesized from three small phasor tables instead of one
//! `exp` per ADC sample.
//!
//! Scatterer initial phases are fixed at zero: the downstream pipeline is
//! magnitude-based, and zero phase keeps frame synthesis exactly linear in
//! the scene's targets. Range migration within one frame is neglected.

use std::path::Path;

use ndarray::Array3;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RadarConfig;
use crate::coords::{radial_velocity, Vec3};
use crate::scalar::Real;

/// Default spread of the large drone's outer scatterers in meters.
pub const LARGE_SPREAD_M: f64 = 0.48;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("target at range {range:.2} m outside (0, {max:.2}] m")]
    TargetOutOfRange { range: f64, max: f64 },
    #[error("radial velocity {vr:.2} m/s aliases (unambiguous +-{limit:.2} m/s)")]
    DopplerAliases { vr: f64, limit: f64 },
    #[error("target behind the radar plane (y <= 0)")]
    TargetBehindRadar,
    #[error("failed to read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scene file: {0}")]
    Parse(#[from] toml::de::Error),
}

/// The two drone size classes the system tells apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DroneClass {
    Small,
    Large,
}

impl DroneClass {
    pub const ALL: [DroneClass; 2] = [DroneClass::Small, DroneClass::Large];

    /// Index into per-class cubes.
    pub fn index(self) -> usize {
        match self {
            DroneClass::Small => 0,
            DroneClass::Large => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(DroneClass::Small),
            1 => Some(DroneClass::Large),
            _ => None,
        }
    }

    /// Default reflection amplitude; small:large is 1:3.
    pub fn default_rcs(self) -> f64 {
        match self {
            DroneClass::Small => 1.0,
            DroneClass::Large => 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DroneClass::Small => "small",
            DroneClass::Large => "large",
        }
    }
}

/// Which radar of the pair produced a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadarId {
    /// Array along x, measures azimuth.
    Horizontal,
    /// Array along z, measures elevation.
    Vertical,
}

/// One drone in a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub class: DroneClass,
    /// Center position in meters, radar frame.
    pub position: Vec3,
    /// Velocity in m/s.
    #[serde(default)]
    pub velocity: Vec3,
    /// Reflection amplitude; `None` uses the class default.
    #[serde(default)]
    pub rcs: Option<f64>,
}

impl Target {
    pub fn new(class: DroneClass, position: Vec3, velocity: Vec3) -> Self {
        Self {
            class,
            position,
            velocity,
            rcs: None,
        }
    }

    pub fn effective_rcs(&self) -> f64 {
        self.rcs.unwrap_or_else(|| self.class.default_rcs())
    }

    /// Point scatterers making up this target. Small drones are a single
    /// point; large drones are three points spread in azimuth and elevation
    /// (their centroid stays at `position`), so they occupy a broader angle
    /// footprint. The total amplitude equals `effective_rcs()`.
    pub fn scatterers(&self, spread_m: f64) -> Vec<(Vec3, f64)> {
        let amp = self.effective_rcs();
        match self.class {
            DroneClass::Small => vec![(self.position, amp)],
            DroneClass::Large => {
                let arm = Vec3::new(spread_m / 2.0, 0.0, spread_m / 4.0);
                vec![
                    (self.position, amp / 3.0),
                    (self.position.add(&arm), amp / 3.0),
                    (self.position.sub(&arm), amp / 3.0),
                ]
            }
        }
    }
}

/// A set of targets plus the noise level and RNG seed of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub targets: Vec<Target>,
    /// Variance of the complex white noise added per ADC sample.
    #[serde(default)]
    pub noise_power: f64,
    #[serde(default)]
    pub seed: u64,
    /// Scatterer spread of large drones in meters.
    #[serde(default = "default_spread")]
    pub large_spread_m: f64,
}

fn default_spread() -> f64 {
    LARGE_SPREAD_M
}

impl Scene {
    pub fn new(targets: Vec<Target>, noise_power: f64, seed: u64) -> Self {
        Self {
            targets,
            noise_power,
            seed,
            large_spread_m: LARGE_SPREAD_M,
        }
    }

    pub fn empty(seed: u64) -> Self {
        Self::new(Vec::new(), 0.0, seed)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scene serializes")
    }
}

/// Raw complex ADC tensor of one radar frame, shape
/// (num_chirps, num_samples, num_virtual_antennas).
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame<T: Real> {
    pub samples: Array3<Complex<T>>,
    pub radar_id: RadarId,
}

/// One trajectory step: the synchronized frame pair plus the ground truth
/// actually visible to the radars.
#[derive(Debug, Clone)]
pub struct TrajectoryFrame<T: Real> {
    pub horizontal: RawFrame<T>,
    pub vertical: RawFrame<T>,
    pub truth: Scene,
}

/// Mounting origin of one radar; the vertical radar sits
/// `radar_separation_m` above the horizontal one.
fn radar_origin(radar_id: RadarId, cfg: &RadarConfig) -> Vec3 {
    match radar_id {
        RadarId::Horizontal => Vec3::new(0.0, 0.0, 0.0),
        RadarId::Vertical => Vec3::new(0.0, 0.0, cfg.radar_separation_m),
    }
}

fn checked_geometry(
    scatterer: &Vec3,
    velocity: &Vec3,
    radar_id: RadarId,
    cfg: &RadarConfig,
) -> Result<(f64, f64, f64), SimError> {
    let rel = scatterer.sub(&radar_origin(radar_id, cfg));
    let range = rel.norm();
    if range <= 0.0 || range > cfg.max_range_m {
        return Err(SimError::TargetOutOfRange {
            range,
            max: cfg.max_range_m,
        });
    }
    if rel.y <= 0.0 {
        return Err(SimError::TargetBehindRadar);
    }
    let vr = radial_velocity(&rel, velocity);
    let limit = cfg.doppler_span_mps() / 2.0;
    if vr.abs() >= limit {
        return Err(SimError::DopplerAliases { vr, limit });
    }
    let u = match radar_id {
        RadarId::Horizontal => rel.x / range,
        RadarId::Vertical => rel.z / range,
    };
    Ok((range, vr, u))
}

fn phasor_table<T: Real>(cycles_per_step: f64, len: usize) -> Vec<Complex<T>> {
    (0..len)
        .map(|i| {
            let phase = 2.0 * std::f64::consts::PI * cycles_per_step * i as f64;
            Complex::new(T::from_f64_lossy(phase.cos()), T::from_f64_lossy(phase.sin()))
        })
        .collect()
}

/// Synthesizes the raw ADC frame one radar sees for `scene`.
///
/// Superposition over targets; complex circular Gaussian noise with variance
/// `scene.noise_power` is added when nonzero. Output is deterministic given
/// (scene, cfg, radar_id).
pub fn simulate_frame<T: Real>(
    scene: &Scene,
    cfg: &RadarConfig,
    radar_id: RadarId,
) -> Result<RawFrame<T>, SimError> {
    let (chirps, samples, antennas) = (cfg.num_chirps, cfg.num_samples, cfg.num_virtual_antennas);
    let mut frame = Array3::from_elem(
        (chirps, samples, antennas),
        Complex::new(T::zero(), T::zero()),
    );

    let range_denom = cfg.native_range_resolution_m() * samples as f64;
    let doppler_denom = cfg.native_doppler_resolution_mps() * cfg.doppler_fft_len() as f64;

    // Each target echo is synthesized into its own buffer and then added,
    // so a multi-target frame is the exact elementwise sum of the
    // single-target frames.
    for target in &scene.targets {
        let mut echo = Array3::from_elem(
            (chirps, samples, antennas),
            Complex::new(T::zero(), T::zero()),
        );
        for (pos, amp) in target.scatterers(scene.large_spread_m) {
            let (range, vr, u) = checked_geometry(&pos, &target.velocity, radar_id, cfg)?;
            let range_tbl = phasor_table::<T>(range / range_denom, samples);
            let doppler_tbl = phasor_table::<T>(vr / doppler_denom, chirps);
            let antenna_tbl = phasor_table::<T>(cfg.antenna_spacing * u, antennas);
            let amp = T::from_f64_lossy(amp);

            for (m, dop) in doppler_tbl.iter().enumerate() {
                for (n, rng_ph) in range_tbl.iter().enumerate() {
                    let md = *dop * *rng_ph * amp;
                    for (a, ant) in antenna_tbl.iter().enumerate() {
                        echo[[m, n, a]] += md * *ant;
                    }
                }
            }
        }
        frame += &echo;
    }

    if scene.noise_power > 0.0 {
        let mut rng = noise_rng(scene.seed, radar_id);
        let normal = Normal::new(0.0f64, (scene.noise_power / 2.0).sqrt()).expect("valid sigma");
        for v in frame.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *v += Complex::new(T::from_f64_lossy(re), T::from_f64_lossy(im));
        }
    }

    Ok(RawFrame {
        samples: frame,
        radar_id,
    })
}

fn noise_rng(seed: u64, radar_id: RadarId) -> ChaCha8Rng {
    let salt = match radar_id {
        RadarId::Horizontal => 0x9e3779b97f4a7c15u64,
        RadarId::Vertical => 0xd1b54a32d192ed03u64,
    };
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

/// Is the target's center visible to both radars (in range, unaliased, in
/// front of the array)?
pub fn target_visible(target: &Target, cfg: &RadarConfig) -> bool {
    [RadarId::Horizontal, RadarId::Vertical].iter().all(|&id| {
        checked_geometry(&target.position, &target.velocity, id, cfg).is_ok()
    })
}

/// Simulates a temporally ordered scene sequence into frame pairs.
///
/// Targets beyond the maximum range (or aliasing in doppler, or behind the
/// radar) are treated as absent: they contribute no echo and no ground
/// truth, so such frames come back empty rather than failing the run.
pub fn simulate_trajectory<T: Real>(
    scenes: &[Scene],
    cfg: &RadarConfig,
) -> Result<Vec<TrajectoryFrame<T>>, SimError> {
    scenes
        .iter()
        .map(|scene| {
            let mut visible = scene.clone();
            visible.targets.retain(|t| target_visible(t, cfg));
            let horizontal = simulate_frame(&visible, cfg, RadarId::Horizontal)?;
            let vertical = simulate_frame(&visible, cfg, RadarId::Vertical)?;
            Ok(TrajectoryFrame {
                horizontal,
                vertical,
                truth: visible,
            })
        })
        .collect()
}
