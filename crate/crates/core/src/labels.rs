//! Ground-truth confidence cubes.
//!
//! A labeled target becomes a Gaussian blob in (range, azimuth, elevation)
//! bin space: the element at the target's bin gets confidence 1.0 and the
//! surroundings decay as `exp(-d^2 / (2 sigma^2))` with `d` the Euclidean
//! bin distance, sigma 1 for small drones and 2 for large ones. Values below
//! 0.05 are zeroed, which bounds the support radius at
//! `sqrt(-2 sigma^2 ln 0.05)` (about 2.45 bins small, 4.90 bins large).
//! Overlapping blobs of the same class combine by elementwise max so values
//! never exceed 1.

use ndarray::Array4;
use thiserror::Error;

use crate::config::RadarConfig;
use crate::coords::{cartesian_to_bins_continuous, Vec3};
use crate::scalar::Real;
use crate::sim::DroneClass;

/// Confidence cutoff below which ground truth is exactly zero.
pub const CONFIDENCE_CUTOFF: f64 = 0.05;

/// Gaussian width in bins for each class mask.
pub fn mask_sigma(class: DroneClass) -> f64 {
    match class {
        DroneClass::Small => 1.0,
        DroneClass::Large => 2.0,
    }
}

/// Squared support radius of a class mask: confidences at squared bin
/// distance above this are below the cutoff.
pub fn mask_support_radius_sq(sigma: f64) -> f64 {
    -2.0 * sigma * sigma * CONFIDENCE_CUTOFF.ln()
}

/// Eq.-of-decay confidence at squared bin distance `d2`, already cut off.
pub fn gaussian_confidence(d2: f64, sigma: f64) -> f64 {
    let conf = (-d2 / (2.0 * sigma * sigma)).exp();
    if conf < CONFIDENCE_CUTOFF {
        0.0
    } else {
        conf
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("position {0:?} outside the radar field of view")]
    OutOfFieldOfView(Vec3),
    #[error("target bins ({r}, {a}, {e}) outside cube dims {dims:?}")]
    BinsOutOfRange {
        r: usize,
        a: usize,
        e: usize,
        dims: (usize, usize, usize),
    },
}

/// Target location in cube bin coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPosition {
    /// Continuous range bin.
    pub r: f64,
    /// Continuous azimuth bin.
    pub a: f64,
    /// Continuous elevation bin.
    pub e: f64,
    pub class: DroneClass,
}

impl PolarPosition {
    /// Nearest integer bins, used for label placement.
    pub fn rounded(&self) -> (usize, usize, usize) {
        (
            self.r.round() as usize,
            self.a.round() as usize,
            self.e.round() as usize,
        )
    }
}

/// Per-class confidence cube, shape (classes, range, azimuth, elevation),
/// values in [0, 1]. Holds ground truth and network predictions alike.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceCube<T: Real> {
    pub data: Array4<T>,
}

impl<T: Real> ConfidenceCube<T> {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            data: Array4::zeros((DroneClass::ALL.len(), dims.0, dims.1, dims.2)),
        }
    }

    pub fn classes(&self) -> usize {
        self.data.dim().0
    }

    /// Spatial dims (range, azimuth, elevation).
    pub fn dims(&self) -> (usize, usize, usize) {
        let (_, r, a, e) = self.data.dim();
        (r, a, e)
    }

    /// Zeroes every element below the ground-truth cutoff. Idempotent.
    pub fn apply_cutoff(&mut self) {
        let cutoff = T::from_f64_lossy(CONFIDENCE_CUTOFF);
        self.data.mapv_inplace(|v| if v < cutoff { T::zero() } else { v });
    }
}

/// Converts a Cartesian position in meters to continuous cube bins.
///
/// Range maps at `range_resolution_m` per bin; azimuth and elevation map
/// uniformly in sine space around the center bin. Errors if the position is
/// behind the radar, beyond the maximum range, or if its nearest bin falls
/// outside the cube (the upper bounds are exclusive).
pub fn to_polar_bins(
    position: &Vec3,
    class: DroneClass,
    cfg: &RadarConfig,
) -> Result<PolarPosition, LabelError> {
    let out = || LabelError::OutOfFieldOfView(*position);
    if position.norm() > cfg.max_range_m {
        return Err(out());
    }
    let (r, a, e) = cartesian_to_bins_continuous(position, cfg).ok_or_else(out)?;
    let pos = PolarPosition { r, a, e, class };
    let (ri, ai, ei) = pos.rounded();
    let (rb, ab) = (cfg.range_bins(), cfg.angle_bins);
    if r < 0.0 || ri >= rb || ai >= ab || ei >= ab {
        return Err(out());
    }
    Ok(pos)
}

/// Builds the per-class ground-truth cube for a set of labeled positions.
///
/// Positions are rounded to their nearest bin; an empty list yields an
/// all-zero cube.
pub fn make_ground_truth<T: Real>(
    targets: &[PolarPosition],
    dims: (usize, usize, usize),
) -> Result<ConfidenceCube<T>, LabelError> {
    let (rb, ab, eb) = dims;
    let mut cube = ConfidenceCube::zeros(dims);

    for target in targets {
        let (tr, ta, te) = target.rounded();
        if tr >= rb || ta >= ab || te >= eb {
            return Err(LabelError::BinsOutOfRange {
                r: tr,
                a: ta,
                e: te,
                dims,
            });
        }
        let sigma = mask_sigma(target.class);
        let reach = mask_support_radius_sq(sigma).sqrt().ceil() as usize;
        let c = target.class.index();

        let r_lo = tr.saturating_sub(reach);
        let a_lo = ta.saturating_sub(reach);
        let e_lo = te.saturating_sub(reach);
        for r in r_lo..=(tr + reach).min(rb - 1) {
            for a in a_lo..=(ta + reach).min(ab - 1) {
                for e in e_lo..=(te + reach).min(eb - 1) {
                    let d2 = sq_dist((r, a, e), (tr, ta, te));
                    let conf = T::from_f64_lossy(gaussian_confidence(d2, sigma));
                    let cell = &mut cube.data[[c, r, a, e]];
                    if conf > *cell {
                        *cell = conf;
                    }
                }
            }
        }
    }
    Ok(cube)
}

fn sq_dist(a: (usize, usize, usize), b: (usize, usize, usize)) -> f64 {
    let dr = a.0 as f64 - b.0 as f64;
    let da = a.1 as f64 - b.1 as f64;
    let de = a.2 as f64 - b.2 as f64;
    dr * dr + da * da + de * de
}
