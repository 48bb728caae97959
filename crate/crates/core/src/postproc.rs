//! Confidence cube to discrete detections.
//!
//! Two stages per class:
//!
//! * **Location NMS** — candidates above 0.01 are visited in descending
//!   confidence; each pick suppresses every remaining candidate inside the
//!   support of a wider Gaussian mask (sigma 3 small / 5 large, support
//!   radius `sqrt(-2 sigma^2 ln 0.05)`, about 7.34 / 12.24 bins). Ties in
//!   confidence break by lexicographic (r, a, e) so pick order is
//!   deterministic.
//! * **Overlap-ratio filtering** — a (7,7,7) crop around each peak is
//!   compared against the ground-truth-shaped Gaussian mask it should look
//!   like; both are binarized at 0.05 and the detection is kept when
//!   `|intersection| / |union| >= 0.5`. Isolated spikes and ridge artifacts
//!   fail this and are dropped. Crops past the cube boundary are zero-padded
//!   so the shape contract holds everywhere.

use ndarray::{Array3, ArrayView3};
use thiserror::Error;

use crate::config::RadarConfig;
use crate::coords::{bins_to_cartesian, Vec3};
use crate::labels::{gaussian_confidence, mask_support_radius_sq, ConfidenceCube};
use crate::scalar::Real;
use crate::sim::DroneClass;

/// Candidates at or below this confidence never become detections.
pub const CANDIDATE_FLOOR: f64 = 0.01;
/// Binarization threshold of the overlap-ratio comparison.
pub const OVERLAP_TAU: f64 = 0.05;
/// Minimum overlap ratio a detection must reach against its ideal mask.
pub const OVERLAP_KEEP: f64 = 0.5;
/// Side length of the crop compared around each peak.
pub const CROP_SIZE: usize = 7;

#[derive(Debug, Error, PartialEq)]
pub enum PostprocError {
    #[error("crop shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
}

/// Suppression sigma of the location NMS for one class.
pub fn lnms_sigma(class: DroneClass) -> f64 {
    match class {
        DroneClass::Small => 3.0,
        DroneClass::Large => 5.0,
    }
}

/// One detected target in bin space.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class: DroneClass,
    pub bins: (usize, usize, usize),
    pub confidence: f64,
    pub cartesian: Vec3,
}

impl Detection {
    pub fn new(class: DroneClass, bins: (usize, usize, usize), confidence: f64) -> Self {
        Self {
            class,
            bins,
            confidence,
            cartesian: Vec3::default(),
        }
    }

    /// Fills the Cartesian position from the bin geometry of `cfg`.
    pub fn with_cartesian(mut self, cfg: &RadarConfig) -> Self {
        self.cartesian = bins_to_cartesian(
            self.bins.0 as f64,
            self.bins.1 as f64,
            self.bins.2 as f64,
            cfg,
        );
        self
    }
}

/// Greedy 3D location non-maximum suppression over one class slice.
pub fn lnms<T: Real>(pred: &ConfidenceCube<T>, class: DroneClass) -> Vec<Detection> {
    let slice = pred.data.index_axis(ndarray::Axis(0), class.index());
    lnms_slice(&slice, class)
}

/// LNMS over a raw (range, azimuth, elevation) confidence slice.
pub fn lnms_slice<T: Real>(slice: &ArrayView3<'_, T>, class: DroneClass) -> Vec<Detection> {
    let floor = T::from_f64_lossy(CANDIDATE_FLOOR);
    let mut candidates: Vec<((usize, usize, usize), T)> = slice
        .indexed_iter()
        .filter(|&(_, &v)| v > floor)
        .map(|(idx, &v)| (idx, v))
        .collect();
    // Descending confidence, ties by lexicographic bins.
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let radius_sq = mask_support_radius_sq(lnms_sigma(class));
    let mut alive = vec![true; candidates.len()];
    let mut picks = Vec::new();
    for i in 0..candidates.len() {
        if !alive[i] {
            continue;
        }
        let (peak, conf) = candidates[i];
        picks.push(Detection::new(class, peak, conf.to_f64().unwrap()));
        for (j, cand) in candidates.iter().enumerate().skip(i) {
            if alive[j] && bin_dist_sq(cand.0, peak) <= radius_sq {
                alive[j] = false;
            }
        }
    }
    picks
}

fn bin_dist_sq(a: (usize, usize, usize), b: (usize, usize, usize)) -> f64 {
    let dr = a.0 as f64 - b.0 as f64;
    let da = a.1 as f64 - b.1 as f64;
    let de = a.2 as f64 - b.2 as f64;
    dr * dr + da * da + de * de
}

/// Overlap ratio of two equally shaped crops binarized at `tau`:
/// `|intersection| / |union|`, and 0 when the union is empty.
pub fn calculate_overlap_ratio<T: Real>(
    expected: &Array3<T>,
    observed: &Array3<T>,
    tau: f64,
) -> Result<f64, PostprocError> {
    if expected.dim() != observed.dim() {
        return Err(PostprocError::ShapeMismatch(expected.dim(), observed.dim()));
    }
    let tau = T::from_f64_lossy(tau);
    let mut overlap = 0usize;
    let mut expected_on = 0usize;
    let mut observed_on = 0usize;
    for (&o, &p) in expected.iter().zip(observed.iter()) {
        let a = o > tau;
        let b = p > tau;
        expected_on += usize::from(a);
        observed_on += usize::from(b);
        overlap += usize::from(a && b);
    }
    let total = expected_on + observed_on - overlap;
    Ok(if total > 0 {
        overlap as f64 / total as f64
    } else {
        0.0
    })
}

/// Crops a (7,7,7) window centered on `center`, zero-padding past the
/// boundary.
pub fn crop_around<T: Real>(
    slice: &ArrayView3<'_, T>,
    center: (usize, usize, usize),
) -> Array3<T> {
    let half = (CROP_SIZE / 2) as isize;
    let dims = slice.dim();
    let mut out = Array3::zeros((CROP_SIZE, CROP_SIZE, CROP_SIZE));
    for dr in -half..=half {
        for da in -half..=half {
            for de in -half..=half {
                let r = center.0 as isize + dr;
                let a = center.1 as isize + da;
                let e = center.2 as isize + de;
                if r < 0 || a < 0 || e < 0 {
                    continue;
                }
                let (r, a, e) = (r as usize, a as usize, e as usize);
                if r >= dims.0 || a >= dims.1 || e >= dims.2 {
                    continue;
                }
                out[[
                    (dr + half) as usize,
                    (da + half) as usize,
                    (de + half) as usize,
                ]] = slice[[r, a, e]];
            }
        }
    }
    out
}

/// Ideal ground-truth-shaped mask a detection of `class` should produce in
/// its (7,7,7) neighborhood.
pub fn expected_mask<T: Real>(class: DroneClass) -> Array3<T> {
    let sigma = crate::labels::mask_sigma(class);
    let half = (CROP_SIZE / 2) as isize;
    let mut out = Array3::zeros((CROP_SIZE, CROP_SIZE, CROP_SIZE));
    for r in -half..=half {
        for a in -half..=half {
            for e in -half..=half {
                let d2 = (r * r + a * a + e * e) as f64;
                out[[
                    (r + half) as usize,
                    (a + half) as usize,
                    (e + half) as usize,
                ]] = T::from_f64_lossy(gaussian_confidence(d2, sigma));
            }
        }
    }
    out
}

/// Drops detections whose neighborhood does not look like the Gaussian blob
/// a real target of that class would produce.
pub fn filter_outliers<T: Real>(
    pred: &ConfidenceCube<T>,
    detections: &[Detection],
) -> Vec<Detection> {
    detections
        .iter()
        .filter(|det| {
            let slice = pred.data.index_axis(ndarray::Axis(0), det.class.index());
            let observed = crop_around(&slice, det.bins);
            let expected = expected_mask::<T>(det.class);
            let ratio = calculate_overlap_ratio(&expected, &observed, OVERLAP_TAU)
                .expect("equal crop shapes");
            ratio >= OVERLAP_KEEP
        })
        .cloned()
        .collect()
}

/// Full post-processing of a predicted cube: per-class LNMS plus outlier
/// rejection, Cartesian positions attached.
pub fn detect<T: Real>(pred: &ConfidenceCube<T>, cfg: &RadarConfig) -> Vec<Detection> {
    let mut out = Vec::new();
    for class in DroneClass::ALL {
        let peaks = lnms(pred, class);
        let kept = filter_outliers(pred, &peaks);
        out.extend(kept.into_iter().map(|d| d.with_cartesian(cfg)));
    }
    out
}
