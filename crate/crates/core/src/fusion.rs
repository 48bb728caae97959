//! Outer-product fusion of the horizontal and vertical radar cubes.
//!
//! The two radars share range and doppler geometry (their 5 cm gap is below
//! the range resolution) but measure orthogonal angles. Expanding each cube
//! with a singleton axis and multiplying elementwise gives the 4D cube
//!
//! ```text
//! fused[d, r, a, e] = h[d, r, a] * v[d, r, e]
//! ```
//!
//! which rewards the co-occurrence of strong returns in both radars at the
//! same (doppler, range) cell. The product is taken on magnitudes: the
//! radars are not phase coherent, so complex products carry no meaning.

use ndarray::Array4;
use thiserror::Error;

use crate::dsp::{BinMetadata, RadarCube};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("doppler/range dims differ: horizontal {h:?}, vertical {v:?}")]
    DimMismatch { h: (usize, usize), v: (usize, usize) },
}

/// Fused cube, shape (doppler, range, azimuth, elevation).
#[derive(Debug, Clone, PartialEq)]
pub struct FusedCube<T: Real> {
    pub data: Array4<T>,
    pub meta: BinMetadata,
}

impl<T: Real> FusedCube<T> {
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }
}

/// Fuses the two radar cubes per the elementwise product above. With
/// `normalize` the result is divided by its global maximum so values land in
/// [0, 1]; an all-zero cube is left untouched.
pub fn fuse<T: Real>(
    h: &RadarCube<T>,
    v: &RadarCube<T>,
    normalize: bool,
) -> Result<FusedCube<T>, FusionError> {
    let (dh, rh, azimuth) = h.dims();
    let (dv, rv, elevation) = v.dims();
    if (dh, rh) != (dv, rv) {
        return Err(FusionError::DimMismatch {
            h: (dh, rh),
            v: (dv, rv),
        });
    }

    let mut data = Array4::zeros((dh, rh, azimuth, elevation));
    for d in 0..dh {
        for r in 0..rh {
            for a in 0..azimuth {
                let hv = h.data[[d, r, a]];
                for e in 0..elevation {
                    data[[d, r, a, e]] = hv * v.data[[d, r, e]];
                }
            }
        }
    }

    if normalize {
        let max = data.iter().copied().fold(T::zero(), T::max);
        if max > T::zero() {
            data.mapv_inplace(|x| x / max);
        }
    }

    Ok(FusedCube { data, meta: h.meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RadarConfig;
    use crate::sim::RadarId;
    use ndarray::Array3;

    fn cube(data: Array3<f64>, radar_id: RadarId) -> RadarCube<f64> {
        RadarCube {
            data,
            radar_id,
            meta: BinMetadata::from_config(&RadarConfig::desk_scale()),
        }
    }

    #[test]
    fn all_ones_fuse_to_all_ones() {
        let h = cube(Array3::from_elem((3, 4, 5), 1.0), RadarId::Horizontal);
        let v = cube(Array3::from_elem((3, 4, 6), 1.0), RadarId::Vertical);
        let fused = fuse(&h, &v, false).unwrap();
        assert_eq!(fused.dims(), (3, 4, 5, 6));
        assert!(fused.data.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn matched_impulses_fuse_to_single_product() {
        let mut hd = Array3::zeros((4, 4, 4));
        let mut vd = Array3::zeros((4, 4, 4));
        hd[[1, 2, 3]] = 2.0;
        vd[[1, 2, 0]] = 5.0;
        let fused = fuse(
            &cube(hd, RadarId::Horizontal),
            &cube(vd, RadarId::Vertical),
            false,
        )
        .unwrap();
        for (idx, &val) in fused.data.indexed_iter() {
            if idx == (1, 2, 3, 0) {
                assert_eq!(val, 10.0);
            } else {
                assert_eq!(val, 0.0);
            }
        }
    }

    #[test]
    fn doppler_mismatch_suppresses_ghost() {
        let mut hd = Array3::zeros((4, 4, 4));
        let mut vd = Array3::zeros((4, 4, 4));
        hd[[0, 2, 3]] = 2.0;
        vd[[1, 2, 0]] = 5.0; // same range, different doppler
        let fused = fuse(
            &cube(hd, RadarId::Horizontal),
            &cube(vd, RadarId::Vertical),
            false,
        )
        .unwrap();
        assert!(fused.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let h = cube(Array3::zeros((3, 4, 5)), RadarId::Horizontal);
        let v = cube(Array3::zeros((3, 5, 5)), RadarId::Vertical);
        assert_eq!(
            fuse(&h, &v, false).unwrap_err(),
            FusionError::DimMismatch {
                h: (3, 4),
                v: (3, 5)
            }
        );
    }

    #[test]
    fn normalized_zero_cube_stays_zero() {
        let h = cube(Array3::zeros((2, 2, 2)), RadarId::Horizontal);
        let v = cube(Array3::zeros((2, 2, 2)), RadarId::Vertical);
        let fused = fuse(&h, &v, true).unwrap();
        assert!(fused.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalization_caps_at_one() {
        let h = cube(Array3::from_elem((2, 2, 2), 3.0), RadarId::Horizontal);
        let v = cube(Array3::from_elem((2, 2, 2), 7.0), RadarId::Vertical);
        let fused = fuse(&h, &v, true).unwrap();
        assert!(fused.data.iter().all(|&x| x == 1.0));
    }
}
