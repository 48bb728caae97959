//! Conventional point-cloud localization baseline: CA-CFAR detection on
//! each radar cube plus density clustering of the detections.
//!
//! Cell-averaging CFAR runs along the range axis of every (doppler, angle)
//! slice: a cell fires when its magnitude exceeds `scale` times the mean of
//! the `train` cells on each side, skipping `guard` cells around the cell
//! under test. Edge cells without a full window are never tested.
//!
//! Detections collapse to (range, angle) points which are clustered with
//! DBSCAN; the largest cluster's magnitude-weighted centroid is the radar's
//! location estimate. The horizontal radar supplies (range, azimuth), the
//! vertical one (range, elevation); the two range estimates are averaged
//! into a single 3D fix. No classification is attempted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RadarConfig;
use crate::coords::{bins_to_cartesian, Vec3};
use crate::dsp::RadarCube;
use crate::scalar::Real;
use crate::sim::RadarId;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("CFAR window 2*({guard}+{train})+1 exceeds range axis of {range_bins} bins")]
    WindowTooLarge {
        guard: usize,
        train: usize,
        range_bins: usize,
    },
    #[error("no cluster with at least {min_pts} points")]
    NoCluster { min_pts: usize },
}

/// Hand-tuned knobs of the baseline; the point of the exercise is how
/// sensitive the results are to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    pub guard: usize,
    pub train: usize,
    pub scale: f64,
    /// DBSCAN neighborhood radius in bins.
    pub eps: f64,
    pub min_pts: usize,
    /// Drop zero-doppler detections (static clutter) before clustering.
    pub doppler_gate: bool,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            guard: 2,
            train: 8,
            scale: 4.0,
            eps: 2.0,
            min_pts: 3,
            doppler_gate: false,
        }
    }
}

/// One CFAR detection in cube bin space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint {
    pub doppler: usize,
    pub range: usize,
    pub angle: usize,
    pub magnitude: f64,
    pub radar_id: RadarId,
}

/// A DBSCAN cluster of radar points.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub points: Vec<RadarPoint>,
    /// Magnitude-weighted (range, angle) centroid in continuous bins.
    pub centroid: (f64, f64),
}

/// Cell-averaging CFAR along range for every (doppler, angle) slice.
pub fn cfar_detect<T: Real>(
    cube: &RadarCube<T>,
    guard: usize,
    train: usize,
    scale: f64,
) -> Result<Vec<RadarPoint>, BaselineError> {
    let (dop, range_bins, angle_bins) = cube.dims();
    let window = 2 * (guard + train) + 1;
    if window > range_bins {
        return Err(BaselineError::WindowTooLarge {
            guard,
            train,
            range_bins,
        });
    }

    let mut points = Vec::new();
    let reach = guard + train;
    for d in 0..dop {
        for a in 0..angle_bins {
            for r in reach..range_bins - reach {
                let mut noise = T::zero();
                for t in 1..=train {
                    noise += cube.data[[d, r - guard - t, a]];
                    noise += cube.data[[d, r + guard + t, a]];
                }
                let mean = noise.to_f64().unwrap() / (2 * train) as f64;
                let cell = cube.data[[d, r, a]].to_f64().unwrap();
                if cell > scale * mean {
                    points.push(RadarPoint {
                        doppler: d,
                        range: r,
                        angle: a,
                        magnitude: cell,
                        radar_id: cube.radar_id,
                    });
                }
            }
        }
    }
    Ok(points)
}

/// DBSCAN over (range, angle) bin space. Returns clusters sorted by
/// descending size (ties by first point); noise points are dropped.
///
/// Points are canonicalized by (doppler, range, angle) order first, so the
/// outcome does not depend on input order.
pub fn cluster_points(
    points: &[RadarPoint],
    eps: f64,
    min_pts: usize,
) -> Result<Vec<Cluster>, BaselineError> {
    let mut pts: Vec<RadarPoint> = points.to_vec();
    pts.sort_by_key(|p| (p.doppler, p.range, p.angle));

    let n = pts.len();
    let eps_sq = eps * eps;
    let dist_sq = |a: &RadarPoint, b: &RadarPoint| {
        let dr = a.range as f64 - b.range as f64;
        let da = a.angle as f64 - b.angle as f64;
        dr * dr + da * da
    };
    let neighbors = |i: usize, pts: &[RadarPoint]| -> Vec<usize> {
        (0..n).filter(|&j| dist_sq(&pts[i], &pts[j]) <= eps_sq).collect()
    };

    const UNVISITED: isize = -2;
    const NOISE: isize = -1;
    let mut labels = vec![UNVISITED; n];
    let mut cluster_id: isize = 0;

    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let seed_neighbors = neighbors(i, &pts);
        if seed_neighbors.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster_id;
        let mut frontier = seed_neighbors;
        let mut k = 0;
        while k < frontier.len() {
            let j = frontier[k];
            k += 1;
            if labels[j] == NOISE {
                labels[j] = cluster_id;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster_id;
            let next = neighbors(j, &pts);
            if next.len() >= min_pts {
                frontier.extend(next);
            }
        }
        cluster_id += 1;
    }

    let mut clusters = Vec::new();
    for id in 0..cluster_id {
        let members: Vec<RadarPoint> = pts
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == id)
            .map(|(p, _)| *p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let weight: f64 = members.iter().map(|p| p.magnitude).sum();
        let r = members.iter().map(|p| p.range as f64 * p.magnitude).sum::<f64>() / weight;
        let a = members.iter().map(|p| p.angle as f64 * p.magnitude).sum::<f64>() / weight;
        clusters.push(Cluster {
            points: members,
            centroid: (r, a),
        });
    }
    if clusters.is_empty() {
        return Err(BaselineError::NoCluster { min_pts });
    }
    clusters.sort_by(|x, y| y.points.len().cmp(&x.points.len()));
    Ok(clusters)
}

/// 3D baseline position estimate from one radar cube pair.
#[derive(Debug, Clone)]
pub struct BaselineEstimate {
    /// Continuous (range, azimuth, elevation) bins.
    pub bins: (f64, f64, f64),
    pub cartesian: Vec3,
}

/// Runs the full conventional chain on a frame pair: CFAR per cube, DBSCAN
/// per radar, largest-cluster centroids combined into one 3D estimate
/// (ranges averaged). Localization only; the baseline has no class output.
pub fn locate<T: Real>(
    horizontal: &RadarCube<T>,
    vertical: &RadarCube<T>,
    params: &BaselineParams,
    cfg: &RadarConfig,
) -> Result<BaselineEstimate, BaselineError> {
    let pick = |cube: &RadarCube<T>| -> Result<(f64, f64), BaselineError> {
        let mut points = cfar_detect(cube, params.guard, params.train, params.scale)?;
        if params.doppler_gate {
            let zero = cfg.zero_doppler_bin();
            points.retain(|p| p.doppler != zero);
        }
        let clusters = cluster_points(&points, params.eps, params.min_pts)?;
        Ok(clusters[0].centroid)
    };
    let (rh, azimuth) = pick(horizontal)?;
    let (rv, elevation) = pick(vertical)?;
    let range = 0.5 * (rh + rv);
    Ok(BaselineEstimate {
        bins: (range, azimuth, elevation),
        cartesian: bins_to_cartesian(range, azimuth, elevation, cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::BinMetadata;
    use ndarray::Array3;

    fn cube(data: Array3<f64>) -> RadarCube<f64> {
        RadarCube {
            data,
            radar_id: RadarId::Horizontal,
            meta: BinMetadata::from_config(&RadarConfig::desk_scale()),
        }
    }

    #[test]
    fn constant_cube_has_no_detections() {
        let c = cube(Array3::from_elem((4, 32, 4), 1.0));
        assert!(cfar_detect(&c, 2, 8, 1.5).unwrap().is_empty());
    }

    #[test]
    fn lone_impulse_is_the_only_detection() {
        let mut data = Array3::zeros((4, 32, 4));
        data[[2, 16, 1]] = 5.0;
        let points = cfar_detect(&cube(data), 2, 4, 3.0).unwrap();
        assert_eq!(points.len(), 1);
        let p = points[0];
        assert_eq!((p.doppler, p.range, p.angle), (2, 16, 1));
    }

    #[test]
    fn impulse_over_background_crosses_scaled_mean() {
        // 10 against mean 1 with scale 5: 10 > 5.
        let mut data = Array3::from_elem((1, 32, 1), 1.0);
        data[[0, 16, 0]] = 10.0;
        let points = cfar_detect(&cube(data), 2, 4, 5.0).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].range, 16);
    }

    #[test]
    fn oversized_window_errors() {
        let c = cube(Array3::zeros((2, 16, 2)));
        assert_eq!(
            cfar_detect(&c, 4, 8, 2.0).unwrap_err(),
            BaselineError::WindowTooLarge {
                guard: 4,
                train: 8,
                range_bins: 16
            }
        );
    }

    fn point(range: usize, angle: usize, magnitude: f64) -> RadarPoint {
        RadarPoint {
            doppler: 0,
            range,
            angle,
            magnitude,
            radar_id: RadarId::Horizontal,
        }
    }

    #[test]
    fn empty_input_is_no_cluster() {
        assert_eq!(
            cluster_points(&[], 2.0, 3).unwrap_err(),
            BaselineError::NoCluster { min_pts: 3 }
        );
    }

    #[test]
    fn tight_blob_clusters_to_weighted_mean() {
        let points = vec![
            point(10, 5, 1.0),
            point(11, 5, 2.0),
            point(10, 6, 1.0),
            point(11, 6, 2.0),
            point(12, 5, 2.0),
        ];
        let clusters = cluster_points(&points, 2.0, 3).unwrap();
        assert_eq!(clusters.len(), 1);
        let (r, a) = clusters[0].centroid;
        let expect_r = (10.0 + 22.0 + 10.0 + 22.0 + 24.0) / 8.0;
        let expect_a = (5.0 + 10.0 + 6.0 + 12.0 + 10.0) / 8.0;
        assert!((r - expect_r).abs() < 1e-12);
        assert!((a - expect_a).abs() < 1e-12);
    }

    #[test]
    fn largest_cluster_comes_first() {
        let mut points: Vec<RadarPoint> = (0..5).map(|i| point(10 + i % 2, 5 + i / 2, 1.0)).collect();
        points.extend((0..3).map(|i| point(25 + i % 2, 12, 1.0)));
        let clusters = cluster_points(&points, 2.0, 3).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].points.len(), 5);
        assert!(clusters[0].centroid.0 < 15.0);
    }

    #[test]
    fn clustering_ignores_input_order() {
        let mut points = vec![
            point(10, 5, 1.0),
            point(11, 5, 2.0),
            point(10, 6, 1.5),
            point(11, 6, 0.5),
            point(30, 14, 1.0),
        ];
        let forward = cluster_points(&points, 2.0, 3).unwrap();
        points.reverse();
        let reversed = cluster_points(&points, 2.0, 3).unwrap();
        assert_eq!(forward.len(), reversed.len());
        assert_eq!(forward[0].centroid, reversed[0].centroid);
    }
}
