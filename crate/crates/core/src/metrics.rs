//! Detection scoring: OLE matching, AP/AR and localization error.
//!
//! A prediction matches an unclaimed ground-truth target of the same class
//! when the largest absolute bin offset across range, azimuth and elevation
//! is at most the OLE threshold (Chebyshev distance; thresholds 1, 3 and 5
//! are reported). Matching is greedy in descending prediction confidence,
//! each prediction taking the nearest still-free qualifying target.
//!
//! AP is the area under the all-points-interpolated precision/recall curve
//! of the pooled confidence sweep. AR is the recall once every prediction
//! above the candidate floor has been swept in (the curve's final plateau).
//! Both are computed per class and macro-averaged.

use std::collections::HashMap;

use thiserror::Error;

use crate::config::RadarConfig;
use crate::coords::{bins_to_cartesian, Vec3};
use crate::labels::PolarPosition;
use crate::postproc::Detection;
use crate::scalar::Real;
use crate::sim::DroneClass;

/// OLE thresholds the reports print.
pub const OLE_THRESHOLDS: [usize; 3] = [1, 3, 5];
/// Range bands (meters) of the localization report.
pub const RANGE_BANDS_M: [(f64, f64); 5] =
    [(0.0, 3.0), (3.0, 6.0), (6.0, 9.0), (9.0, 12.0), (12.0, 15.0)];

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no ground-truth instances; AP/AR undefined")]
    UndefinedMetric,
}

/// One matched prediction/ground-truth pair.
#[derive(Debug, Clone)]
pub struct MatchedPair {
    pub class: DroneClass,
    /// (dr, da, de) prediction minus ground truth, in bins.
    pub bin_offset: (isize, isize, isize),
    /// Euclidean position error in meters.
    pub cartesian_error_m: f64,
    /// Ground-truth range in meters, used for banding.
    pub gt_range_m: f64,
    pub confidence: f64,
}

/// Outcome of matching one frame at one OLE threshold.
#[derive(Debug, Clone, Default)]
pub struct MatchResult {
    pub true_positives: HashMap<usize, usize>,
    pub false_positives: HashMap<usize, usize>,
    pub false_negatives: HashMap<usize, usize>,
    pub pairs: Vec<MatchedPair>,
    /// Per prediction, in input order: whether it matched.
    pub pred_matched: Vec<bool>,
}

impl MatchResult {
    pub fn tp(&self, class: DroneClass) -> usize {
        *self.true_positives.get(&class.index()).unwrap_or(&0)
    }
    pub fn fp(&self, class: DroneClass) -> usize {
        *self.false_positives.get(&class.index()).unwrap_or(&0)
    }
    pub fn fn_(&self, class: DroneClass) -> usize {
        *self.false_negatives.get(&class.index()).unwrap_or(&0)
    }
}

fn chebyshev(pred: (usize, usize, usize), gt: (usize, usize, usize)) -> usize {
    let d = |a: usize, b: usize| a.abs_diff(b);
    d(pred.0, gt.0).max(d(pred.1, gt.1)).max(d(pred.2, gt.2))
}

fn signed_offset(pred: (usize, usize, usize), gt: (usize, usize, usize)) -> (isize, isize, isize) {
    (
        pred.0 as isize - gt.0 as isize,
        pred.1 as isize - gt.1 as isize,
        pred.2 as isize - gt.2 as isize,
    )
}

/// Greedy one-to-one matching of predictions to ground truth at an OLE
/// threshold. Predictions are visited in descending confidence (ties by
/// bins); each takes the nearest unclaimed same-class target within the
/// threshold.
pub fn match_detections(
    preds: &[Detection],
    gts: &[PolarPosition],
    cfg: &RadarConfig,
    ole: usize,
) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j]
            .confidence
            .partial_cmp(&preds[i].confidence)
            .unwrap()
            .then(preds[i].bins.cmp(&preds[j].bins))
    });

    let gt_bins: Vec<(usize, usize, usize)> = gts.iter().map(|g| g.rounded()).collect();
    let mut gt_taken = vec![false; gts.len()];
    let mut result = MatchResult {
        pred_matched: vec![false; preds.len()],
        ..Default::default()
    };

    for &pi in &order {
        let pred = &preds[pi];
        let candidate = gts
            .iter()
            .enumerate()
            .filter(|(gi, gt)| {
                !gt_taken[*gi]
                    && gt.class == pred.class
                    && chebyshev(pred.bins, gt_bins[*gi]) <= ole
            })
            .min_by(|(gi, _), (gj, _)| {
                let di = chebyshev(pred.bins, gt_bins[*gi]);
                let dj = chebyshev(pred.bins, gt_bins[*gj]);
                di.cmp(&dj).then(gi.cmp(gj))
            })
            .map(|(gi, _)| gi);

        match candidate {
            Some(gi) => {
                gt_taken[gi] = true;
                result.pred_matched[pi] = true;
                *result.true_positives.entry(pred.class.index()).or_insert(0) += 1;

                let gt = &gts[gi];
                let gt_cart = bins_to_cartesian(gt.r, gt.a, gt.e, cfg);
                result.pairs.push(MatchedPair {
                    class: pred.class,
                    bin_offset: signed_offset(pred.bins, gt_bins[gi]),
                    cartesian_error_m: pred.cartesian.distance(&gt_cart),
                    gt_range_m: gt.r * cfg.range_resolution_m,
                    confidence: pred.confidence,
                });
            }
            None => {
                *result.false_positives.entry(pred.class.index()).or_insert(0) += 1;
            }
        }
    }
    for (gi, taken) in gt_taken.iter().enumerate() {
        if !taken {
            *result
                .false_negatives
                .entry(gts[gi].class.index())
                .or_insert(0) += 1;
        }
    }
    result
}

/// AP and AR for one class over many frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassApAr {
    pub ap: f64,
    pub ar: f64,
    pub gt_count: usize,
}

/// Average precision / average recall of a frame set at one OLE threshold.
///
/// Returns per-class values plus their macro average over classes that have
/// ground truth. Errors if no frame has any ground truth at all.
pub fn ap_ar(
    frames: &[(Vec<Detection>, Vec<PolarPosition>)],
    cfg: &RadarConfig,
    ole: usize,
) -> Result<(HashMap<usize, ClassApAr>, f64, f64), MetricsError> {
    let mut per_class = HashMap::new();
    for class in DroneClass::ALL {
        // Pool scored predictions of this class across frames.
        let mut scored: Vec<(f64, bool)> = Vec::new();
        let mut gt_count = 0usize;
        for (preds, gts) in frames {
            let result = match_detections(preds, gts, cfg, ole);
            for (pi, pred) in preds.iter().enumerate() {
                if pred.class == class {
                    scored.push((pred.confidence, result.pred_matched[pi]));
                }
            }
            gt_count += gts.iter().filter(|g| g.class == class).count();
        }
        if gt_count == 0 {
            continue;
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

        let mut tp = 0usize;
        let mut curve: Vec<(f64, f64)> = Vec::with_capacity(scored.len());
        for (i, &(_, matched)) in scored.iter().enumerate() {
            tp += usize::from(matched);
            let recall = tp as f64 / gt_count as f64;
            let precision = tp as f64 / (i + 1) as f64;
            curve.push((recall, precision));
        }
        let ar = curve.last().map_or(0.0, |&(r, _)| r);
        per_class.insert(class.index(), ClassApAr { ap: auc(&curve), ar, gt_count });
    }

    if per_class.is_empty() {
        return Err(MetricsError::UndefinedMetric);
    }
    let n = per_class.len() as f64;
    let map = per_class.values().map(|v| v.ap).sum::<f64>() / n;
    let mar = per_class.values().map(|v| v.ar).sum::<f64>() / n;
    Ok((per_class, map, mar))
}

/// Area under the precision/recall curve with all-points interpolation:
/// precision at recall r is the maximum precision at any recall >= r.
fn auc(curve: &[(f64, f64)]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let mut interp: Vec<(f64, f64)> = curve.to_vec();
    let mut best = 0.0f64;
    for point in interp.iter_mut().rev() {
        best = best.max(point.1);
        point.1 = best;
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for &(recall, precision) in &interp {
        if recall > prev_recall {
            area += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
    }
    area
}

/// Converts detection bins to a Cartesian position in meters.
pub fn polar_bins_to_cartesian(det: &Detection, cfg: &RadarConfig) -> Vec3 {
    bins_to_cartesian(det.bins.0 as f64, det.bins.1 as f64, det.bins.2 as f64, cfg)
}

/// Mean localization error overall and per range band.
#[derive(Debug, Clone, Default)]
pub struct LocalizationReport {
    pub overall_m: Option<f64>,
    /// One entry per band of [`RANGE_BANDS_M`]; `None` when the band saw no
    /// matches.
    pub per_band_m: Vec<Option<f64>>,
    pub match_count: usize,
}

/// Aggregates matched-pair Cartesian errors into the banded report.
pub fn localization_report(pairs: &[MatchedPair]) -> LocalizationReport {
    let mut band_sums = vec![(0.0f64, 0usize); RANGE_BANDS_M.len()];
    let mut total = 0.0;
    for pair in pairs {
        total += pair.cartesian_error_m;
        for (band, &(lo, hi)) in RANGE_BANDS_M.iter().enumerate() {
            if pair.gt_range_m >= lo && pair.gt_range_m < hi {
                band_sums[band].0 += pair.cartesian_error_m;
                band_sums[band].1 += 1;
                break;
            }
        }
    }
    LocalizationReport {
        overall_m: (!pairs.is_empty()).then(|| total / pairs.len() as f64),
        per_band_m: band_sums
            .into_iter()
            .map(|(sum, n)| (n > 0).then(|| sum / n as f64))
            .collect(),
        match_count: pairs.len(),
    }
}

/// Ground-truth polar positions of a scene under `cfg`, skipping targets
/// outside the field of view.
pub fn scene_ground_truth(scene: &crate::sim::Scene, cfg: &RadarConfig) -> Vec<PolarPosition> {
    scene
        .targets
        .iter()
        .filter_map(|t| crate::labels::to_polar_bins(&t.position, t.class, cfg).ok())
        .collect()
}

/// Convenience: evaluation summary across OLE thresholds for report output.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// (ole, per-class, macro AP, macro AR) per threshold in
    /// [`OLE_THRESHOLDS`].
    pub per_ole: Vec<(usize, HashMap<usize, ClassApAr>, f64, f64)>,
    /// Documented mean of macro AP / AR over OLE 1..=5.
    pub mean_ap_1_to_5: f64,
    pub mean_ar_1_to_5: f64,
    /// Localization from OLE=3 matches, per class index then combined.
    pub localization: HashMap<usize, LocalizationReport>,
    pub localization_combined: LocalizationReport,
}

/// Computes the full evaluation report for a set of frames.
pub fn evaluate(
    frames: &[(Vec<Detection>, Vec<PolarPosition>)],
    cfg: &RadarConfig,
) -> Result<EvalReport, MetricsError> {
    let mut per_ole = Vec::new();
    for &ole in &OLE_THRESHOLDS {
        let (classes, map, mar) = ap_ar(frames, cfg, ole)?;
        per_ole.push((ole, classes, map, mar));
    }
    let mut mean_ap = 0.0;
    let mut mean_ar = 0.0;
    for ole in 1..=5 {
        let (_, map, mar) = ap_ar(frames, cfg, ole)?;
        mean_ap += map;
        mean_ar += mar;
    }

    let mut pairs_by_class: HashMap<usize, Vec<MatchedPair>> = HashMap::new();
    let mut all_pairs = Vec::new();
    for (preds, gts) in frames {
        let result = match_detections(preds, gts, cfg, 3);
        for pair in result.pairs {
            pairs_by_class
                .entry(pair.class.index())
                .or_default()
                .push(pair.clone());
            all_pairs.push(pair);
        }
    }
    Ok(EvalReport {
        per_ole,
        mean_ap_1_to_5: mean_ap / 5.0,
        mean_ar_1_to_5: mean_ar / 5.0,
        localization: pairs_by_class
            .into_iter()
            .map(|(k, v)| (k, localization_report(&v)))
            .collect(),
        localization_combined: localization_report(&all_pairs),
    })
}

/// Scales a `Real`-typed confidence to f64 for report output.
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> RadarConfig {
        RadarConfig::desk_scale()
    }

    fn det(class: DroneClass, bins: (usize, usize, usize), conf: f64) -> Detection {
        Detection::new(class, bins, conf).with_cartesian(&desk())
    }

    fn gt(class: DroneClass, r: f64, a: f64, e: f64) -> PolarPosition {
        PolarPosition { r, a, e, class }
    }

    #[test]
    fn exact_prediction_is_tp_at_every_threshold() {
        let preds = vec![det(DroneClass::Small, (10, 8, 8), 0.9)];
        let gts = vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)];
        for ole in OLE_THRESHOLDS {
            let m = match_detections(&preds, &gts, &desk(), ole);
            assert_eq!(m.tp(DroneClass::Small), 1);
            assert_eq!(m.fp(DroneClass::Small), 0);
            assert_eq!(m.fn_(DroneClass::Small), 0);
        }
    }

    #[test]
    fn two_bin_offset_fails_ole1_passes_ole3() {
        let preds = vec![det(DroneClass::Small, (12, 8, 8), 0.9)];
        let gts = vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)];
        let tight = match_detections(&preds, &gts, &desk(), 1);
        assert_eq!((tight.tp(DroneClass::Small), tight.fp(DroneClass::Small)), (0, 1));
        assert_eq!(tight.fn_(DroneClass::Small), 1);
        let loose = match_detections(&preds, &gts, &desk(), 3);
        assert_eq!((loose.tp(DroneClass::Small), loose.fp(DroneClass::Small)), (1, 0));
    }

    #[test]
    fn each_gt_matches_at_most_once() {
        let preds = vec![
            det(DroneClass::Small, (10, 8, 8), 0.9),
            det(DroneClass::Small, (11, 8, 8), 0.8),
        ];
        let gts = vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)];
        let m = match_detections(&preds, &gts, &desk(), 3);
        assert_eq!(m.tp(DroneClass::Small), 1);
        assert_eq!(m.fp(DroneClass::Small), 1);
    }

    #[test]
    fn class_mismatch_never_matches() {
        let preds = vec![det(DroneClass::Large, (10, 8, 8), 0.9)];
        let gts = vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)];
        let m = match_detections(&preds, &gts, &desk(), 5);
        assert_eq!(m.tp(DroneClass::Large), 0);
        assert_eq!(m.fp(DroneClass::Large), 1);
        assert_eq!(m.fn_(DroneClass::Small), 1);
    }

    #[test]
    fn counts_tie_out_with_inputs() {
        let preds = vec![
            det(DroneClass::Small, (5, 8, 8), 0.9),
            det(DroneClass::Small, (25, 8, 8), 0.7),
            det(DroneClass::Small, (15, 2, 2), 0.5),
        ];
        let gts = vec![
            gt(DroneClass::Small, 5.0, 8.0, 8.0),
            gt(DroneClass::Small, 14.0, 2.0, 2.0),
        ];
        let m = match_detections(&preds, &gts, &desk(), 3);
        assert_eq!(m.tp(DroneClass::Small) + m.fn_(DroneClass::Small), gts.len());
        assert_eq!(m.tp(DroneClass::Small) + m.fp(DroneClass::Small), preds.len());
    }

    #[test]
    fn perfect_detector_scores_ap_ar_one() {
        let frames = vec![
            (
                vec![det(DroneClass::Small, (10, 8, 8), 0.9)],
                vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)],
            ),
            (
                vec![det(DroneClass::Large, (20, 8, 8), 0.8)],
                vec![gt(DroneClass::Large, 20.0, 8.0, 8.0)],
            ),
        ];
        let (per_class, map, mar) = ap_ar(&frames, &desk(), 3).unwrap();
        assert_eq!(map, 1.0);
        assert_eq!(mar, 1.0);
        assert_eq!(per_class.len(), 2);
    }

    #[test]
    fn no_predictions_scores_zero() {
        let frames = vec![(vec![], vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)])];
        let (_, map, mar) = ap_ar(&frames, &desk(), 3).unwrap();
        assert_eq!((map, mar), (0.0, 0.0));
    }

    #[test]
    fn no_ground_truth_is_undefined() {
        let frames = vec![(vec![det(DroneClass::Small, (10, 8, 8), 0.9)], vec![])];
        assert_eq!(ap_ar(&frames, &desk(), 3).unwrap_err(), MetricsError::UndefinedMetric);
    }

    #[test]
    fn tp_then_fp_sweep_keeps_ap_one() {
        // One GT; the TP outranks the FP, so the interpolated curve stays at
        // precision 1 up to recall 1 and the recall plateau extends past it.
        let frames = vec![(
            vec![
                det(DroneClass::Small, (10, 8, 8), 0.9),
                det(DroneClass::Small, (25, 14, 14), 0.8),
            ],
            vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)],
        )];
        let (per_class, map, mar) = ap_ar(&frames, &desk(), 3).unwrap();
        assert_eq!(map, 1.0);
        assert_eq!(mar, 1.0);
        assert_eq!(per_class[&0].ar, 1.0);
    }

    #[test]
    fn ap_ar_non_increasing_as_ole_tightens() {
        let frames = vec![
            (
                vec![
                    det(DroneClass::Small, (12, 8, 8), 0.9),
                    det(DroneClass::Small, (25, 4, 4), 0.6),
                ],
                vec![gt(DroneClass::Small, 10.0, 8.0, 8.0)],
            ),
            (
                vec![det(DroneClass::Small, (20, 9, 9), 0.7)],
                vec![
                    gt(DroneClass::Small, 16.0, 9.0, 9.0),
                    gt(DroneClass::Small, 24.0, 6.0, 12.0),
                ],
            ),
        ];
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for ole in [5usize, 3, 1] {
            let (_, map, mar) = ap_ar(&frames, &desk(), ole).unwrap();
            assert!(map <= prev.0 + 1e-12 && mar <= prev.1 + 1e-12, "ole {ole}");
            prev = (map, mar);
        }
    }

    #[test]
    fn boresight_bins_land_on_the_y_axis() {
        let cfg = desk();
        let d = det(DroneClass::Small, (10, 8, 8), 1.0);
        let p = polar_bins_to_cartesian(&d, &cfg);
        assert!(p.x.abs() < 1e-12 && p.z.abs() < 1e-12);
        assert!((p.y - 10.0 * cfg.range_resolution_m).abs() < 1e-12);
    }

    #[test]
    fn round_trip_error_is_bounded_by_half_a_bin() {
        let cfg = desk();
        let mut worst: f64 = 0.0;
        for &(x, y, z) in &[
            (0.3, 2.0, -0.1),
            (-0.5, 1.5, 0.4),
            (0.0, 3.5, 0.0),
            (0.8, 2.8, 0.6),
        ] {
            let p = Vec3::new(x, y, z);
            let polar = crate::labels::to_polar_bins(&p, DroneClass::Small, &cfg).unwrap();
            let (r, a, e) = polar.rounded();
            let back = bins_to_cartesian(r as f64, a as f64, e as f64, &cfg);
            // Each polar coordinate moved by at most half a bin.
            let (rc, ac, ec) =
                crate::coords::cartesian_to_bins_continuous(&p, &cfg).unwrap();
            assert!((rc - r as f64).abs() <= 0.5 + 1e-9);
            assert!((ac - a as f64).abs() <= 0.5 + 1e-9);
            assert!((ec - e as f64).abs() <= 0.5 + 1e-9);
            worst = worst.max(back.distance(&p));
        }
        // Half a bin in each of three polar dims at desk geometry stays
        // comfortably under one range bin of Cartesian error.
        assert!(worst < 2.0 * cfg.range_resolution_m);
    }

    #[test]
    fn azimuth_error_grows_with_range() {
        // The same 1-bin azimuth error costs >= 4x more meters at 12-15 m
        // than at 0-3 m.
        let cfg = RadarConfig::full_scale();
        let near = bins_to_cartesian(13.0, 16.0, 16.0, &cfg)
            .distance(&bins_to_cartesian(13.0, 17.0, 16.0, &cfg));
        let far = bins_to_cartesian(115.0, 16.0, 16.0, &cfg)
            .distance(&bins_to_cartesian(115.0, 17.0, 16.0, &cfg));
        assert!(far >= 4.0 * near, "near {near}, far {far}");
    }

    #[test]
    fn zero_error_matches_report_zero() {
        let pairs = vec![MatchedPair {
            class: DroneClass::Small,
            bin_offset: (0, 0, 0),
            cartesian_error_m: 0.0,
            gt_range_m: 2.0,
            confidence: 1.0,
        }];
        let report = localization_report(&pairs);
        assert_eq!(report.overall_m, Some(0.0));
        assert_eq!(report.per_band_m[0], Some(0.0));
    }

    #[test]
    fn single_match_lands_in_its_band() {
        // Error vector (0.3, 0.4, 0) at 5 m -> 0.5 m mean in band 3-6 m.
        let pairs = vec![MatchedPair {
            class: DroneClass::Small,
            bin_offset: (1, 1, 0),
            cartesian_error_m: 0.5,
            gt_range_m: 5.0,
            confidence: 0.9,
        }];
        let report = localization_report(&pairs);
        assert_eq!(report.per_band_m[1], Some(0.5));
        assert_eq!(report.per_band_m[0], None);
        assert_eq!(report.overall_m, Some(0.5));
    }

    #[test]
    fn empty_pairs_report_absent_means() {
        let report = localization_report(&[]);
        assert_eq!(report.overall_m, None);
        assert!(report.per_band_m.iter().all(Option::is_none));
    }
}
