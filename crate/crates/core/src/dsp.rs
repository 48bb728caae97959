//! Raw frame to magnitude cube: the range/doppler/angle FFT chain.
//!
//! Processing order for one frame:
//!
//! 1. window the fast-time and slow-time axes (Hann unless disabled),
//! 2. range FFT over samples,
//! 3. doppler FFT over chirps, zero-padded to a power of two and fftshifted
//!    so zero velocity sits at the center bin,
//! 4. angle FFT over antennas, zero-padded (8 -> 32 at full scale) and
//!    fftshifted so boresight sits at the center bin,
//! 5. magnitude,
//! 6. adjacent-bin sums compress range and doppler by the compression
//!    factor (2 at full scale: 256 -> 128 bins, halving both resolutions).
//!
//! Compression happens after the magnitude so it sums nonnegative spectral
//! weight; the summed total is preserved exactly.

use ndarray::{Array1, Array3};
use num_complex::Complex;
use thiserror::Error;

use crate::config::{RadarConfig, WindowFn};
use crate::fft::{fft_in_place, fftshift, hann};
use crate::scalar::Real;
use crate::sim::{RadarId, RawFrame};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("frame shape {got:?} does not match config shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
}

/// Physical meaning of cube bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinMetadata {
    pub range_m_per_bin: f64,
    pub doppler_mps_per_bin: f64,
    pub angle_sine_per_bin: f64,
    /// Doppler bin of zero radial velocity (D / 2).
    pub zero_doppler_bin: usize,
    /// Angle bin of boresight (A / 2).
    pub center_angle_bin: usize,
}

impl BinMetadata {
    pub fn from_config(cfg: &RadarConfig) -> Self {
        Self {
            range_m_per_bin: cfg.range_resolution_m,
            doppler_mps_per_bin: cfg.doppler_resolution_mps,
            angle_sine_per_bin: cfg.angle_sine_per_bin(),
            zero_doppler_bin: cfg.zero_doppler_bin(),
            center_angle_bin: cfg.center_angle_bin(),
        }
    }
}

/// Real-valued magnitude cube of one radar, shape (doppler, range, angle).
/// The angle axis is azimuth for the horizontal radar and elevation for the
/// vertical one.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube<T: Real> {
    pub data: Array3<T>,
    pub radar_id: RadarId,
    pub meta: BinMetadata,
}

impl<T: Real> RadarCube<T> {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    /// Bin of the largest magnitude, as (doppler, range, angle).
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = (0, 0, 0);
        let mut best_val = T::neg_infinity();
        for (idx, &v) in self.data.indexed_iter() {
            if v > best_val {
                best_val = v;
                best = idx;
            }
        }
        best
    }
}

/// Sums adjacent groups of `factor` bins: `out[k] = sum_i in[factor*k + i]`.
///
/// # Panics
/// If the input length is not divisible by `factor`.
pub fn compress_bins<T: Real>(spectrum: &[T], factor: usize) -> Vec<T> {
    assert!(factor >= 1 && spectrum.len() % factor == 0);
    spectrum
        .chunks_exact(factor)
        .map(|chunk| chunk.iter().copied().fold(T::zero(), |a, b| a + b))
        .collect()
}

fn window_values<T: Real>(kind: WindowFn, n: usize) -> Option<Array1<T>> {
    match kind {
        WindowFn::Hann => Some(Array1::from(hann::<T>(n))),
        WindowFn::None => None,
    }
}

/// Runs the FFT chain on one raw frame.
pub fn extract_cube<T: Real>(
    frame: &RawFrame<T>,
    cfg: &RadarConfig,
) -> Result<RadarCube<T>, DspError> {
    let expected = (cfg.num_chirps, cfg.num_samples, cfg.num_virtual_antennas);
    let got = frame.samples.dim();
    if got != expected {
        return Err(DspError::ShapeMismatch { expected, got });
    }
    let (chirps, samples, antennas) = got;

    let mut data = frame.samples.clone();
    if let Some(w) = window_values::<T>(cfg.window, samples) {
        for ((_, n, _), v) in data.indexed_iter_mut() {
            *v = *v * w[n];
        }
    }
    if let Some(w) = window_values::<T>(cfg.window, chirps) {
        for ((m, _, _), v) in data.indexed_iter_mut() {
            *v = *v * w[m];
        }
    }

    // Range FFT over fast time (already a power of two, no shift: beat
    // frequencies are nonnegative).
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); samples];
    for m in 0..chirps {
        for a in 0..antennas {
            for n in 0..samples {
                scratch[n] = data[[m, n, a]];
            }
            fft_in_place(&mut scratch);
            for n in 0..samples {
                data[[m, n, a]] = scratch[n];
            }
        }
    }

    // Doppler FFT over slow time, zero-padded, shifted so zero velocity is
    // centered.
    let dop_len = cfg.doppler_fft_len();
    let mut padded = Array3::from_elem(
        (dop_len, samples, antennas),
        Complex::new(T::zero(), T::zero()),
    );
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); dop_len];
    for n in 0..samples {
        for a in 0..antennas {
            scratch.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
            for m in 0..chirps {
                scratch[m] = data[[m, n, a]];
            }
            fft_in_place(&mut scratch);
            let shifted = fftshift(&scratch);
            for (m, v) in shifted.into_iter().enumerate() {
                padded[[m, n, a]] = v;
            }
        }
    }

    // Angle FFT over antennas, zero-padded to the angle bin count, shifted
    // so boresight is centered; then magnitude.
    let angle_bins = cfg.angle_bins;
    let mut magnitude = Array3::zeros((dop_len, samples, angle_bins));
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); angle_bins];
    for m in 0..dop_len {
        for n in 0..samples {
            scratch.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
            for a in 0..antennas {
                scratch[a] = padded[[m, n, a]];
            }
            fft_in_place(&mut scratch);
            let shifted = fftshift(&scratch);
            for (a, v) in shifted.into_iter().enumerate() {
                magnitude[[m, n, a]] = v.norm();
            }
        }
    }

    // Compress doppler and range by adjacent-bin sums.
    let factor = cfg.compression;
    let (dc, rc) = (dop_len / factor, samples / factor);
    let mut compressed = Array3::zeros((dc, samples, angle_bins));
    for a in 0..angle_bins {
        for n in 0..samples {
            let lane: Vec<T> = (0..dop_len).map(|m| magnitude[[m, n, a]]).collect();
            for (m, v) in compress_bins(&lane, factor).into_iter().enumerate() {
                compressed[[m, n, a]] = v;
            }
        }
    }
    let mut cube = Array3::zeros((dc, rc, angle_bins));
    for m in 0..dc {
        for a in 0..angle_bins {
            let lane: Vec<T> = (0..samples).map(|n| compressed[[m, n, a]]).collect();
            for (n, v) in compress_bins(&lane, factor).into_iter().enumerate() {
                cube[[m, n, a]] = v;
            }
        }
    }

    Ok(RadarCube {
        data: cube,
        radar_id: frame.radar_id,
        meta: BinMetadata::from_config(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::Vec3;
    use crate::sim::{simulate_frame, DroneClass, Scene, Target};

    #[test]
    fn zero_frame_gives_zero_cube() {
        let cfg = RadarConfig::desk_scale();
        let frame: RawFrame<f64> =
            simulate_frame(&Scene::empty(0), &cfg, RadarId::Horizontal).unwrap();
        let cube = extract_cube(&frame, &cfg).unwrap();
        assert_eq!(cube.dims(), (16, 32, 16));
        assert!(cube.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_scale_cube_shape_is_128_128_32() {
        let cfg = RadarConfig::full_scale();
        let frame: RawFrame<f32> =
            simulate_frame(&Scene::empty(0), &cfg, RadarId::Horizontal).unwrap();
        let cube = extract_cube(&frame, &cfg).unwrap();
        assert_eq!(cube.dims(), (128, 128, 32));
    }

    #[test]
    fn stationary_boresight_target_peaks_at_analytic_bins() {
        // 5.8 m / 0.116 m per bin = range bin 50, zero-velocity doppler bin
        // 64, boresight angle bin 16.
        let cfg = RadarConfig::full_scale();
        let scene = Scene::new(
            vec![Target::new(
                DroneClass::Small,
                Vec3::new(0.0, 5.8, 0.0),
                Vec3::default(),
            )],
            0.0,
            0,
        );
        let frame: RawFrame<f64> = simulate_frame(&scene, &cfg, RadarId::Horizontal).unwrap();
        let cube = extract_cube(&frame, &cfg).unwrap();
        assert_eq!(cube.argmax(), (64, 50, 16));
    }

    #[test]
    fn receding_target_shifts_doppler_bins() {
        // +0.94 m/s at 0.094 m/s per bin lands 10 bins above center.
        let cfg = RadarConfig::full_scale();
        let scene = Scene::new(
            vec![Target::new(
                DroneClass::Small,
                Vec3::new(0.0, 5.8, 0.0),
                Vec3::new(0.0, 0.94, 0.0),
            )],
            0.0,
            0,
        );
        let frame: RawFrame<f64> = simulate_frame(&scene, &cfg, RadarId::Horizontal).unwrap();
        let cube = extract_cube(&frame, &cfg).unwrap();
        let (d, r, a) = cube.argmax();
        assert_eq!((d, r, a), (74, 50, 16));
    }

    #[test]
    fn off_boresight_target_moves_angle_bin() {
        let cfg = RadarConfig::desk_scale();
        // Direction cosine u = x / range = 0.25 -> angle bin 8 + 0.25 * 8 = 10.
        let range = 2.0f64;
        let x = 0.25 * range;
        let y = (range * range - x * x).sqrt();
        let scene = Scene::new(
            vec![Target::new(
                DroneClass::Small,
                Vec3::new(x, y, 0.0),
                Vec3::default(),
            )],
            0.0,
            0,
        );
        let frame: RawFrame<f64> = simulate_frame(&scene, &cfg, RadarId::Horizontal).unwrap();
        let cube = extract_cube(&frame, &cfg).unwrap();
        let (_, _, a) = cube.argmax();
        assert_eq!(a, 10);
    }

    #[test]
    fn vertical_radar_reads_elevation() {
        let cfg = RadarConfig::desk_scale();
        // v = (z - separation) / range relative to the vertical radar; use a
        // target straight up at v = 0.25 from that origin.
        let range = 2.0;
        let v = 0.25;
        let z = cfg.radar_separation_m + v * range;
        let y = (range * range - (z - cfg.radar_separation_m).powi(2)).sqrt();
        let scene = Scene::new(
            vec![Target::new(
                DroneClass::Small,
                Vec3::new(0.0, y, z),
                Vec3::default(),
            )],
            0.0,
            0,
        );
        let frame: RawFrame<f64> = simulate_frame(&scene, &cfg, RadarId::Vertical).unwrap();
        let cube = extract_cube(&frame, &cfg).unwrap();
        let (_, _, e) = cube.argmax();
        assert_eq!(e, 10);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let cfg = RadarConfig::desk_scale();
        let frame = RawFrame::<f64> {
            samples: Array3::from_elem((4, 4, 4), Complex::new(0.0, 0.0)),
            radar_id: RadarId::Horizontal,
        };
        assert!(matches!(
            extract_cube(&frame, &cfg),
            Err(DspError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn compress_sums_adjacent_pairs() {
        assert_eq!(compress_bins(&[1.0, 1.0, 1.0, 1.0], 2), vec![2.0, 2.0]);
    }

    #[test]
    fn compress_maps_impulse_bin_7_to_3() {
        let mut lane = vec![0.0f64; 256];
        lane[7] = 1.0;
        let out = compress_bins(&lane, 2);
        assert_eq!(out.len(), 128);
        assert_eq!(out[3], 1.0);
        assert_eq!(out.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn compress_preserves_total() {
        let lane: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let total: f64 = lane.iter().sum();
        let out = compress_bins(&lane, 2);
        assert!((out.iter().sum::<f64>() - total).abs() < 1e-12);
    }
}
