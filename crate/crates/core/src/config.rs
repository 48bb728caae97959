//! Radar waveform and geometry configuration shared by the simulator, the
//! FFT chain and the coordinate mappings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Window applied along the range and doppler axes before their FFTs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    /// Symmetric Hann window, suppresses sidelobes of strong reflectors.
    #[default]
    Hann,
    /// No windowing. Used by the oracle tests so peaks stay analytic.
    None,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} must be a power of two, got {1}")]
    NotPowerOfTwo(&'static str, usize),
    #[error("num_samples must be divisible by the compression factor")]
    BadCompression,
    #[error("angle_bins ({0}) must be >= num_virtual_antennas ({1})")]
    AngleBinsTooSmall(usize, usize),
    #[error("native range coverage {0:.3} m does not reach max_range_m {1:.3} m")]
    RangeNotCovered(f64, f64),
    #[error("desk_scale_dims {0:?} must be powers of two and <= full dims {1:?}")]
    BadDeskDims([usize; 4], [usize; 4]),
    #[error("resolutions and max range must be positive")]
    NonPositive,
}

/// Waveform, array and binning parameters of one radar of the pair.
///
/// Both radars are identical; the vertical one is the same hardware rotated
/// 90 degrees so its azimuth array measures elevation instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    /// Chirps per frame (slow time). Odd counts are zero-padded to the next
    /// power of two before the doppler FFT.
    pub num_chirps: usize,
    /// ADC samples per chirp (fast time). Must be a power of two.
    pub num_samples: usize,
    /// Virtual antennas of the azimuth array.
    pub num_virtual_antennas: usize,
    /// Angle FFT size; antennas are zero-padded up to this.
    pub angle_bins: usize,
    /// Adjacent-bin sum factor applied to range and doppler after magnitude.
    pub compression: usize,
    /// Range meters per bin after compression.
    pub range_resolution_m: f64,
    /// Doppler meters/second per bin after compression.
    pub doppler_resolution_mps: f64,
    /// Maximum detection range in meters.
    pub max_range_m: f64,
    /// Carrier wavelength in meters.
    pub carrier_wavelength_m: f64,
    /// Antenna spacing as a fraction of the wavelength (0.5 gives an
    /// unambiguous field of view of +-90 degrees in sine space).
    pub antenna_spacing: f64,
    /// Mounting gap between the two radars in meters; the vertical radar is
    /// offset by this along z.
    pub radar_separation_m: f64,
    /// Window for the range and doppler FFTs.
    pub window: WindowFn,
    /// Advertised (D, R, A, E) for reduced-size runs.
    pub desk_scale_dims: [usize; 4],
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl RadarConfig {
    /// Native capture geometry: 255 chirps and 256 samples compressed to 128
    /// doppler and range bins (0.094 m/s, 0.116 m per bin), 8 virtual
    /// antennas padded to 32 angle bins, 77 GHz carrier, radars 5 cm apart.
    ///
    /// The maximum range is the compressed coverage 128 x 0.116 m = 14.85 m
    /// (the nominal 15 m rounded down to what 256 native bins span).
    pub fn full_scale() -> Self {
        Self {
            num_chirps: 255,
            num_samples: 256,
            num_virtual_antennas: 8,
            angle_bins: 32,
            compression: 2,
            range_resolution_m: 0.116,
            doppler_resolution_mps: 0.094,
            max_range_m: 128.0 * 0.116,
            carrier_wavelength_m: 0.003896,
            antenna_spacing: 0.5,
            radar_separation_m: 0.05,
            window: WindowFn::Hann,
            desk_scale_dims: [16, 32, 16, 16],
        }
    }

    /// Reduced geometry for desk-scale runs: cube dims (16, 32, 16, 16),
    /// 0.125 m range bins out to 4 m, +-1 m/s unambiguous doppler.
    pub fn desk_scale() -> Self {
        Self {
            num_chirps: 32,
            num_samples: 64,
            num_virtual_antennas: 8,
            angle_bins: 16,
            compression: 2,
            range_resolution_m: 0.125,
            doppler_resolution_mps: 0.125,
            max_range_m: 4.0,
            carrier_wavelength_m: 0.003896,
            antenna_spacing: 0.5,
            radar_separation_m: 0.05,
            window: WindowFn::Hann,
            desk_scale_dims: [16, 32, 16, 16],
        }
    }

    /// Doppler FFT length: chirps zero-padded to the next power of two.
    pub fn doppler_fft_len(&self) -> usize {
        self.num_chirps.next_power_of_two()
    }

    /// Compressed doppler bins D.
    pub fn doppler_bins(&self) -> usize {
        self.doppler_fft_len() / self.compression
    }

    /// Compressed range bins R.
    pub fn range_bins(&self) -> usize {
        self.num_samples / self.compression
    }

    /// Cube dims (D, R, A) one radar produces.
    pub fn cube_dims(&self) -> (usize, usize, usize) {
        (self.doppler_bins(), self.range_bins(), self.angle_bins)
    }

    /// Range meters per native (pre-compression) bin.
    pub fn native_range_resolution_m(&self) -> f64 {
        self.range_resolution_m / self.compression as f64
    }

    /// Doppler m/s per native (padded, pre-compression) bin.
    pub fn native_doppler_resolution_mps(&self) -> f64 {
        self.doppler_resolution_mps / self.compression as f64
    }

    /// Unambiguous doppler span in m/s (velocities in +-span/2).
    pub fn doppler_span_mps(&self) -> f64 {
        self.doppler_resolution_mps * self.doppler_bins() as f64
    }

    /// Sine-of-angle covered by one angle bin.
    pub fn angle_sine_per_bin(&self) -> f64 {
        1.0 / (self.antenna_spacing * self.angle_bins as f64)
    }

    /// Compressed doppler bin holding zero radial velocity.
    pub fn zero_doppler_bin(&self) -> usize {
        self.doppler_bins() / 2
    }

    /// Angle bin holding boresight (sine 0).
    pub fn center_angle_bin(&self) -> usize {
        self.angle_bins / 2
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.range_resolution_m <= 0.0
            || self.doppler_resolution_mps <= 0.0
            || self.max_range_m <= 0.0
            || self.antenna_spacing <= 0.0
        {
            return Err(ConfigError::NonPositive);
        }
        if !self.num_samples.is_power_of_two() {
            return Err(ConfigError::NotPowerOfTwo("num_samples", self.num_samples));
        }
        if !self.angle_bins.is_power_of_two() {
            return Err(ConfigError::NotPowerOfTwo("angle_bins", self.angle_bins));
        }
        if !self.compression.is_power_of_two() {
            return Err(ConfigError::NotPowerOfTwo("compression", self.compression));
        }
        if self.num_samples % self.compression != 0 {
            return Err(ConfigError::BadCompression);
        }
        if self.angle_bins < self.num_virtual_antennas {
            return Err(ConfigError::AngleBinsTooSmall(
                self.angle_bins,
                self.num_virtual_antennas,
            ));
        }
        let coverage = self.num_samples as f64 * self.native_range_resolution_m();
        if coverage + 1e-9 < self.max_range_m {
            return Err(ConfigError::RangeNotCovered(coverage, self.max_range_m));
        }
        let (d, r, a) = self.cube_dims();
        let full = [d, r, a, a];
        let ok = self
            .desk_scale_dims
            .iter()
            .zip(full.iter())
            .all(|(&want, &have)| want.is_power_of_two() && want <= have);
        if !ok {
            return Err(ConfigError::BadDeskDims(self.desk_scale_dims, full));
        }
        Ok(())
    }
}
