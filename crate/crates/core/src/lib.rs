//! Dual mmWave radar cube detection pipeline.
//!
//! Implements the full desk-scale processing chain for detecting, classifying
//! and localizing small flying targets with a pair of non-cascaded FMCW radars,
//! one mounted horizontally (azimuth array) and one rotated 90 degrees
//! (elevation array):
//!
//! ```text
//! scene ──> raw ADC frames ──> FFT cubes ──> 4D fusion ──> 3D conv net ──> LNMS ──> detections
//!  (sim)        (sim)            (dsp)        (fusion)       (model)     (postproc)   (metrics)
//! ```
//!
//! All numeric kernels are generic over the scalar type via [`Real`]; the
//! production pipeline runs in `f32` while oracle and gradient checks run the
//! same code paths in `f64`. Concrete aliases for both are exported at the
//! crate root.

pub mod baseline;
pub mod config;
pub mod coords;
pub mod dsp;
pub mod fft;
pub mod fusion;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod postproc;
pub mod scenario;
pub mod sim;
pub mod store;

mod scalar;

pub use config::{RadarConfig, WindowFn};
pub use coords::Vec3;
pub use scalar::Real;
pub use sim::{DroneClass, RadarId, Scene, Target};

/// Single-precision pipeline aliases (production / on-disk precision).
pub type RawFrame32 = sim::RawFrame<f32>;
pub type RadarCube32 = dsp::RadarCube<f32>;
pub type FusedCube32 = fusion::FusedCube<f32>;
pub type ConfidenceCube32 = labels::ConfidenceCube<f32>;
pub type Weights32 = model::Weights<f32>;

/// Double-precision aliases (oracle tests, gradient checks).
pub type RawFrame64 = sim::RawFrame<f64>;
pub type RadarCube64 = dsp::RadarCube<f64>;
pub type FusedCube64 = fusion::FusedCube<f64>;
pub type ConfidenceCube64 = labels::ConfidenceCube<f64>;
pub type Weights64 = model::Weights<f64>;
