//! Near-field MIMO synthetic aperture radar toolkit for irregular,
//! multi-planar scanning geometries.
//!
//! The crate simulates frequency-domain multistatic echoes of point-scatterer
//! scenes, projects irregular multistatic samples onto a virtual planar
//! monostatic aperture by removing a per-channel residual phase, and forms
//! images with a wavenumber-domain range migration algorithm (uniform FFT or
//! Gaussian-gridding NUFFT front end, Stolt resampling). An exact
//! back-projection reconstructor serves as the reference.
//!
//! ```
//! use mpms_core::geometry::{expand_channels, MimoArrayLayout, RadarPose, Vec3};
//!
//! let layout = MimoArrayLayout::monostatic();
//! let poses = vec![RadarPose::new(Vec3::new(0.0, 0.0, 0.0), 0)];
//! let channels = expand_channels(&layout, &poses, 0.0).unwrap();
//! assert_eq!(channels.len(), 1);
//! ```

pub mod compensation;
pub mod echo;
pub mod error;
pub mod format;
pub mod geometry;
pub mod metrics;
pub mod nufft;
pub mod reconstruct;
pub mod scenes;
mod spectral;

pub use num_complex::Complex64;

pub use compensation::{compensate_to_planar, residual_phase_term, CompensationReport, PlanarSamples};
pub use echo::{synthesize_echo, EchoSet, FrequencyGrid, Scatterer, TargetScene};
pub use error::{Error, Result};
pub use geometry::{
    expand_channels, generate_trajectory, ChannelGeometry, MimoArrayLayout, RadarPose,
    TrajectorySpec, Vec3, ZPolicy,
};
pub use metrics::{image_correlation, peak_locations, psf_profile, theoretical_resolution, PsfReport};
pub use reconstruct::{
    bpa_reconstruct, reconstruct_pipeline, rma_reconstruct, rma_reconstruct_2d, ImageGrid,
    Method, ReflectivityVolume, RmaParams, UniformAxis,
};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
