//! Projection of irregular multi-planar multistatic samples onto a virtual
//! planar monostatic aperture.
//!
//! Each channel carries a residual path length `β = 2 d_z + (d_x² + d_y²)/(4 Z₀)`
//! relative to its midpoint element on the reference plane. Multiplying the
//! samples by `e^{+j k β}` removes it, after which the data look like a
//! monostatic scan over `(x', y', z0)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::echo::{side, wavenumber, EchoSet, FrequencyGrid};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ChannelGeometry, Vec3};

/// Phase convention shared by synthesis, compensation and imaging: a path of
/// length `R` at wavenumber `k` contributes `e^{PHASE_SIGN · j k R}`.
pub const PHASE_SIGN: f64 = -1.0;

/// Default fraction of the reference range beyond which a channel's plane
/// offset is flagged.
pub const DEFAULT_DZ_WARN_FRACTION: f64 = 0.25;

/// Virtual monostatic samples on the plane `z = z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSamples {
    /// `(x', y')` per sample row (m).
    pub positions: Vec<[f64; 2]>,
    pub z0: f64,
    pub grid: FrequencyGrid,
    /// `n_positions * n_frequencies`, position-major.
    pub samples: Vec<Complex64>,
    pub pulse_spectrum: Vec<Complex64>,
}

impl PlanarSamples {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.positions.len() * self.grid.len() {
            return invalid("planar sample matrix does not match positions x frequencies");
        }
        if self.pulse_spectrum.len() != self.grid.len() {
            return invalid("pulse spectrum length differs from the frequency grid");
        }
        if !self.z0.is_finite() || self.positions.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return invalid("planar positions and z0 must be finite");
        }
        Ok(())
    }

    pub fn n_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let nf = self.grid.len();
        &self.samples[i * nf..(i + 1) * nf]
    }

    /// Views the planar data as a monostatic echo at `(x', y', z0)`.
    pub fn to_echo(&self) -> Result<EchoSet> {
        let channels = self
            .positions
            .iter()
            .map(|p| {
                let v = Vec3::new(p[0], p[1], self.z0);
                ChannelGeometry::from_elements(v, v, self.z0)
            })
            .collect::<Result<Vec<_>>>()?;
        EchoSet::new(channels, self.grid.clone(), self.samples.clone(), self.pulse_spectrum.clone())
    }
}

/// Channels whose plane offset is large relative to the reference range.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompensationReport {
    pub flagged_channels: Vec<usize>,
    pub max_abs_dz: f64,
    pub warnings: Vec<String>,
}

/// Residual path length `β` (m).
///
/// `reference_range` is the signed distance `Z₀` from the scene reference
/// point to the plane along z (plane minus scene). The plane term takes the
/// sign of `reference_range`, so a positive range gives exactly
/// `2 d_z + (d_x² + d_y²)/(4 Z₀)`.
pub fn residual_phase_term(d_x: f64, d_y: f64, d_z: f64, reference_range: f64) -> Result<f64> {
    let baseline2 = d_x * d_x + d_y * d_y;
    if baseline2 == 0.0 {
        return Ok(2.0 * d_z * side(reference_range));
    }
    if reference_range == 0.0 || !reference_range.is_finite() {
        return Err(Error::SingularGeometry(
            "reference range is zero while the channel has a baseline".into(),
        ));
    }
    Ok(2.0 * d_z * side(reference_range) + baseline2 / (4.0 * reference_range.abs()))
}

/// Removes the residual phase of every channel.
///
/// `z0` must match the reference plane the channels were expanded with;
/// `scene_ref_z` is the depth of the scene reference point (normally the
/// center of the image volume).
pub fn compensate_to_planar(
    echo: &EchoSet,
    z0: f64,
    scene_ref_z: f64,
) -> Result<(PlanarSamples, CompensationReport)> {
    compensate_to_planar_with(echo, z0, scene_ref_z, DEFAULT_DZ_WARN_FRACTION)
}

pub fn compensate_to_planar_with(
    echo: &EchoSet,
    z0: f64,
    scene_ref_z: f64,
    dz_warn_fraction: f64,
) -> Result<(PlanarSamples, CompensationReport)> {
    echo.validate()?;
    check_reference_plane(echo, z0)?;
    let range = z0 - scene_ref_z;
    let betas = echo
        .channels
        .iter()
        .map(|c| residual_phase_term(c.d_x, c.d_y, c.d_z, range))
        .collect::<Result<Vec<f64>>>()?;

    let mut report = CompensationReport::default();
    for (l, c) in echo.channels.iter().enumerate() {
        report.max_abs_dz = report.max_abs_dz.max(c.d_z.abs());
        if c.d_z.abs() > dz_warn_fraction * range.abs() {
            report.flagged_channels.push(l);
        }
    }
    if !report.flagged_channels.is_empty() {
        report.warnings.push(format!(
            "{} channels have |d_z| above {:.0}% of the {:.3} m reference range; focusing degrades",
            report.flagged_channels.len(),
            dz_warn_fraction * 100.0,
            range.abs()
        ));
    }

    let samples = apply_path_correction(echo, &betas);
    let planar = PlanarSamples {
        positions: virtual_positions(&echo.channels),
        z0,
        grid: echo.grid.clone(),
        samples,
        pulse_spectrum: echo.pulse_spectrum.clone(),
    };
    Ok((planar, report))
}

/// Maps samples to midpoints without any phase correction (the baseline
/// that ignores both the plane offsets and the multistatic terms).
pub fn uncompensated_planar(echo: &EchoSet, z0: f64) -> Result<PlanarSamples> {
    echo.validate()?;
    check_reference_plane(echo, z0)?;
    Ok(PlanarSamples {
        positions: virtual_positions(&echo.channels),
        z0,
        grid: echo.grid.clone(),
        samples: echo.samples.clone(),
        pulse_spectrum: echo.pulse_spectrum.clone(),
    })
}

/// Multiplies channel `l` by `e^{-PHASE_SIGN · j k β_l}`.
pub fn apply_path_correction(echo: &EchoSet, betas: &[f64]) -> Vec<Complex64> {
    let k: Vec<f64> = echo.grid.frequencies().iter().map(|&f| wavenumber(f)).collect();
    let nf = k.len();
    let mut out = echo.samples.clone();
    out.par_chunks_mut(nf).zip(betas.par_iter()).for_each(|(row, &beta)| {
        if beta == 0.0 {
            return;
        }
        for (s, &ki) in row.iter_mut().zip(&k) {
            *s *= Complex64::cis(-PHASE_SIGN * ki * beta);
        }
    });
    out
}

fn virtual_positions(channels: &[ChannelGeometry]) -> Vec<[f64; 2]> {
    channels.iter().map(|c| [c.virtual_pos.x, c.virtual_pos.y]).collect()
}

fn check_reference_plane(echo: &EchoSet, z0: f64) -> Result<()> {
    if !z0.is_finite() {
        return invalid("z0 must be finite");
    }
    if let Some(c) = echo.channels.iter().find(|c| (c.z0() - z0).abs() > 1e-12) {
        return invalid(format!(
            "channel reference plane {} differs from z0 = {}",
            c.z0(),
            z0
        ));
    }
    Ok(())
}
