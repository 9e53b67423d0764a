//! Wavenumber-domain imaging of planar monostatic samples.
//!
//! The pipeline takes a 2-D spatial spectrum per frequency, applies the
//! matched filter `k_z e^{-j k_z (Z₀ - z_ref)} / P(f)`, resamples each
//! `(k_x, k_y)` column from uniform `k` onto uniform `k_z` under
//! `k_z² = 4k² - k_x² - k_y²`, and inverts onto the image axes with chirp-z
//! transforms. `z_ref` is the center of the image volume; pulling the range
//! phase towards it keeps the resampled columns slowly varying.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{ImageGrid, ReflectivityVolume, UniformAxis};
use super::StageTiming;
use crate::compensation::PlanarSamples;
use crate::error::{invalid, Error, Result};
use crate::nufft::{nufft2_type1, NufftPlan, Type2};
use crate::spectral::{centered_k, fft_axis, transform_axis, AxisTransform};
use crate::SPEED_OF_LIGHT;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Positions closer than this (m) are treated as the same raster line.
const RASTER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoltMethod {
    /// Linear interpolation along `k`.
    #[default]
    Linear,
    /// Band-limited interpolation with a type-2 NUFFT.
    Nufft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    /// Separable Hann taper on `k_x` and `k_y`.
    RaisedCosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvanescentPolicy {
    #[default]
    ZeroFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmaParams {
    /// Padding factor for the x, y and k_z axes.
    pub zero_pad: [usize; 3],
    pub stolt: StoltMethod,
    pub evanescent: EvanescentPolicy,
    pub window: Window,
    /// Nominal raster step for non-uniform positions; defaults to a quarter
    /// of the shortest wavelength.
    pub spatial_step_m: Option<f64>,
    /// Restricts the spectral support to `|k_xy| <= 2 k_max sin(θ)`.
    pub max_angle_deg: Option<f64>,
    pub nufft_tolerance: f64,
}

impl Default for RmaParams {
    fn default() -> Self {
        Self {
            zero_pad: [2, 2, 2],
            stolt: StoltMethod::Linear,
            evanescent: EvanescentPolicy::ZeroFill,
            window: Window::None,
            spatial_step_m: None,
            max_angle_deg: None,
            nufft_tolerance: 1e-6,
        }
    }
}

impl RmaParams {
    pub fn validate(&self) -> Result<()> {
        if self.zero_pad.contains(&0) {
            return invalid("zero_pad factors must be at least 1");
        }
        if !(self.nufft_tolerance > 0.0 && self.nufft_tolerance < 1.0) {
            return invalid("nufft_tolerance must lie in (0, 1)");
        }
        if let Some(s) = self.spatial_step_m {
            if !(s > 0.0 && s.is_finite()) {
                return invalid("spatial_step_m must be positive");
            }
        }
        if let Some(a) = self.max_angle_deg {
            if !(a > 0.0 && a <= 90.0) {
                return invalid("max_angle_deg must lie in (0, 90]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RmaReport {
    pub warnings: Vec<String>,
    pub stages: Vec<StageTiming>,
    /// `[n_kx, n_ky, n_kz]` of the resampled spectrum.
    pub spectrum_dims: [usize; 3],
    /// Whether the positions formed a complete uniform raster (FFT path).
    pub uniform_positions: bool,
}

/// DC-centered spatial spectrum, `[n_kx × n_ky × n_f]`.
struct SpatialSpectrum {
    data: Vec<Complex64>,
    nkx: usize,
    nky: usize,
    lx: f64,
    ly: f64,
    /// Raster center; the aliasing period is centered on it.
    center: [f64; 2],
    uniform: bool,
}

impl SpatialSpectrum {
    fn kx(&self, q: usize) -> f64 {
        centered_k(q, self.nkx, self.lx)
    }

    fn ky(&self, q: usize) -> f64 {
        centered_k(q, self.nky, self.ly)
    }

    fn kappa_max(&self) -> f64 {
        let kx = (self.nkx / 2) as f64 * 2.0 * PI / self.lx;
        let ky = (self.nky / 2) as f64 * 2.0 * PI / self.ly;
        kx.hypot(ky)
    }

    fn window(&self, qx: usize, qy: usize, window: Window) -> f64 {
        match window {
            Window::None => 1.0,
            Window::RaisedCosine => {
                let hann = |q: usize, n: usize| {
                    let u = (q as f64 - (n / 2) as f64) / (n / 2).max(1) as f64;
                    0.5 + 0.5 * (PI * u).cos()
                };
                hann(qx, self.nkx) * hann(qy, self.nky)
            }
        }
    }
}

struct Raster {
    x: UniformAxis,
    y: UniformAxis,
    /// `(ix, iy)` per position.
    cells: Vec<(usize, usize)>,
}

fn unique_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= RASTER_TOL);
    v
}

/// Detects a complete, uniformly spaced `n_x × n_y` raster.
fn detect_raster(positions: &[[f64; 2]]) -> Option<Raster> {
    let xs = unique_sorted(positions.iter().map(|p| p[0]).collect());
    let ys = unique_sorted(positions.iter().map(|p| p[1]).collect());
    let (nx, ny) = (xs.len(), ys.len());
    if nx < 2 || ny < 2 || nx * ny != positions.len() {
        return None;
    }
    let axis = |v: &[f64]| {
        let step = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
        let ok = v.iter().enumerate().all(|(i, &c)| (c - (v[0] + i as f64 * step)).abs() <= RASTER_TOL);
        ok.then_some(UniformAxis {
            start: v[0],
            step,
            len: v.len(),
        })
    };
    let (x, y) = (axis(&xs)?, axis(&ys)?);
    let mut seen = vec![false; nx * ny];
    let mut cells = Vec::with_capacity(positions.len());
    for p in positions {
        let ix = ((p[0] - x.start) / x.step).round() as usize;
        let iy = ((p[1] - y.start) / y.step).round() as usize;
        if ix >= nx || iy >= ny || std::mem::replace(&mut seen[ix * ny + iy], true) {
            return None;
        }
        cells.push((ix, iy));
    }
    Some(Raster { x, y, cells })
}

fn spatial_spectrum(planar: &PlanarSamples, params: &RmaParams) -> Result<SpatialSpectrum> {
    match detect_raster(&planar.positions) {
        Some(r) => Ok(raster_spectrum(planar, params, &r)),
        None => nonuniform_spectrum(planar, params),
    }
}

fn raster_spectrum(planar: &PlanarSamples, params: &RmaParams, r: &Raster) -> SpatialSpectrum {
    let nf = planar.grid.len();
    let nkx = params.zero_pad[0] * r.x.len;
    let nky = params.zero_pad[1] * r.y.len;
    let mut buf = vec![ZERO; nkx * nky * nf];
    for (m, &(ix, iy)) in r.cells.iter().enumerate() {
        let base = (ix * nky + iy) * nf;
        buf[base..base + nf].copy_from_slice(planar.row(m));
    }
    let dims = [nkx, nky, nf];
    fft_axis(&mut buf, dims, 0);
    fft_axis(&mut buf, dims, 1);

    let (lx, ly) = (nkx as f64 * r.x.step, nky as f64 * r.y.step);
    let mut spec = SpatialSpectrum {
        data: vec![ZERO; nkx * nky * nf],
        nkx,
        nky,
        lx,
        ly,
        center: [r.x.center(), r.y.center()],
        uniform: true,
    };
    // FFT bin p holds wavenumber p (mod n); move it to the centered slot and
    // restore the absolute origin.
    for qx in 0..nkx {
        let px = (qx + nkx - nkx / 2) % nkx;
        for qy in 0..nky {
            let py = (qy + nky - nky / 2) % nky;
            let shift = Complex64::cis(-(spec.kx(qx) * r.x.start + spec.ky(qy) * r.y.start));
            let src = (px * nky + py) * nf;
            let dst = (qx * nky + qy) * nf;
            for i in 0..nf {
                spec.data[dst + i] = buf[src + i] * shift;
            }
        }
    }
    spec
}

fn nonuniform_spectrum(planar: &PlanarSamples, params: &RmaParams) -> Result<SpatialSpectrum> {
    let nf = planar.grid.len();
    let f_max = planar.grid.frequencies()[nf - 1];
    let step = params.spatial_step_m.unwrap_or(SPEED_OF_LIGHT / f_max / 4.0);
    let bounds = |axis: usize| {
        planar.positions.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[axis]), hi.max(p[axis]))
        })
    };
    // An axis the aperture never moves along keeps only its k = 0 column.
    let size = |(lo, hi): (f64, f64), pad: usize| {
        if hi - lo <= RASTER_TOL {
            return (1, 0.5 * (lo + hi));
        }
        let mut n = pad * (((hi - lo) / step).ceil() as usize + 1);
        n += n % 2;
        (n, 0.5 * (lo + hi))
    };
    let (nkx, cx) = size(bounds(0), params.zero_pad[0]);
    let (nky, cy) = size(bounds(1), params.zero_pad[1]);
    let (lx, ly) = (nkx as f64 * step, nky as f64 * step);

    let plan = NufftPlan::new(params.nufft_tolerance, (nkx, nky))?;
    let rel: Vec<[f64; 2]> = planar.positions.iter().map(|p| [p[0] - cx, p[1] - cy]).collect();
    let planes = (0..nf)
        .into_par_iter()
        .map(|i| {
            let values: Vec<Complex64> = (0..rel.len()).map(|m| planar.row(m)[i]).collect();
            nufft2_type1(&rel, &values, &plan, (lx, ly))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut spec = SpatialSpectrum {
        data: vec![ZERO; nkx * nky * nf],
        nkx,
        nky,
        lx,
        ly,
        center: [cx, cy],
        uniform: false,
    };
    for qx in 0..nkx {
        for qy in 0..nky {
            let shift = Complex64::cis(-(spec.kx(qx) * cx + spec.ky(qy) * cy));
            let dst = (qx * nky + qy) * nf;
            for (i, plane) in planes.iter().enumerate() {
                spec.data[dst + i] = plane[qx * nky + qy] * shift;
            }
        }
    }
    Ok(spec)
}

/// Per-reconstruction constants of the matched filter.
struct Filter {
    k: Vec<f64>,
    dk: f64,
    inv_pulse: Vec<Complex64>,
    /// `+1` when the scene lies on the +z side of the aperture.
    sigma: f64,
    /// `Z₀ - z_ref`.
    range: f64,
    kappa_limit: f64,
}

impl Filter {
    fn new(planar: &PlanarSamples, z_ref: f64, params: &RmaParams) -> Result<Self> {
        let k = planar.grid.wavenumbers();
        if k.len() < 2 {
            return invalid("wavenumber imaging needs at least two frequencies");
        }
        if planar.pulse_spectrum.iter().any(|p| p.norm() == 0.0) {
            return invalid("pulse spectrum has zero bins; the matched filter cannot divide by them");
        }
        let range = planar.z0 - z_ref;
        if range == 0.0 {
            return Err(Error::SingularGeometry(
                "image reference depth lies on the aperture plane".into(),
            ));
        }
        let k_max = k[k.len() - 1];
        let kappa_limit = match params.max_angle_deg {
            Some(a) => 2.0 * k_max * a.to_radians().sin(),
            None => f64::INFINITY,
        };
        Ok(Self {
            dk: (k[k.len() - 1] - k[0]) / (k.len() - 1) as f64,
            inv_pulse: planar.pulse_spectrum.iter().map(|p| p.inv()).collect(),
            sigma: if range < 0.0 { 1.0 } else { -1.0 },
            range,
            kappa_limit,
            k,
        })
    }

    /// Filtered column; samples with `k_z² <= 0` (or outside the angular
    /// limit) are zero.
    fn apply(&self, column: &[Complex64], kappa2: f64, weight: f64, out: &mut [Complex64]) {
        let outside = kappa2.sqrt() > self.kappa_limit;
        for (i, (o, s)) in out.iter_mut().zip(column).enumerate() {
            let kz2 = 4.0 * self.k[i] * self.k[i] - kappa2;
            *o = if kz2 <= 0.0 || outside {
                ZERO
            } else {
                let kz = kz2.sqrt();
                s * self.inv_pulse[i] * Complex64::cis(-self.sigma * kz * self.range) * (kz * weight)
            };
        }
    }
}

/// Uniform `k_z` samples `lo + j * step`.
#[derive(Debug, Clone, Copy)]
struct KzAxis {
    lo: f64,
    step: f64,
    len: usize,
}

impl KzAxis {
    fn new(filter: &Filter, kappa_max: f64, pad: usize) -> Self {
        let (k_min, k_max) = (filter.k[0], filter.k[filter.k.len() - 1]);
        let kappa = kappa_max.min(filter.kappa_limit);
        let lo = (4.0 * k_min * k_min - kappa * kappa).max(0.0).sqrt();
        let hi = 2.0 * k_max;
        let step = 2.0 * filter.dk / pad as f64;
        Self {
            lo,
            step,
            len: ((hi - lo) / step).ceil() as usize + 1,
        }
    }
}

enum Resampler {
    Linear,
    Nufft {
        type2: Type2,
        fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    },
}

impl Resampler {
    fn new(method: StoltMethod, nf: usize, tolerance: f64) -> Result<Self> {
        Ok(match method {
            StoltMethod::Linear => Resampler::Linear,
            StoltMethod::Nufft => {
                let plan = NufftPlan::new(tolerance, (nf, 1))?;
                Resampler::Nufft {
                    type2: Type2::new(nf, &plan),
                    fft: rustfft::FftPlanner::new().plan_fft_forward(nf),
                }
            }
        })
    }

    /// Resamples a filtered column onto `kz`; targets outside the measured
    /// band are zero.
    fn column(&self, filtered: &[Complex64], filter: &Filter, kappa2: f64, kz: KzAxis, out: &mut [Complex64]) {
        let nf = filtered.len();
        let last = (nf - 1) as f64;
        let k0 = filter.k[0];
        // fractional sample index of each target
        let pos = |j: usize| {
            let kzj = kz.lo + j as f64 * kz.step;
            let t = (0.5 * (kzj * kzj + kappa2).sqrt() - k0) / filter.dk;
            if (-1e-9..=last + 1e-9).contains(&t) {
                Some(t.clamp(0.0, last))
            } else {
                None
            }
        };
        match self {
            Resampler::Linear => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = match pos(j) {
                        Some(t) => {
                            let i0 = (t.floor() as usize).min(nf - 2);
                            let f = t - i0 as f64;
                            filtered[i0] * (1.0 - f) + filtered[i0 + 1] * f
                        }
                        None => ZERO,
                    };
                }
            }
            Resampler::Nufft { type2, fft } => {
                let mut g = filtered.to_vec();
                fft.process(&mut g);
                let spectrum: Vec<Complex64> =
                    (0..nf).map(|q| g[(q + nf - nf / 2) % nf] / nf as f64).collect();
                let mut slots = Vec::new();
                let mut theta = Vec::new();
                for j in 0..out.len() {
                    out[j] = ZERO;
                    if let Some(t) = pos(j) {
                        let a = 2.0 * PI * t / nf as f64;
                        slots.push(j);
                        theta.push(if a > PI { a - 2.0 * PI } else { a });
                    }
                }
                let values = type2.eval(&spectrum, &theta).expect("targets are wrapped into the band");
                for (j, v) in slots.into_iter().zip(values) {
                    out[j] = v;
                }
            }
        }
    }
}

fn check_planar(planar: &PlanarSamples) -> Result<()> {
    planar.validate()?;
    if planar.positions.is_empty() {
        return invalid("no planar samples to image");
    }
    Ok(())
}

fn check_field_of_view(axis: &UniformAxis, center: f64, period: f64, name: &str, warnings: &mut Vec<String>) {
    let half = 0.5 * period;
    if axis.start < center - half || axis.stop() > center + half {
        warnings.push(format!(
            "{name} axis [{:.4}, {:.4}] m exceeds the alias-free window [{:.4}, {:.4}] m",
            axis.start,
            axis.stop(),
            center - half,
            center + half
        ));
    }
}

fn timed<T>(stages: &mut Vec<StageTiming>, name: &str, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    stages.push(StageTiming {
        stage: name.to_string(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    out
}

/// Forms a volume on `grid` from planar monostatic samples.
pub fn rma_reconstruct(
    planar: &PlanarSamples,
    grid: &ImageGrid,
    params: &RmaParams,
) -> Result<(ReflectivityVolume, RmaReport)> {
    check_planar(planar)?;
    grid.validate()?;
    params.validate()?;
    let z_ref = grid.z.center();
    let filter = Filter::new(planar, z_ref, params)?;
    let resampler = Resampler::new(params.stolt, planar.grid.len(), params.nufft_tolerance)?;
    let mut report = RmaReport::default();

    let spec = timed(&mut report.stages, "spatial_fft", || spatial_spectrum(planar, params))?;
    let (nkx, nky, nf) = (spec.nkx, spec.nky, planar.grid.len());
    let kz = KzAxis::new(&filter, spec.kappa_max(), params.zero_pad[2]);

    // Each column is resampled and taken straight to the z axis, so the
    // full k_z cube never exists in memory.
    let tz = AxisTransform::new(
        filter.sigma * kz.lo,
        filter.sigma * kz.step,
        kz.len,
        grid.z.start - z_ref,
        grid.z.step,
        grid.z.len,
    );
    let nz = grid.z.len;
    let columns = timed(&mut report.stages, "stolt", || {
        let mut out = vec![ZERO; nkx * nky * nz];
        out.par_chunks_mut(nz).enumerate().for_each_init(
            || (vec![ZERO; nf], vec![ZERO; tz.work_len()]),
            |(filtered, work), (col, dst)| {
                let (qx, qy) = (col / nky, col % nky);
                let kappa2 = spec.kx(qx).powi(2) + spec.ky(qy).powi(2);
                let w = spec.window(qx, qy, params.window);
                filter.apply(&spec.data[col * nf..(col + 1) * nf], kappa2, w, filtered);
                resampler.column(filtered, &filter, kappa2, kz, &mut work[..kz.len]);
                tz.apply_in_place(work);
                dst.copy_from_slice(&work[..nz]);
            },
        );
        out
    });

    let voxels = timed(&mut report.stages, "inverse_fft", || {
        let ty = inverse_axis(nky, spec.ly, &grid.y);
        let (a, dims) = transform_axis(&columns, [nkx, nky, nz], 1, &ty);
        let tx = inverse_axis(nkx, spec.lx, &grid.x);
        let (mut a, _) = transform_axis(&a, dims, 0, &tx);
        let norm = 1.0 / (nkx * nky * kz.len) as f64;
        a.iter_mut().for_each(|v| *v *= norm);
        a
    });

    check_field_of_view(&grid.x, spec.center[0], spec.lx, "x", &mut report.warnings);
    check_field_of_view(&grid.y, spec.center[1], spec.ly, "y", &mut report.warnings);
    check_field_of_view(&grid.z, z_ref, 2.0 * PI / kz.step, "z", &mut report.warnings);
    report.spectrum_dims = [nkx, nky, kz.len];
    report.uniform_positions = spec.uniform;
    Ok((ReflectivityVolume::new(*grid, voxels)?, report))
}

fn inverse_axis(n: usize, extent: f64, axis: &UniformAxis) -> AxisTransform {
    AxisTransform::new(centered_k(0, n, extent), 2.0 * PI / extent, n, axis.start, axis.step, axis.len)
}

/// Single x-y plane at depth `z_slice`.
///
/// The `k_z` integral is evaluated exactly at the measured wavenumbers, so
/// no Stolt resampling is involved.
pub fn rma_reconstruct_2d(
    planar: &PlanarSamples,
    x_axis: &UniformAxis,
    y_axis: &UniformAxis,
    z_slice: f64,
    params: &RmaParams,
) -> Result<(ReflectivityVolume, RmaReport)> {
    check_planar(planar)?;
    params.validate()?;
    let grid = ImageGrid::new(*x_axis, *y_axis, UniformAxis::single(z_slice))?;
    let filter = Filter::new(planar, z_slice, params)?;
    let mut report = RmaReport::default();

    let spec = timed(&mut report.stages, "spatial_fft", || spatial_spectrum(planar, params))?;
    let (nkx, nky, nf) = (spec.nkx, spec.nky, planar.grid.len());

    let plane = timed(&mut report.stages, "kz_sum", || {
        let mut out = vec![ZERO; nkx * nky];
        out.par_iter_mut().enumerate().for_each(|(col, o)| {
            let (qx, qy) = (col / nky, col % nky);
            let kappa2 = spec.kx(qx).powi(2) + spec.ky(qy).powi(2);
            if kappa2.sqrt() > filter.kappa_limit {
                return;
            }
            let w = spec.window(qx, qy, params.window);
            let column = &spec.data[col * nf..(col + 1) * nf];
            // dk_z = 4k / k_z dk turns the k_z weight into k
            for (i, s) in column.iter().enumerate() {
                let k = filter.k[i];
                let kz2 = 4.0 * k * k - kappa2;
                if kz2 > 0.0 {
                    let ph = Complex64::cis(-filter.sigma * kz2.sqrt() * filter.range);
                    *o += s * filter.inv_pulse[i] * ph * (k * w);
                }
            }
        });
        out
    });

    let voxels = timed(&mut report.stages, "inverse_fft", || {
        let ty = inverse_axis(nky, spec.ly, y_axis);
        let (a, dims) = transform_axis(&plane, [nkx, nky, 1], 1, &ty);
        let tx = inverse_axis(nkx, spec.lx, x_axis);
        let (mut a, _) = transform_axis(&a, dims, 0, &tx);
        let norm = 1.0 / (nkx * nky * nf) as f64;
        a.iter_mut().for_each(|v| *v *= norm);
        a
    });

    check_field_of_view(x_axis, spec.center[0], spec.lx, "x", &mut report.warnings);
    check_field_of_view(y_axis, spec.center[1], spec.ly, "y", &mut report.warnings);
    report.spectrum_dims = [nkx, nky, 1];
    report.uniform_positions = spec.uniform;
    Ok((ReflectivityVolume::new(grid, voxels)?, report))
}
