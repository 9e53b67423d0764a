//! Non-uniform FFTs by fast Gaussian gridding.
//!
//! Sources are spread onto an oversampled periodic grid with a Gaussian
//! kernel, transformed with a standard FFT, and the kernel's spectrum is
//! divided out. For oversampling `R` and spreading half-width `w` the
//! relative error behaves like `exp(-π w (R - 1)/(R - 1/2))`.
//!
//! Wavenumber grids are DC-centered: output index `q` along an axis of `n`
//! samples and extent `L` holds `k_q = (q - n/2) · 2π/L`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::spectral::centered_k;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Spreading parameters for one transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NufftPlan {
    pub oversampling: f64,
    /// Kernel half-width in fine-grid cells.
    pub spreading_width: usize,
    pub tolerance: f64,
    pub output_dims: (usize, usize),
}

impl NufftPlan {
    /// Oversampling 2 with the spreading width implied by `tolerance`.
    pub fn new(tolerance: f64, output_dims: (usize, usize)) -> Result<Self> {
        Self::with_oversampling(tolerance, 2.0, output_dims)
    }

    pub fn with_oversampling(tolerance: f64, oversampling: f64, output_dims: (usize, usize)) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return invalid("NUFFT tolerance must lie in (0, 1)");
        }
        if !(oversampling >= 1.5) {
            return invalid("NUFFT oversampling must be at least 1.5");
        }
        if output_dims.0 == 0 || output_dims.1 == 0 {
            return invalid("NUFFT output dimensions must be non-zero");
        }
        Ok(Self {
            oversampling,
            spreading_width: width_for_tolerance(tolerance, oversampling),
            tolerance,
            output_dims,
        })
    }

    /// Overrides the spreading width (kept for accuracy studies).
    pub fn with_width(mut self, spreading_width: usize) -> Self {
        self.spreading_width = spreading_width.max(1);
        self
    }
}

/// Smallest width whose predicted error sits a decade below `tolerance`.
pub fn width_for_tolerance(tolerance: f64, oversampling: f64) -> usize {
    let rate = PI * (oversampling - 1.0) / (oversampling - 0.5);
    ((-(tolerance / 10.0).ln()) / rate).ceil().max(2.0) as usize
}

/// Gaussian gridding along one axis.
struct Gridding {
    modes: usize,
    fine: usize,
    width: usize,
    tau: f64,
    h: f64,
}

impl Gridding {
    fn new(modes: usize, plan: &NufftPlan) -> Self {
        let r = plan.oversampling;
        let mut fine = ((r * modes as f64).ceil() as usize).max(2 * plan.spreading_width + 2);
        fine += fine % 2;
        let width = plan.spreading_width.min(fine / 2 - 1).max(1);
        // small mode counts get a wider fine grid than requested
        let r = r.max(fine as f64 / modes as f64);
        let tau = PI * width as f64 / ((modes * modes) as f64 * r * (r - 0.5));
        Self {
            modes,
            fine,
            width,
            tau,
            h: 2.0 * PI / fine as f64,
        }
    }

    /// Fine-grid indices and kernel weights around angle `theta` in [0, 2π).
    fn taps(&self, theta: f64, idx: &mut Vec<usize>, weight: &mut Vec<f64>) {
        idx.clear();
        weight.clear();
        let m0 = (theta / self.h).floor() as i64;
        let w = self.width as i64;
        for l in (-w + 1)..=w {
            let m = m0 + l;
            let d = theta - m as f64 * self.h;
            idx.push(m.rem_euclid(self.fine as i64) as usize);
            weight.push((-d * d / (4.0 * self.tau)).exp());
        }
    }

    /// Deconvolution factor for mode `q - modes/2`.
    fn deconvolve(&self, q: usize) -> f64 {
        let k = q as f64 - (self.modes / 2) as f64;
        (PI / self.tau).sqrt() * (k * k * self.tau).exp()
    }

    fn fine_index(&self, q: usize) -> usize {
        let k = q as i64 - (self.modes / 2) as i64;
        k.rem_euclid(self.fine as i64) as usize
    }
}

fn to_angle(x: f64, extent: f64) -> f64 {
    (2.0 * PI * x / extent).rem_euclid(2.0 * PI)
}

fn check_positions(positions: &[[f64; 2]], values: &[Complex64], extent: (f64, f64)) -> Result<()> {
    if positions.len() != values.len() {
        return invalid("positions and values differ in length");
    }
    if !(extent.0 > 0.0 && extent.1 > 0.0) {
        return invalid("extent must be positive");
    }
    let (hx, hy) = (extent.0 / 2.0, extent.1 / 2.0);
    for (m, p) in positions.iter().enumerate() {
        if !(p[0].abs() <= hx && p[1].abs() <= hy) {
            return invalid(format!(
                "position {} at ({}, {}) lies outside the [-{hx}, {hx}] x [-{hy}, {hy}] extent",
                m, p[0], p[1]
            ));
        }
    }
    Ok(())
}

/// `F(k_x, k_y) = Σ_m v_m e^{-j(k_x x_m + k_y y_m)}` on the DC-centered
/// `output_dims` grid implied by `extent`, row-major `[n_kx × n_ky]`.
/// Positions must lie within `[-L/2, L/2]` on each axis.
pub fn nufft2_type1(
    positions: &[[f64; 2]],
    values: &[Complex64],
    plan: &NufftPlan,
    extent: (f64, f64),
) -> Result<Vec<Complex64>> {
    check_positions(positions, values, extent)?;
    let (nx, ny) = plan.output_dims;
    let gx = Gridding::new(nx, plan);
    let gy = Gridding::new(ny, plan);
    let (mx, my) = (gx.fine, gy.fine);

    let mut fine = vec![ZERO; mx * my];
    let (mut ix, mut wx, mut iy, mut wy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (p, v) in positions.iter().zip(values) {
        gx.taps(to_angle(p[0], extent.0), &mut ix, &mut wx);
        gy.taps(to_angle(p[1], extent.1), &mut iy, &mut wy);
        for (&a, &wa) in ix.iter().zip(&wx) {
            let row = &mut fine[a * my..(a + 1) * my];
            let va = v * wa;
            for (&b, &wb) in iy.iter().zip(&wy) {
                row[b] += va * wb;
            }
        }
    }

    fft2_forward(&mut fine, mx, my);

    let scale = 1.0 / (mx * my) as f64;
    let dy: Vec<f64> = (0..ny).map(|q| gy.deconvolve(q)).collect();
    let mut out = vec![ZERO; nx * ny];
    for qx in 0..nx {
        let fx = gx.fine_index(qx);
        let cx = gx.deconvolve(qx) * scale;
        for qy in 0..ny {
            out[qx * ny + qy] = fine[fx * my + gy.fine_index(qy)] * (cx * dy[qy]);
        }
    }
    Ok(out)
}

fn fft2_forward(data: &mut [Complex64], rows: usize, cols: usize) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(cols);
    for row in data.chunks_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut line = vec![ZERO; rows];
    for c in 0..cols {
        for r in 0..rows {
            line[r] = data[r * cols + c];
        }
        col_fft.process(&mut line);
        for r in 0..rows {
            data[r * cols + c] = line[r];
        }
    }
}

/// Exact evaluation of the type-1 sum on the same grid as [`nufft2_type1`].
pub fn direct_dft2(
    positions: &[[f64; 2]],
    values: &[Complex64],
    output_dims: (usize, usize),
    extent: (f64, f64),
) -> Vec<Complex64> {
    let (nx, ny) = output_dims;
    let mut out = vec![ZERO; nx * ny];
    for (p, v) in positions.iter().zip(values) {
        for qx in 0..nx {
            let kx = centered_k(qx, nx, extent.0);
            let base = v * Complex64::cis(-kx * p[0]);
            // recurrence along k_y
            let step = Complex64::cis(-2.0 * PI / extent.1 * p[1]);
            let mut ph = base * Complex64::cis(-centered_k(0, ny, extent.1) * p[1]);
            for qy in 0..ny {
                out[qx * ny + qy] += ph;
                ph *= step;
            }
        }
    }
    out
}

/// `f(t) = Σ_q F_q e^{j (q - n/2) t}` at targets `t ∈ [-π, π]`, where
/// `n = spectrum.len()`.
pub fn nufft1_type2_1d(spectrum: &[Complex64], targets: &[f64], plan: &NufftPlan) -> Result<Vec<Complex64>> {
    if spectrum.is_empty() {
        return Ok(vec![ZERO; targets.len()]);
    }
    Type2::new(spectrum.len(), plan).eval(spectrum, targets)
}

/// Reusable type-2 evaluator for spectra of a fixed length.
pub(crate) struct Type2 {
    g: Gridding,
    ifft: Arc<dyn Fft<f64>>,
}

impl Type2 {
    pub(crate) fn new(modes: usize, plan: &NufftPlan) -> Self {
        let g = Gridding::new(modes, plan);
        let ifft = FftPlanner::new().plan_fft_inverse(g.fine);
        Self { g, ifft }
    }

    pub(crate) fn eval(&self, spectrum: &[Complex64], targets: &[f64]) -> Result<Vec<Complex64>> {
        if let Some(t) = targets.iter().find(|t| !(t.abs() <= PI)) {
            return invalid(format!("target {t} lies outside the representable band [-π, π]"));
        }
        let g = &self.g;
        let n = g.modes;
        if spectrum.len() != n {
            return invalid("spectrum length differs from the plan");
        }
        let mut fine = vec![ZERO; g.fine];
        for (q, v) in spectrum.iter().enumerate() {
            fine[g.fine_index(q)] = v * ((q as f64 - (n / 2) as f64).powi(2) * g.tau).exp();
        }
        self.ifft.process(&mut fine);

        let scale = (PI / g.tau).sqrt() / g.fine as f64;
        let (mut idx, mut w) = (Vec::new(), Vec::new());
        Ok(targets
            .iter()
            .map(|&t| {
                g.taps(t.rem_euclid(2.0 * PI), &mut idx, &mut w);
                idx.iter().zip(&w).map(|(&m, &wm)| fine[m] * wm).sum::<Complex64>() * scale
            })
            .collect())
    }
}

/// Max-norm relative error, `max|a - b| / max|b|`.
pub fn max_relative_error(a: &[Complex64], reference: &[Complex64]) -> f64 {
    let err = a.iter().zip(reference).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let scale = reference.iter().map(|y| y.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}
