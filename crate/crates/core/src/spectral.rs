//! FFT plumbing shared by the reconstructors: chirp-z evaluation of uniform
//! spectra on arbitrary uniform output axes, and line-wise transforms of
//! row-major 3-D arrays.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Evaluates `o_n = Σ_q O_q e^{j (k0 + q dk)(x0 + n dx)}` for `q < n_in`,
/// `n < n_out` with Bluestein's algorithm.
pub(crate) struct AxisTransform {
    n_in: usize,
    n_out: usize,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl AxisTransform {
    pub(crate) fn new(k0: f64, dk: f64, n_in: usize, x0: f64, dx: f64, n_out: usize) -> Self {
        let w = dk * dx;
        let len = (n_in + n_out - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);

        let chirp = |m: i64| Complex64::cis(0.5 * w * (m * m) as f64);
        let pre = (0..n_in)
            .map(|q| Complex64::cis(q as f64 * dk * x0) * chirp(q as i64))
            .collect();
        let post = (0..n_out)
            .map(|n| Complex64::cis(k0 * (x0 + n as f64 * dx)) * chirp(n as i64) / len as f64)
            .collect();
        let mut kernel = vec![ZERO; len];
        for m in 0..n_out {
            kernel[m] = chirp(m as i64).conj();
        }
        for m in 1..n_in {
            kernel[len - m] = chirp(m as i64).conj();
        }
        fft.process(&mut kernel);
        Self {
            n_in,
            n_out,
            pre,
            post,
            kernel,
            fft,
            ifft,
        }
    }

    pub(crate) fn work_len(&self) -> usize {
        self.kernel.len()
    }

    /// `buf` must have `work_len()` entries; the first `n_in` hold the input
    /// and the first `n_out` receive the output.
    pub(crate) fn apply_in_place(&self, buf: &mut [Complex64]) {
        for (b, p) in buf.iter_mut().zip(&self.pre) {
            *b *= p;
        }
        for b in buf[self.n_in..].iter_mut() {
            *b = ZERO;
        }
        self.fft.process(buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.ifft.process(buf);
        for (b, p) in buf.iter_mut().zip(&self.post) {
            *b *= p;
        }
    }

    #[cfg(test)]
    pub(crate) fn apply(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.work_len()];
        buf[..self.n_in].copy_from_slice(input);
        self.apply_in_place(&mut buf);
        buf.truncate(self.n_out);
        buf
    }
}

/// Applies `t` along `axis` of a row-major array with shape `dims`.
pub(crate) fn transform_axis(
    data: &[Complex64],
    dims: [usize; 3],
    axis: usize,
    t: &AxisTransform,
) -> (Vec<Complex64>, [usize; 3]) {
    assert_eq!(dims[axis], t.n_in);
    let mut out_dims = dims;
    out_dims[axis] = t.n_out;
    let stride_in = stride(dims, axis);
    let stride_out = stride(out_dims, axis);
    let (outer, inner) = split(dims, axis);

    let lines: Vec<Vec<Complex64>> = (0..outer * inner)
        .into_par_iter()
        .map_init(
            || vec![ZERO; t.work_len()],
            |buf, line| {
                let (o, i) = (line / inner, line % inner);
                let base = o * dims[axis] * inner + i;
                for q in 0..t.n_in {
                    buf[q] = data[base + q * stride_in];
                }
                t.apply_in_place(buf);
                buf[..t.n_out].to_vec()
            },
        )
        .collect();

    let mut out = vec![ZERO; out_dims.iter().product()];
    for (line, values) in lines.iter().enumerate() {
        let (o, i) = (line / inner, line % inner);
        let base = o * t.n_out * inner + i;
        for (n, v) in values.iter().enumerate() {
            out[base + n * stride_out] = *v;
        }
    }
    (out, out_dims)
}

fn stride(dims: [usize; 3], axis: usize) -> usize {
    dims[axis + 1..].iter().product()
}

fn split(dims: [usize; 3], axis: usize) -> (usize, usize) {
    (dims[..axis].iter().product(), dims[axis + 1..].iter().product())
}

/// In-place unnormalized forward FFT along `axis` of a row-major 3-D array.
pub(crate) fn fft_axis(data: &mut [Complex64], dims: [usize; 3], axis: usize) {
    let n = dims[axis];
    if n <= 1 {
        return;
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let s = stride(dims, axis);
    let (outer, inner) = split(dims, axis);
    if s == 1 {
        data.par_chunks_mut(n).for_each(|line| fft.process(line));
        return;
    }
    data.par_chunks_mut(n * inner).for_each(|block| {
        let mut line = vec![ZERO; n];
        for i in 0..inner {
            for q in 0..n {
                line[q] = block[i + q * s];
            }
            fft.process(&mut line);
            for q in 0..n {
                block[i + q * s] = line[q];
            }
        }
    });
    debug_assert_eq!(data.len(), outer * n * inner);
}

/// Uniform wavenumber axis with DC at index `n/2`: `k_q = (q - n/2) · 2π/L`.
pub(crate) fn centered_k(q: usize, n: usize, extent: f64) -> f64 {
    (q as f64 - (n / 2) as f64) * 2.0 * std::f64::consts::PI / extent
}
