//! MIMO array layouts, radar poses along irregular trajectories, and the
//! per-channel geometry derived from them.
//!
//! World frame: the radar faces +z towards the scene. Every Tx/Rx pair is
//! represented by its virtual midpoint element migrated onto the reference
//! plane `z = z0`, together with its baseline `(d_x, d_y)` and its plane
//! offset `d_z = z_l - z0`.

use std::ops::{Add, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::SPEED_OF_LIGHT;

/// A point or displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Wavelength (m) of a carrier frequency (Hz).
pub fn wavelength(frequency: f64) -> f64 {
    SPEED_OF_LIGHT / frequency
}

/// Tx and Rx element positions in the radar body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoArrayLayout {
    pub tx_offsets: Vec<Vec3>,
    pub rx_offsets: Vec<Vec3>,
}

impl MimoArrayLayout {
    pub fn new(tx_offsets: Vec<Vec3>, rx_offsets: Vec<Vec3>) -> Result<Self> {
        let layout = Self {
            tx_offsets,
            rx_offsets,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Single collocated Tx/Rx element at the body origin.
    pub fn monostatic() -> Self {
        Self {
            tx_offsets: vec![Vec3::default()],
            rx_offsets: vec![Vec3::default()],
        }
    }

    /// Two Tx spaced by `2λ` and four Rx spaced by `λ/2` along x, placed so
    /// the eight virtual midpoints form a uniform `λ/4` line centered on the
    /// body origin. Baselines stay within `1.75λ`.
    pub fn two_by_four(center_wavelength: f64) -> Self {
        let l = center_wavelength;
        Self {
            tx_offsets: vec![Vec3::new(-l, 0.0, 0.0), Vec3::new(l, 0.0, 0.0)],
            rx_offsets: [-0.75, -0.25, 0.25, 0.75]
                .iter()
                .map(|&f| Vec3::new(f * l, 0.0, 0.0))
                .collect(),
        }
    }

    /// The same layout with x and y exchanged, e.g. to lay
    /// [`two_by_four`](Self::two_by_four) along y.
    pub fn swap_xy(&self) -> Self {
        let swap = |v: &Vec3| Vec3::new(v.y, v.x, v.z);
        Self {
            tx_offsets: self.tx_offsets.iter().map(swap).collect(),
            rx_offsets: self.rx_offsets.iter().map(swap).collect(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.tx_offsets.len() * self.rx_offsets.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_offsets.is_empty() || self.rx_offsets.is_empty() {
            return invalid("array layout needs at least one Tx and one Rx element");
        }
        let all = self.tx_offsets.iter().chain(&self.rx_offsets);
        if all.clone().any(|v| !v.is_finite()) {
            return invalid("array element offsets must be finite");
        }
        let z = self.tx_offsets[0].z;
        if all.clone().any(|v| v.z != z) {
            return invalid("all Tx and Rx elements must share one z offset");
        }
        Ok(())
    }
}

/// Radar position at one capture, in TDM capture order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPose {
    pub position: Vec3,
    pub index: usize,
}

impl RadarPose {
    pub fn new(position: Vec3, index: usize) -> Self {
        Self { position, index }
    }
}

/// Geometry of one Tx/Rx pair relative to the reference plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGeometry {
    pub tx_pos: Vec3,
    pub rx_pos: Vec3,
    /// Midpoint element `(x', y', z0)`.
    pub virtual_pos: Vec3,
    pub d_x: f64,
    pub d_y: f64,
    pub d_z: f64,
}

impl ChannelGeometry {
    /// Derives the channel from its element positions. Tx and Rx must lie on
    /// the same z plane.
    pub fn from_elements(tx_pos: Vec3, rx_pos: Vec3, z0: f64) -> Result<Self> {
        if !tx_pos.is_finite() || !rx_pos.is_finite() || !z0.is_finite() {
            return invalid("channel element positions and z0 must be finite");
        }
        if tx_pos.z != rx_pos.z {
            return invalid(format!(
                "Tx z ({}) and Rx z ({}) differ; multi-planar pairs share one plane",
                tx_pos.z, rx_pos.z
            ));
        }
        Ok(Self {
            tx_pos,
            rx_pos,
            virtual_pos: Vec3::new((tx_pos.x + rx_pos.x) / 2.0, (tx_pos.y + rx_pos.y) / 2.0, z0),
            d_x: rx_pos.x - tx_pos.x,
            d_y: rx_pos.y - tx_pos.y,
            d_z: tx_pos.z - z0,
        })
    }

    pub fn z0(&self) -> f64 {
        self.virtual_pos.z
    }

    pub fn is_monostatic_planar(&self) -> bool {
        self.d_x == 0.0 && self.d_y == 0.0 && self.d_z == 0.0
    }
}

/// Expands poses and a layout into channels, pose-major then Tx then Rx.
pub fn expand_channels(
    layout: &MimoArrayLayout,
    poses: &[RadarPose],
    z0: f64,
) -> Result<Vec<ChannelGeometry>> {
    layout.validate()?;
    if poses.is_empty() {
        return invalid("pose list is empty");
    }
    if !z0.is_finite() {
        return invalid("z0 must be finite");
    }
    let mut channels = Vec::with_capacity(poses.len() * layout.n_channels());
    for pose in poses {
        if !pose.position.is_finite() {
            return invalid(format!("pose {} has non-finite coordinates", pose.index));
        }
        for &tx in &layout.tx_offsets {
            for &rx in &layout.rx_offsets {
                channels.push(ChannelGeometry::from_elements(
                    pose.position + tx,
                    pose.position + rx,
                    z0,
                )?);
            }
        }
    }
    Ok(channels)
}

/// Parameters of a semi-smooth random scan curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    /// Half-span of x (m); the curve covers `[-extent_x, extent_x]`.
    pub extent_x: f64,
    pub extent_y: f64,
    /// Largest |z - mean(z)| along the curve (m).
    pub z_deviation_max: f64,
    pub n_samples: usize,
    /// Low-pass cutoff as a fraction of the sample rate, in (0, 1].
    pub smoothness: f64,
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return invalid("trajectory needs at least 2 samples");
        }
        if !(self.z_deviation_max >= 0.0 && self.z_deviation_max.is_finite()) {
            return invalid("z_deviation_max must be finite and >= 0");
        }
        if !(self.extent_x >= 0.0 && self.extent_y >= 0.0)
            || !self.extent_x.is_finite()
            || !self.extent_y.is_finite()
        {
            return invalid("extents must be finite and >= 0");
        }
        if !(self.smoothness > 0.0 && self.smoothness <= 1.0) {
            return invalid("smoothness must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Low-pass filtered white noise per axis. x and y are rescaled to span
/// their extents exactly; z is centered and scaled so that its largest
/// deviation equals `z_deviation_max`.
///
/// A line scan (exactly one zero extent) sweeps the other axis uniformly
/// from `-extent` to `+extent` instead, so only z is random.
pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<RadarPose>> {
    spec.validate()?;
    let n = spec.n_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Draw order is fixed (x, y, z) so a given seed keeps the same x-y path
    // for every z deviation.
    let xs = lowpass_noise(&mut rng, n, spec.smoothness);
    let ys = lowpass_noise(&mut rng, n, spec.smoothness);
    let zs = lowpass_noise(&mut rng, n, spec.smoothness);

    let line = (spec.extent_x == 0.0) != (spec.extent_y == 0.0);
    let lateral = |v: &[f64], e: f64| if line { sweep(n, e) } else { rescale_span(v, e) };
    let xs = lateral(&xs, spec.extent_x);
    let ys = lateral(&ys, spec.extent_y);
    let zs = rescale_deviation(&zs, spec.z_deviation_max);

    Ok((0..n)
        .map(|i| RadarPose::new(Vec3::new(xs[i], ys[i], zs[i]), i))
        .collect())
}

fn lowpass_noise(rng: &mut ChaCha8Rng, n: usize, cutoff: f64) -> Vec<f64> {
    // Filter a sequence twice as long and keep the first half so the curve
    // does not close on itself.
    let len = 2 * n;
    let mut buf: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let keep = ((cutoff * len as f64).floor() as usize).max(1);
    for (b, v) in buf.iter_mut().enumerate() {
        let f = b.min(len - b);
        if f > keep {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.truncate(n);
    buf.into_iter().map(|c| c.re / len as f64).collect()
}

fn sweep(n: usize, half_span: f64) -> Vec<f64> {
    (0..n)
        .map(|i| (2.0 * i as f64 / (n - 1) as f64 - 1.0) * half_span)
        .collect()
}

fn rescale_span(v: &[f64], half_span: f64) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if half_span == 0.0 || hi - lo <= 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter()
        .map(|&a| (((a - lo) / (hi - lo)) * 2.0 - 1.0) * half_span)
        .map(|a| a.clamp(-half_span, half_span))
        .collect()
}

fn rescale_deviation(v: &[f64], dev: f64) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let peak = v.iter().map(|a| (a - mean).abs()).fold(0.0, f64::max);
    if dev == 0.0 || peak == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|&a| (a - mean) / peak * dev).collect()
}

/// Uniform raster of `nx * ny` poses at height `z`, centered on the origin,
/// x-major.
pub fn planar_grid_poses(nx: usize, ny: usize, step: f64, z: f64) -> Vec<RadarPose> {
    let x0 = -(nx as f64 - 1.0) * step / 2.0;
    let y0 = -(ny as f64 - 1.0) * step / 2.0;
    let mut poses = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let p = Vec3::new(x0 + ix as f64 * step, y0 + iy as f64 * step, z);
            poses.push(RadarPose::new(p, poses.len()));
        }
    }
    poses
}

/// Snaps poses onto a lattice with the given steps (a zero step leaves that
/// axis untouched). Used to emulate irregular scans subsampled from
/// stacked mechanical planar scans.
pub fn snap_poses(poses: &[RadarPose], step: Vec3) -> Vec<RadarPose> {
    let snap = |v: f64, s: f64| if s > 0.0 { (v / s).round() * s } else { v };
    poses
        .iter()
        .map(|p| {
            let q = p.position;
            RadarPose::new(
                Vec3::new(snap(q.x, step.x), snap(q.y, step.y), snap(q.z, step.z)),
                p.index,
            )
        })
        .collect()
}

/// Far-field condition for the midpoint approximation:
/// `sqrt(d_x² + d_y²) <= sqrt(4 ε λ R)`.
pub fn check_far_field(d_x: f64, d_y: f64, wavelength: f64, range_ref: f64, epsilon: f64) -> Result<bool> {
    if !(wavelength > 0.0) || !(range_ref > 0.0) || !(epsilon > 0.0) {
        return invalid("wavelength, reference range and epsilon must be positive");
    }
    let baseline = d_x.hypot(d_y);
    Ok(baseline <= (4.0 * epsilon * wavelength * range_ref).sqrt())
}

/// Frequency-step and capture-rate bounds for a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingReport {
    /// Largest frequency step that keeps `r_max` unambiguous (Hz).
    pub delta_f_max: f64,
    /// Smallest PRF that avoids spatial undersampling at `v_max` (Hz).
    pub prf_min: f64,
    /// Largest spacing between consecutive samples (m).
    pub spatial_step_max: f64,
    pub violations: Vec<String>,
}

pub fn sampling_bounds(r_max: f64, v_max: f64, center_wavelength: f64) -> Result<SamplingReport> {
    if !(r_max > 0.0) || !(v_max > 0.0) || !(center_wavelength > 0.0) {
        return invalid("r_max, v_max and the center wavelength must be positive");
    }
    Ok(SamplingReport {
        delta_f_max: SPEED_OF_LIGHT / (2.0 * r_max),
        prf_min: 4.0 * v_max / center_wavelength,
        spatial_step_max: center_wavelength / 4.0,
        violations: Vec::new(),
    })
}

impl SamplingReport {
    /// Records violations of the bounds by a frequency step and a pose
    /// sequence.
    pub fn audit(&mut self, frequency_step: f64, poses: &[RadarPose]) {
        if frequency_step >= self.delta_f_max {
            self.violations.push(format!(
                "frequency step {:.4e} Hz exceeds the unambiguous-range bound {:.4e} Hz",
                frequency_step, self.delta_f_max
            ));
        }
        let (mut worst, mut count) = (0.0f64, 0usize);
        for w in poses.windows(2) {
            let d = (w[1].position - w[0].position).norm();
            if d >= self.spatial_step_max {
                count += 1;
                worst = worst.max(d);
            }
        }
        if count > 0 {
            self.violations.push(format!(
                "{} consecutive pose steps exceed {:.4e} m (largest {:.4e} m)",
                count, self.spatial_step_max, worst
            ));
        }
    }
}

/// How the reference plane `z0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZPolicy {
    /// Mean of the pose heights; minimizes the largest |d_z|.
    Mean,
    Fixed(f64),
}

pub fn reference_plane(poses: &[RadarPose], policy: ZPolicy) -> Result<f64> {
    if poses.is_empty() {
        return invalid("pose list is empty");
    }
    Ok(match policy {
        ZPolicy::Mean => poses.iter().map(|p| p.position.z).sum::<f64>() / poses.len() as f64,
        ZPolicy::Fixed(z) => z,
    })
}
