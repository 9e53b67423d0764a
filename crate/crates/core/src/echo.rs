//! Frequency-domain multistatic echo synthesis for point-scatterer scenes,
//! plus exact and approximate round-trip distances.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compensation::PHASE_SIGN;
use crate::error::{invalid, Error, Result};
use crate::geometry::{ChannelGeometry, Vec3};
use crate::SPEED_OF_LIGHT;

/// One ideal point scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Vec3,
    pub reflectivity: Complex64,
}

impl Scatterer {
    pub fn unit(position: Vec3) -> Self {
        Self {
            position,
            reflectivity: Complex64::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetScene {
    pub scatterers: Vec<Scatterer>,
}

impl TargetScene {
    pub fn new(scatterers: Vec<Scatterer>) -> Self {
        Self { scatterers }
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        Self::new(points.iter().copied().map(Scatterer::unit).collect())
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }
}

/// Ascending, uniformly spaced frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    frequencies: Vec<f64>,
    center_frequency: f64,
    bandwidth: f64,
}

impl FrequencyGrid {
    /// `n` frequencies from `f_start` to `f_stop` inclusive.
    pub fn linspace(f_start: f64, f_stop: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return invalid("frequency grid needs at least 2 frequencies");
        }
        if !(f_start > 0.0 && f_stop > f_start) || !f_stop.is_finite() {
            return invalid("frequency grid must be positive and ascending");
        }
        let step = (f_stop - f_start) / (n - 1) as f64;
        let frequencies = (0..n).map(|i| f_start + step * i as f64).collect();
        Self::from_frequencies(frequencies)
    }

    /// Grid spanning `[fc - B/2, fc + B/2]`.
    pub fn from_center(center_frequency: f64, bandwidth: f64, n: usize) -> Result<Self> {
        Self::linspace(center_frequency - bandwidth / 2.0, center_frequency + bandwidth / 2.0, n)
    }

    /// Validates an explicit list (as stored in echo dumps).
    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.len() < 2 {
            return invalid("frequency grid needs at least 2 frequencies");
        }
        if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return invalid("frequencies must be finite and positive");
        }
        let n = frequencies.len();
        let step = (frequencies[n - 1] - frequencies[0]) / (n - 1) as f64;
        if !(step > 0.0) {
            return invalid("frequencies must be ascending");
        }
        for (i, f) in frequencies.iter().enumerate() {
            let expect = frequencies[0] + step * i as f64;
            if (f - expect).abs() > 1e-9 * step.max(1.0) * (n as f64) {
                return invalid(format!("frequency {} breaks uniform spacing", i));
            }
        }
        let bandwidth = frequencies[n - 1] - frequencies[0];
        Ok(Self {
            center_frequency: frequencies[0] + bandwidth / 2.0,
            bandwidth,
            frequencies,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn step(&self) -> f64 {
        self.bandwidth / (self.len() - 1) as f64
    }

    pub fn center_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency
    }

    /// Wavenumbers `k = 2πf/c` (rad/m).
    pub fn wavenumbers(&self) -> Vec<f64> {
        self.frequencies.iter().map(|&f| wavenumber(f)).collect()
    }
}

pub fn wavenumber(frequency: f64) -> f64 {
    2.0 * std::f64::consts::PI * frequency / SPEED_OF_LIGHT
}

/// Multistatic frequency-domain samples, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoSet {
    pub channels: Vec<ChannelGeometry>,
    pub grid: FrequencyGrid,
    /// `n_channels * n_frequencies` entries, channel-major.
    pub samples: Vec<Complex64>,
    /// Transmitted spectrum `P(f)`, one entry per frequency.
    pub pulse_spectrum: Vec<Complex64>,
}

impl EchoSet {
    pub fn new(
        channels: Vec<ChannelGeometry>,
        grid: FrequencyGrid,
        samples: Vec<Complex64>,
        pulse_spectrum: Vec<Complex64>,
    ) -> Result<Self> {
        let echo = Self {
            channels,
            grid,
            samples,
            pulse_spectrum,
        };
        echo.validate()?;
        Ok(echo)
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.grid.len();
        if self.samples.len() != self.channels.len() * nf {
            return invalid(format!(
                "sample matrix has {} entries, expected {} x {}",
                self.samples.len(),
                self.channels.len(),
                nf
            ));
        }
        if self.pulse_spectrum.len() != nf {
            return invalid("pulse spectrum length differs from the frequency grid");
        }
        if self.samples.iter().chain(&self.pulse_spectrum).any(|c| !c.is_finite()) {
            return invalid("echo contains non-finite values");
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_frequencies(&self) -> usize {
        self.grid.len()
    }

    pub fn channel_samples(&self, channel: usize) -> &[Complex64] {
        let nf = self.grid.len();
        &self.samples[channel * nf..(channel + 1) * nf]
    }
}

/// `R^T + R^R` with each leg a Euclidean norm.
pub fn round_trip_exact(tx_pos: Vec3, rx_pos: Vec3, target_pos: Vec3) -> f64 {
    (tx_pos - target_pos).norm() + (rx_pos - target_pos).norm()
}

/// Signed reference range `h = z0 - z_target` and its guard against a
/// singular baseline term.
fn reference_range(ch: &ChannelGeometry, target_pos: Vec3, z0: f64) -> Result<f64> {
    let h = z0 - target_pos.z;
    if h == 0.0 && (ch.d_x != 0.0 || ch.d_y != 0.0) {
        return Err(Error::SingularGeometry(
            "target depth coincides with the reference plane while the channel has a baseline".into(),
        ));
    }
    Ok(h)
}

fn virtual_range(ch: &ChannelGeometry, target_pos: Vec3, z0: f64) -> Result<f64> {
    let v = Vec3::new(ch.virtual_pos.x, ch.virtual_pos.y, z0);
    let r0 = (v - target_pos).norm();
    if r0 == 0.0 {
        return Err(Error::SingularGeometry("target sits on the virtual element".into()));
    }
    Ok(r0)
}

/// Near-axis approximation `2R₀ + 2d_z + (d_x² + d_y²)/(4Z₀)`.
///
/// `Z₀` is taken relative to the target: with `h = z0 - target.z`, the
/// plane term is `2 d_z sign(h)` and the baseline term uses `|h|`. For a
/// target at the origin and a plane at positive `z0` this is the textbook
/// expression verbatim.
pub fn round_trip_approx(ch: &ChannelGeometry, target_pos: Vec3, z0: f64) -> Result<f64> {
    let h = reference_range(ch, target_pos, z0)?;
    let r0 = virtual_range(ch, target_pos, z0)?;
    let baseline2 = ch.d_x * ch.d_x + ch.d_y * ch.d_y;
    let mimo = if baseline2 == 0.0 { 0.0 } else { baseline2 / (4.0 * h.abs()) };
    Ok(2.0 * r0 + 2.0 * ch.d_z * side(h) + mimo)
}

/// Full second-order Taylor expansion of the round trip about
/// `d_x = d_y = d_z = 0`.
pub fn round_trip_quadratic(ch: &ChannelGeometry, target_pos: Vec3, z0: f64) -> Result<f64> {
    reference_range(ch, target_pos, z0)?;
    let r0 = virtual_range(ch, target_pos, z0)?;
    let (dx, dy, dz) = (ch.d_x, ch.d_y, ch.d_z);
    let ux = ch.virtual_pos.x - target_pos.x;
    let uy = ch.virtual_pos.y - target_pos.y;
    let h = z0 - target_pos.z;
    let cross = ux * dx + uy * dy;
    Ok(2.0 * r0 + 2.0 * h * dz / r0 + (dx * dx + dy * dy + 4.0 * dz * dz) / (4.0 * r0)
        - (cross * cross + 4.0 * h * h * dz * dz) / (4.0 * r0.powi(3)))
}

/// +1 when the plane lies above the target (`h >= 0`), -1 otherwise.
pub(crate) fn side(h: f64) -> f64 {
    if h >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Unit transmitted spectrum.
pub fn unit_pulse(grid: &FrequencyGrid) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); grid.len()]
}

/// `s[l][i] = P(f_i) Σ o e^{-j k_i (R^T + R^R)} / (R^T R^R)`.
///
/// Channels are synthesized independently so the output does not depend on
/// the thread schedule.
pub fn synthesize_echo(
    scene: &TargetScene,
    channels: &[ChannelGeometry],
    grid: &FrequencyGrid,
    pulse_spectrum: Option<&[Complex64]>,
) -> Result<EchoSet> {
    if scene.is_empty() {
        return invalid("empty scene");
    }
    if channels.is_empty() {
        return invalid("no channels to synthesize");
    }
    if scene.scatterers.iter().any(|s| !s.position.is_finite()) {
        return invalid("scatterer positions must be finite");
    }
    let pulse = match pulse_spectrum {
        Some(p) if p.len() != grid.len() => return invalid("pulse spectrum length mismatch"),
        Some(p) => p.to_vec(),
        None => unit_pulse(grid),
    };
    let k = grid.wavenumbers();
    let nf = grid.len();

    for (l, ch) in channels.iter().enumerate() {
        for s in &scene.scatterers {
            if (ch.tx_pos - s.position).norm() == 0.0 || (ch.rx_pos - s.position).norm() == 0.0 {
                return Err(Error::SingularGeometry(format!(
                    "scatterer coincides with an element of channel {}",
                    l
                )));
            }
        }
    }

    let mut samples = vec![Complex64::new(0.0, 0.0); channels.len() * nf];
    samples
        .par_chunks_mut(nf)
        .zip(channels.par_iter())
        .for_each(|(row, ch)| {
            for s in &scene.scatterers {
                let rt = (ch.tx_pos - s.position).norm();
                let rr = (ch.rx_pos - s.position).norm();
                let amp = s.reflectivity / (rt * rr);
                let r = rt + rr;
                for (out, &ki) in row.iter_mut().zip(&k) {
                    *out += amp * Complex64::cis(PHASE_SIGN * ki * r);
                }
            }
            for (out, p) in row.iter_mut().zip(&pulse) {
                *out *= p;
            }
        });

    EchoSet::new(channels.to_vec(), grid.clone(), samples, pulse)
}

/// Adds circular complex white Gaussian noise at the given SNR (dB, relative
/// to the mean sample power).
pub fn add_noise(echo: &mut EchoSet, snr_db: f64, seed: u64) {
    let power = echo.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / echo.samples.len().max(1) as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in echo.samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *s += Complex64::new(re, im) * sigma;
    }
}
