//! Exact back-projection: `o(v) = Σ_ℓ Σ_i s[ℓ][i] e^{+j k_i R_ℓ(v)}` with the
//! true bistatic round trip of every channel.

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{ImageGrid, ReflectivityVolume};
use crate::compensation::PHASE_SIGN;
use crate::echo::{round_trip_exact, EchoSet};
use crate::error::Result;

/// Back-projects every channel onto every voxel.
///
/// Each voxel accumulates channel-major, frequency-inner in a private
/// register, so the output does not depend on the thread count.
pub fn bpa_reconstruct(echo: &EchoSet, grid: &ImageGrid) -> Result<ReflectivityVolume> {
    echo.validate()?;
    grid.validate()?;
    let k = echo.grid.wavenumbers();
    let nf = k.len();
    let k0 = k[0];
    let dk = if nf > 1 { (k[nf - 1] - k0) / (nf - 1) as f64 } else { 0.0 };
    let sign = -PHASE_SIGN;

    let voxels = (0..grid.n_voxels())
        .into_par_iter()
        .map(|v| {
            let p = grid.position_of(v);
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, ch) in echo.channels.iter().enumerate() {
                let r = round_trip_exact(ch.tx_pos, ch.rx_pos, p);
                let s = echo.channel_samples(l);
                // Σ_i s_i w^i by Horner, w = e^{±j dk R}
                let w = Complex64::cis(sign * dk * r);
                let mut h = s[nf - 1];
                for si in s[..nf - 1].iter().rev() {
                    h = h * w + si;
                }
                acc += h * Complex64::cis(sign * k0 * r);
            }
            acc
        })
        .collect();
    ReflectivityVolume::new(*grid, voxels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{synthesize_echo, FrequencyGrid, TargetScene};
    use crate::geometry::{expand_channels, planar_grid_poses, MimoArrayLayout, Vec3};
    use crate::reconstruct::UniformAxis;

    fn setup() -> (EchoSet, ImageGrid) {
        let poses = planar_grid_poses(9, 9, 0.004, 0.0);
        let layout = MimoArrayLayout::two_by_four(3.79e-3);
        let channels = expand_channels(&layout, &poses, 0.0).unwrap();
        let grid = FrequencyGrid::linspace(77e9, 81e9, 8).unwrap();
        let scene = TargetScene::from_points(&[Vec3::new(0.004, -0.002, 0.2)]);
        let echo = synthesize_echo(&scene, &channels, &grid, None).unwrap();
        let img = ImageGrid::new(
            UniformAxis::from_range(-0.01, 0.01, 0.002).unwrap(),
            UniformAxis::from_range(-0.01, 0.01, 0.002).unwrap(),
            UniformAxis::from_range(0.17, 0.23, 0.006).unwrap(),
        )
        .unwrap();
        (echo, img)
    }

    #[test]
    fn matches_direct_sum() {
        let (echo, img) = setup();
        let vol = bpa_reconstruct(&echo, &img).unwrap();
        let k = echo.grid.wavenumbers();
        for &v in &[0usize, 17, 300, img.n_voxels() - 1] {
            let p = img.position_of(v);
            let mut direct = Complex64::new(0.0, 0.0);
            for (l, ch) in echo.channels.iter().enumerate() {
                let r = (ch.tx_pos - p).norm() + (ch.rx_pos - p).norm();
                for (s, &ki) in echo.channel_samples(l).iter().zip(&k) {
                    direct += s * Complex64::cis(ki * r);
                }
            }
            assert!((vol.voxels[v] - direct).norm() <= 1e-9 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn peak_at_scatterer() {
        let (echo, img) = setup();
        let vol = bpa_reconstruct(&echo, &img).unwrap();
        let p = vol.peak_position();
        assert!((p.x - 0.004).abs() < 1e-9 && (p.y + 0.002).abs() < 1e-9 && (p.z - 0.2).abs() < 1e-9);
    }

    #[test]
    fn zero_echo_gives_zero_volume() {
        let (mut echo, img) = setup();
        echo.samples.iter_mut().for_each(|s| *s = Complex64::new(0.0, 0.0));
        let vol = bpa_reconstruct(&echo, &img).unwrap();
        assert!(vol.voxels.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let (echo, img) = setup();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| bpa_reconstruct(&echo, &img).unwrap());
        let b = many.install(|| bpa_reconstruct(&echo, &img).unwrap());
        assert_eq!(a, b);
    }
}
