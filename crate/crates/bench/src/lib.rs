//! Shared scenarios for the benchmarks.

use mpms_core::geometry::planar_grid_poses;
use mpms_core::reconstruct::{ImageGrid, UniformAxis};
use mpms_core::{expand_channels, synthesize_echo, Complex64, EchoSet, FrequencyGrid, MimoArrayLayout, TargetScene, Vec3, SPEED_OF_LIGHT};

/// Quarter-wavelength raster spacing at 79 GHz.
pub const STEP: f64 = SPEED_OF_LIGHT / 79e9 / 4.0;

/// Monostatic `n x n` raster over one scatterer at 0.3 m, with an `n x n x 11`
/// image grid around it.
pub fn desk_scene(n: usize) -> (EchoSet, ImageGrid) {
    let poses = planar_grid_poses(n, n, STEP, 0.0);
    let ch = expand_channels(&MimoArrayLayout::monostatic(), &poses, 0.0).expect("valid layout");
    let freqs = FrequencyGrid::linspace(77e9, 81e9, 32).expect("valid band");
    let scene = TargetScene::from_points(&[Vec3::new(0.0, 0.0, 0.3)]);
    let echo = synthesize_echo(&scene, &ch, &freqs, None).expect("nonempty scene");
    let a = UniformAxis::new(-(n as f64 - 1.0) * STEP / 2.0, STEP, n).expect("positive step");
    let z = UniformAxis::from_range(0.25, 0.35, 0.01).expect("increasing range");
    (echo, ImageGrid::new(a, a, z).expect("valid grid"))
}

/// Deterministic pseudo-random points inside `extent` with unit-ish values.
pub fn point_cloud(n: usize, extent: (f64, f64)) -> (Vec<[f64; 2]>, Vec<Complex64>) {
    // golden-ratio sequence; no RNG needed for a fixed benchmark input
    let phi = 0.618_033_988_749_894_9;
    let frac = |v: f64| v - v.floor();
    let p = (0..n)
        .map(|i| {
            let i = i as f64;
            [(frac(i * phi) - 0.5) * extent.0, (frac(i * phi * phi + 0.3) - 0.5) * extent.1]
        })
        .collect();
    let v = (0..n).map(|i| Complex64::from_polar(1.0, i as f64 * 0.7)).collect();
    (p, v)
}
