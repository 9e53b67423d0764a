use mpms_core::format::{decode_dump, encode_dump, read_dump, write_dump, Dump};
use mpms_core::geometry::{
    check_far_field, generate_trajectory, sampling_bounds, MimoArrayLayout, TrajectorySpec,
};
use mpms_core::metrics::{image_correlation, psf_profile, theoretical_resolution, Axis};
use mpms_core::reconstruct::{ImageGrid, ReflectivityVolume, UniformAxis};
use mpms_core::{expand_channels, synthesize_echo, Complex64, FrequencyGrid, TargetScene, Vec3};
use proptest::prelude::*;

fn volume(values: &[f64]) -> ReflectivityVolume {
    let grid = ImageGrid::new(
        UniformAxis::single(0.0),
        UniformAxis::new(-0.01, 0.0005, values.len()).unwrap(),
        UniformAxis::single(0.5),
    )
    .unwrap();
    ReflectivityVolume::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap()
}

fn sinc2(n: usize, width: f64, shift: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = (i as f64 - n as f64 / 2.0) * 0.0005 - shift;
            let u = std::f64::consts::PI * x / width;
            if u == 0.0 { 1.0 } else { (u.sin() / u).abs() }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn far_field_is_monotone(dx in -0.01..0.01f64, dy in -0.01..0.01f64, r in 0.05..1.0f64,
                             eps in 0.001..0.1f64, gr in 1.0..3.0f64, ge in 1.0..3.0f64) {
        let lc = 3.79e-3;
        if check_far_field(dx, dy, lc, r, eps).unwrap() {
            prop_assert!(check_far_field(dx, dy, lc, r * gr, eps).unwrap());
            prop_assert!(check_far_field(dx, dy, lc, r, eps * ge).unwrap());
        }
    }

    #[test]
    fn sampling_bounds_scale_linearly(r in 0.1..10.0f64, v in 0.01..5.0f64) {
        let lc = 3.79e-3;
        let a = sampling_bounds(r, v, lc).unwrap();
        let b = sampling_bounds(2.0 * r, 2.0 * v, lc).unwrap();
        prop_assert!((b.prf_min - 2.0 * a.prf_min).abs() <= 1e-12 * b.prf_min);
        prop_assert!((2.0 * b.delta_f_max - a.delta_f_max).abs() <= 1e-6 * a.delta_f_max);
    }

    #[test]
    fn trajectory_is_a_pure_function(seed in any::<u64>(), ex in 0.0..0.2f64, dz in 0.0..0.2f64,
                                     smooth in 0.005..1.0f64, n in 2usize..300) {
        let spec = TrajectorySpec { extent_x: ex, extent_y: 0.125, z_deviation_max: dz, n_samples: n,
                                    smoothness: smooth, seed };
        let a = generate_trajectory(&spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let b = pool.install(|| generate_trajectory(&spec).unwrap());
        prop_assert_eq!(&a, &b);
        let mean = a.iter().map(|p| p.position.z).sum::<f64>() / n as f64;
        for p in &a {
            prop_assert!(p.position.x.abs() <= ex && p.position.y.abs() <= 0.125);
            prop_assert!((p.position.z - mean).abs() <= dz + 1e-12);
        }
    }

    #[test]
    fn dump_round_trip_is_bit_exact(seed in 0u64..1000, py in -0.1..0.1f64, pz in 0.2..0.6f64) {
        let spec = TrajectorySpec { extent_x: 0.0, extent_y: 0.05, z_deviation_max: 0.01, n_samples: 6,
                                    smoothness: 0.3, seed };
        let poses = generate_trajectory(&spec).unwrap();
        let channels = expand_channels(&MimoArrayLayout::two_by_four(3.79e-3), &poses, 0.0).unwrap();
        let grid = FrequencyGrid::linspace(77e9, 81e9, 5).unwrap();
        let echo = synthesize_echo(&TargetScene::from_points(&[Vec3::new(0.0, py, pz)]), &channels, &grid, None).unwrap();
        let dump = Dump::Echo(echo);
        let bytes = encode_dump(&dump).unwrap();
        let back = decode_dump(&bytes).unwrap();
        prop_assert_eq!(encode_dump(&back).unwrap(), bytes);
        prop_assert_eq!(back, dump);
    }

    #[test]
    fn resolution_is_scale_consistent(d in 0.01..1.0f64, z in 0.1..2.0f64) {
        let a = theoretical_resolution(d, d, z, 3.79e-3, 4e9).unwrap();
        let b = theoretical_resolution(2.0 * d, 2.0 * d, 2.0 * z, 3.79e-3, 4e9).unwrap();
        prop_assert!((a.delta_x - b.delta_x).abs() <= 1e-15);
    }

    #[test]
    fn psf_width_ignores_scaling(width in 0.002..0.006f64, shift in -0.002..0.002f64, s in 0.001..1000.0f64) {
        let a = volume(&sinc2(81, width, shift));
        let b = volume(&sinc2(81, width, shift).iter().map(|v| v * s).collect::<Vec<_>>());
        let (_, ra) = psf_profile(&a, Axis::Y).unwrap();
        let (_, rb) = psf_profile(&b, Axis::Y).unwrap();
        prop_assert!((ra.mainlobe_width_3db - rb.mainlobe_width_3db).abs() <= 1e-9 * ra.mainlobe_width_3db);
    }

    #[test]
    fn correlation_is_symmetric_and_scale_free(w1 in 0.002..0.006f64, w2 in 0.002..0.006f64,
                                               s in 0.01..100.0f64) {
        let a = volume(&sinc2(61, w1, 0.0));
        let b = volume(&sinc2(61, w2, 0.001));
        let scaled = volume(&sinc2(61, w2, 0.001).iter().map(|v| v * s).collect::<Vec<_>>());
        let ab = image_correlation(&a, &b).unwrap();
        prop_assert!((ab - image_correlation(&b, &a).unwrap()).abs() <= 1e-15);
        prop_assert!((ab - image_correlation(&a, &scaled).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }
}

#[test]
fn dump_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("mpms-props-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let poses = generate_trajectory(&TrajectorySpec {
        extent_x: 0.0,
        extent_y: 0.05,
        z_deviation_max: 0.0,
        n_samples: 4,
        smoothness: 0.5,
        seed: 1,
    })
    .unwrap();
    let channels = expand_channels(&MimoArrayLayout::monostatic(), &poses, 0.0).unwrap();
    let grid = FrequencyGrid::linspace(77e9, 81e9, 3).unwrap();
    let echo = synthesize_echo(&TargetScene::from_points(&[Vec3::new(0.0, 0.0, 0.3)]), &channels, &grid, None).unwrap();
    let path = dir.join("echo.mpms");
    write_dump(&path, &Dump::Echo(echo.clone())).unwrap();
    assert_eq!(read_dump(&path).unwrap(), Dump::Echo(echo));
    std::fs::remove_dir_all(&dir).unwrap();
}
