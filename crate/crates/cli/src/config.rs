//! Scenario configuration. Every key carries its unit in its name and
//! unknown keys are rejected.

use std::path::Path;

use mpms_core::geometry::{
    expand_channels, generate_trajectory, planar_grid_poses, reference_plane, sampling_bounds, snap_poses,
    MimoArrayLayout, RadarPose, SamplingReport, TrajectorySpec, Vec3, ZPolicy,
};
use mpms_core::reconstruct::{ImageGrid, Method, RmaParams, UniformAxis};
use mpms_core::{scenes, Complex64, EchoSet, FrequencyGrid, Scatterer, TargetScene};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Drives the trajectory and the optional noise.
    pub seed: u64,
    pub radar: RadarConfig,
    pub trajectory: TrajectoryConfig,
    pub scene: SceneConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emulation: Option<EmulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    pub reconstruction: ReconstructionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub n_frequencies: usize,
    pub layout: LayoutConfig,
    /// Platform speed bound used for the capture-rate check.
    #[serde(default = "default_speed")]
    pub max_speed_m_per_s: f64,
}

fn default_speed() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutAxis {
    #[default]
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutConfig {
    Monostatic,
    /// Two Tx and four Rx on a line along `axis`, scaled by the center
    /// wavelength.
    TwoByFour {
        #[serde(default)]
        axis: LayoutAxis,
    },
    Custom {
        tx_offsets_m: Vec<[f64; 3]>,
        rx_offsets_m: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    /// Semi-smooth random curve, seeded by the top-level seed.
    Random {
        extent_x_m: f64,
        extent_y_m: f64,
        z_deviation_max_m: f64,
        n_samples: usize,
        smoothness: f64,
    },
    /// Uniform `nx * ny` raster centered on the origin.
    Planar {
        nx: usize,
        ny: usize,
        step_m: f64,
        #[serde(default)]
        z_m: f64,
    },
    Explicit {
        poses_m: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Named reference scene (`"utd"`), used in place of `scatterers`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub scatterers: Vec<ScattererConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererConfig {
    pub position_m: [f64; 3],
    /// Complex reflectivity `[re, im]`.
    #[serde(default = "unit_reflectivity")]
    pub reflectivity: [f64; 2],
}

fn unit_reflectivity() -> [f64; 2] {
    [1.0, 0.0]
}

/// Snaps every pose onto a lattice, emulating an irregular scan cut out of
/// stacked mechanical planar scans. A zero step leaves that axis free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulationConfig {
    pub lattice_step_m: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Fixed reference plane; the mean pose height when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_m: Option<f64>,
    pub grid: GridConfig,
    #[serde(default)]
    pub rma: RmaParams,
}

fn default_method() -> Method {
    Method::RmaCompensated
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x: AxisConfig,
    pub y: AxisConfig,
    pub z: AxisConfig,
}

/// Inclusive range; `start_m == stop_m` gives a single sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub start_m: f64,
    pub stop_m: f64,
    pub step_m: f64,
}

impl AxisConfig {
    pub fn to_axis(self) -> Result<UniformAxis> {
        if self.start_m == self.stop_m {
            return Ok(UniformAxis::single(self.start_m));
        }
        Ok(UniformAxis::from_range(self.start_m, self.stop_m, self.step_m)?)
    }
}

impl std::str::FromStr for AxisConfig {
    type Err = String;

    /// `start:stop:step` in meters, or a single value.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match parts[..] {
            [v] => Ok(Self { start_m: v, stop_m: v, step_m: 1.0 }),
            [a, b, c] => Ok(Self { start_m: a, stop_m: b, step_m: c }),
            _ => Err(format!("expected start:stop:step or a single value, got '{s}'")),
        }
    }
}

impl GridConfig {
    pub fn to_grid(self) -> Result<ImageGrid> {
        Ok(ImageGrid::new(self.x.to_axis()?, self.y.to_axis()?, self.z.to_axis()?)?)
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        let r = &self.radar;
        Ok(FrequencyGrid::from_center(r.center_frequency_hz, r.bandwidth_hz, r.n_frequencies)?)
    }

    pub fn layout(&self) -> Result<MimoArrayLayout> {
        let lc = self.frequency_grid()?.center_wavelength();
        Ok(match &self.radar.layout {
            LayoutConfig::Monostatic => MimoArrayLayout::monostatic(),
            LayoutConfig::TwoByFour { axis: LayoutAxis::X } => MimoArrayLayout::two_by_four(lc),
            LayoutConfig::TwoByFour { axis: LayoutAxis::Y } => MimoArrayLayout::two_by_four(lc).swap_xy(),
            LayoutConfig::Custom { tx_offsets_m, rx_offsets_m } => MimoArrayLayout::new(
                tx_offsets_m.iter().map(|&v| Vec3::from(v)).collect(),
                rx_offsets_m.iter().map(|&v| Vec3::from(v)).collect(),
            )?,
        })
    }

    pub fn poses(&self) -> Result<Vec<RadarPose>> {
        let poses = match &self.trajectory {
            &TrajectoryConfig::Random {
                extent_x_m,
                extent_y_m,
                z_deviation_max_m,
                n_samples,
                smoothness,
            } => generate_trajectory(&TrajectorySpec {
                extent_x: extent_x_m,
                extent_y: extent_y_m,
                z_deviation_max: z_deviation_max_m,
                n_samples,
                smoothness,
                seed: self.seed,
            })?,
            &TrajectoryConfig::Planar { nx, ny, step_m, z_m } => {
                if nx == 0 || ny == 0 || !(step_m > 0.0) {
                    return Err(CliError::Config("planar trajectory needs nx, ny >= 1 and step_m > 0".into()));
                }
                planar_grid_poses(nx, ny, step_m, z_m)
            }
            TrajectoryConfig::Explicit { poses_m } => poses_m
                .iter()
                .enumerate()
                .map(|(i, &p)| RadarPose::new(Vec3::from(p), i))
                .collect(),
        };
        Ok(match &self.emulation {
            Some(e) => snap_poses(&poses, Vec3::from(e.lattice_step_m)),
            None => poses,
        })
    }

    pub fn scene(&self) -> Result<TargetScene> {
        match (&self.scene.preset, self.scene.scatterers.is_empty()) {
            (Some(_), false) => Err(CliError::Config("scene sets both preset and scatterers".into())),
            (Some(name), true) => preset(name),
            (None, _) => Ok(TargetScene::new(
                self.scene
                    .scatterers
                    .iter()
                    .map(|s| Scatterer {
                        position: Vec3::from(s.position_m),
                        reflectivity: Complex64::new(s.reflectivity[0], s.reflectivity[1]),
                    })
                    .collect(),
            )),
        }
    }

    pub fn grid(&self) -> Result<ImageGrid> {
        self.reconstruction.grid.to_grid()
    }

    pub fn z0(&self, poses: &[RadarPose]) -> Result<f64> {
        let policy = self.reconstruction.z0_m.map_or(ZPolicy::Mean, ZPolicy::Fixed);
        Ok(reference_plane(poses, policy)?)
    }

    /// Synthesizes the echo and audits the sampling of the scan.
    pub fn build_echo(&self) -> Result<(EchoSet, SamplingReport)> {
        let grid = self.frequency_grid()?;
        let poses = self.poses()?;
        let z0 = self.z0(&poses)?;
        let channels = expand_channels(&self.layout()?, &poses, z0)?;
        let scene = self.scene()?;
        let mut echo = mpms_core::synthesize_echo(&scene, &channels, &grid, None)?;
        if let Some(n) = &self.noise {
            mpms_core::echo::add_noise(&mut echo, n.snr_db, self.seed.wrapping_add(1));
        }
        let r_max = scene
            .scatterers
            .iter()
            .flat_map(|s| poses.iter().map(move |p| (s.position - p.position).norm()))
            .fold(0.0, f64::max);
        let mut report = sampling_bounds(r_max.max(f64::MIN_POSITIVE), self.radar.max_speed_m_per_s, grid.center_wavelength())?;
        report.audit(grid.step(), &poses);
        Ok((echo, report))
    }
}

pub fn preset(name: &str) -> Result<TargetScene> {
    match name {
        "utd" => Ok(scenes::utd_letters()),
        other => Err(CliError::Config(format!("unknown scene preset '{other}' (expected utd)"))),
    }
}

/// Parses the `reconstruct` method flag.
pub fn parse_method(s: &str) -> Result<Method> {
    s.parse::<Method>().map_err(|e| CliError::Usage(e.to_string()))
}
