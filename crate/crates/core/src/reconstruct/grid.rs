use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Vec3;

/// `len` samples at `start + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformAxis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformAxis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        let axis = Self { start, step, len };
        axis.validate()?;
        Ok(axis)
    }

    /// A single coordinate.
    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            step: 1.0,
            len: 1,
        }
    }

    /// Inclusive range; `stop - start` is rounded to a whole number of steps.
    pub fn from_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return invalid(format!("axis range [{start}, {stop}] with step {step} is not increasing"));
        }
        Self::new(start, step, ((stop - start) / step).round() as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return invalid("axis is empty");
        }
        if !self.start.is_finite() || !self.step.is_finite() {
            return invalid("axis start and step must be finite");
        }
        if self.len > 1 && self.step <= 0.0 {
            return invalid("axis step must be positive");
        }
        Ok(())
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.coord(i)).collect()
    }

    pub fn stop(&self) -> f64 {
        self.coord(self.len - 1)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.stop())
    }

    /// Distance between the first and last sample.
    pub fn span(&self) -> f64 {
        self.stop() - self.start
    }

    /// Spacing used for "within one voxel" comparisons; the step for
    /// multi-sample axes, infinity for a single sample.
    pub fn resolution(&self) -> f64 {
        if self.len > 1 {
            self.step
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageGrid {
    pub x: UniformAxis,
    pub y: UniformAxis,
    pub z: UniformAxis,
}

impl ImageGrid {
    pub fn new(x: UniformAxis, y: UniformAxis, z: UniformAxis) -> Result<Self> {
        let g = Self { x, y, z };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        self.z.validate()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.x.len, self.y.len, self.z.len]
    }

    pub fn n_voxels(&self) -> usize {
        self.x.len * self.y.len * self.z.len
    }

    /// Row-major index, z fastest.
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.y.len + iy) * self.z.len + iz
    }

    pub fn unravel(&self, index: usize) -> [usize; 3] {
        let iz = index % self.z.len;
        let rest = index / self.z.len;
        [rest / self.y.len, rest % self.y.len, iz]
    }

    pub fn position(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        Vec3::new(self.x.coord(ix), self.y.coord(iy), self.z.coord(iz))
    }

    pub fn position_of(&self, index: usize) -> Vec3 {
        let [ix, iy, iz] = self.unravel(index);
        self.position(ix, iy, iz)
    }

    /// Per-axis voxel spacing (infinite for single-sample axes).
    pub fn voxel_size(&self) -> Vec3 {
        Vec3::new(self.x.resolution(), self.y.resolution(), self.z.resolution())
    }
}

/// Complex image on an [`ImageGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityVolume {
    pub grid: ImageGrid,
    pub voxels: Vec<Complex64>,
}

impl ReflectivityVolume {
    pub fn new(grid: ImageGrid, voxels: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if voxels.len() != grid.n_voxels() {
            return invalid(format!(
                "volume has {} voxels but the grid holds {}",
                voxels.len(),
                grid.n_voxels()
            ));
        }
        Ok(Self { grid, voxels })
    }

    pub fn zeros(grid: ImageGrid) -> Self {
        Self {
            voxels: vec![Complex64::new(0.0, 0.0); grid.n_voxels()],
            grid,
        }
    }

    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> Complex64 {
        self.voxels[self.grid.index(ix, iy, iz)]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.voxels.iter().map(|v| v.norm()).collect()
    }

    /// Magnitudes divided by the peak magnitude (all zeros stay zero).
    pub fn normalized_magnitude(&self) -> Vec<f64> {
        let mut m = self.magnitude();
        let peak = m.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            m.iter_mut().for_each(|v| *v /= peak);
        }
        m
    }

    /// Index and magnitude of the largest voxel; ties resolve to the lowest
    /// index.
    pub fn peak(&self) -> (usize, f64) {
        self.voxels
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bm), (i, v)| {
                let m = v.norm();
                if m > bm {
                    (i, m)
                } else {
                    (bi, bm)
                }
            })
    }

    pub fn peak_position(&self) -> Vec3 {
        self.grid.position_of(self.peak().0)
    }

    /// Magnitudes of the `iz`-th x-y plane, `[n_x × n_y]` row-major.
    pub fn z_slice(&self, iz: usize) -> Vec<f64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.x.len * g.y.len);
        for ix in 0..g.x.len {
            for iy in 0..g.y.len {
                out.push(self.at(ix, iy, iz).norm());
            }
        }
        out
    }
}
