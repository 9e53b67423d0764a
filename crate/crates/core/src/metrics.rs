//! Resolution predictions, point-spread-function cuts, peak extraction and
//! image similarity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Vec3;
use crate::reconstruct::{ImageGrid, ReflectivityVolume};
use crate::SPEED_OF_LIGHT;

/// Default floor for peak candidates, relative to the global peak.
pub const DEFAULT_PEAK_FLOOR_DB: f64 = -20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionPrediction {
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_z: f64,
}

/// `δ_x = λ_c Z₀ / (2 D_x)`, `δ_y = λ_c Z₀ / (2 D_y)`, `δ_z = c / (2B)`.
pub fn theoretical_resolution(
    aperture_dx: f64,
    aperture_dy: f64,
    z0_to_target: f64,
    center_wavelength: f64,
    bandwidth: f64,
) -> Result<ResolutionPrediction> {
    let all = [aperture_dx, aperture_dy, z0_to_target, center_wavelength, bandwidth];
    if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return invalid("aperture sizes, range, wavelength and bandwidth must be positive");
    }
    Ok(ResolutionPrediction {
        delta_x: center_wavelength * z0_to_target / (2.0 * aperture_dx),
        delta_y: center_wavelength * z0_to_target / (2.0 * aperture_dy),
        delta_z: SPEED_OF_LIGHT / (2.0 * bandwidth),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => invalid(format!("unknown axis '{s}'")),
        }
    }
}

/// Axis-aligned magnitude cut, in dB relative to the global peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub coords: Vec<f64>,
    pub db: Vec<f64>,
}

impl Profile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("coordinate_m,magnitude_db\n");
        for (c, d) in self.coords.iter().zip(&self.db) {
            s.push_str(&format!("{c:.9},{d:.6}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsfReport {
    pub axis: Axis,
    /// −3 dB mainlobe width (m).
    pub mainlobe_width_3db: f64,
    /// Highest sidelobe outside the first nulls (dB); `None` when the
    /// mainlobe has no null on one of its sides.
    pub peak_sidelobe_level: Option<f64>,
    /// Peak coordinate along `axis` (m).
    pub peak_location: f64,
}

impl PsfReport {
    pub const CSV_HEADER: &'static str = "axis,mainlobe_width_3db_m,peak_sidelobe_level_db,peak_location_m";

    pub fn csv_row(&self) -> String {
        let psl = self.peak_sidelobe_level.map(|v| format!("{v:.6}")).unwrap_or_else(|| "na".into());
        format!("{},{:.9},{},{:.9}", self.axis, self.mainlobe_width_3db, psl, self.peak_location)
    }
}

fn unique_peak(volume: &ReflectivityVolume) -> Result<(usize, f64)> {
    let (idx, peak) = volume.peak();
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::NoPeak("volume is zero or not finite".into()));
    }
    let ties = volume.voxels.iter().filter(|v| v.norm() == peak).count();
    if ties > 1 {
        return Err(Error::NoPeak(format!("{ties} voxels share the global maximum")));
    }
    Ok((idx, peak))
}

fn to_db(m: f64, peak: f64) -> f64 {
    if m > 0.0 {
        20.0 * (m / peak).log10()
    } else {
        -400.0
    }
}

/// Cut along `axis` through the global peak and its −3 dB / sidelobe
/// measurements.
pub fn psf_profile(volume: &ReflectivityVolume, axis: Axis) -> Result<(Profile, PsfReport)> {
    let (idx, peak) = unique_peak(volume)?;
    let g = &volume.grid;
    let at = g.unravel(idx);
    let a = [g.x, g.y, g.z][axis.index()];
    let db: Vec<f64> = (0..a.len)
        .map(|j| {
            let mut c = at;
            c[axis.index()] = j;
            to_db(volume.at(c[0], c[1], c[2]).norm(), peak)
        })
        .collect();
    let coords = a.coords();
    let p = at[axis.index()];

    let crossing = |dir: isize| -> Option<f64> {
        let mut j = p as isize;
        loop {
            let next = j + dir;
            if next < 0 || next >= db.len() as isize {
                return None;
            }
            let (d0, d1) = (db[j as usize], db[next as usize]);
            if d1 <= -3.0 {
                let f = (d0 + 3.0) / (d0 - d1);
                return Some(coords[j as usize] + f * (coords[next as usize] - coords[j as usize]));
            }
            j = next;
        }
    };
    let (Some(lo), Some(hi)) = (crossing(-1), crossing(1)) else {
        return Err(Error::NoPeak(format!(
            "the {axis}-profile does not fall below -3 dB on both sides of the peak"
        )));
    };

    let null = |dir: isize| -> Option<usize> {
        let mut j = p as isize;
        loop {
            let next = j + dir;
            if next < 0 || next >= db.len() as isize {
                return None;
            }
            if db[next as usize] > db[j as usize] {
                return Some(j as usize);
            }
            j = next;
        }
    };
    let psl = match (null(-1), null(1)) {
        (Some(l), Some(r)) => db[..l]
            .iter()
            .chain(&db[r + 1..])
            .copied()
            .reduce(f64::max),
        _ => None,
    };

    let report = PsfReport {
        axis,
        mainlobe_width_3db: hi - lo,
        peak_sidelobe_level: psl,
        peak_location: coords[p],
    };
    Ok((Profile { coords, db }, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: Vec3,
    /// Magnitude relative to the global peak.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakReport {
    /// Descending magnitude.
    pub peaks: Vec<Peak>,
    pub warnings: Vec<String>,
}

impl PeakReport {
    pub fn positions(&self) -> Vec<Vec3> {
        self.peaks.iter().map(|p| p.position).collect()
    }
}

/// Up to `n_peaks` local maxima above [`DEFAULT_PEAK_FLOOR_DB`], taken
/// greedily in descending magnitude and at least `min_separation` apart.
pub fn peak_locations(volume: &ReflectivityVolume, n_peaks: usize, min_separation: f64) -> Result<PeakReport> {
    peak_locations_with_floor(volume, n_peaks, min_separation, DEFAULT_PEAK_FLOOR_DB)
}

pub fn peak_locations_with_floor(
    volume: &ReflectivityVolume,
    n_peaks: usize,
    min_separation: f64,
    floor_db: f64,
) -> Result<PeakReport> {
    if n_peaks == 0 {
        return invalid("n_peaks must be at least 1");
    }
    if !(min_separation >= 0.0) {
        return invalid("min_separation must be non-negative");
    }
    let mag = volume.normalized_magnitude();
    if mag.iter().all(|&m| m == 0.0) {
        return Err(Error::NoPeak("volume is zero".into()));
    }
    let floor = 10f64.powf(floor_db / 20.0);
    let g = &volume.grid;
    let mut candidates: Vec<usize> = (0..mag.len())
        .filter(|&i| mag[i] >= floor && is_local_max(&mag, g, i))
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));

    let mut report = PeakReport::default();
    let mut suppressed = 0;
    for i in candidates {
        if report.peaks.len() == n_peaks {
            break;
        }
        let p = g.position_of(i);
        if report.peaks.iter().any(|q| (q.position - p).norm() < min_separation) {
            suppressed += 1;
            continue;
        }
        report.peaks.push(Peak {
            position: p,
            magnitude: mag[i],
        });
    }
    if report.peaks.len() < n_peaks {
        report.warnings.push(format!(
            "found {} of {} requested peaks above {} dB",
            report.peaks.len(),
            n_peaks,
            floor_db
        ));
        if suppressed > 0 {
            report.warnings.push(format!(
                "{suppressed} local maxima merged into stronger peaks within {min_separation} m"
            ));
        }
    }
    Ok(report)
}

fn is_local_max(mag: &[f64], g: &ImageGrid, i: usize) -> bool {
    let [ix, iy, iz] = g.unravel(i);
    let dims = g.dims();
    let range = |c: usize, n: usize| c.saturating_sub(1)..=(c + 1).min(n - 1);
    for a in range(ix, dims[0]) {
        for b in range(iy, dims[1]) {
            for c in range(iz, dims[2]) {
                if mag[g.index(a, b, c)] > mag[i] {
                    return false;
                }
            }
        }
    }
    true
}

/// Normalized cross-correlation `Σab / (|a| |b|)` of the peak-normalized
/// magnitudes. Lies in `[0, 1]` since magnitudes are non-negative.
pub fn image_correlation(a: &ReflectivityVolume, b: &ReflectivityVolume) -> Result<f64> {
    if a.grid != b.grid {
        return invalid("volumes are defined on different grids");
    }
    let (x, y) = (a.normalized_magnitude(), b.normalized_magnitude());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (u, v) in x.iter().zip(&y) {
        sxy += u * v;
        sxx += u * u;
        syy += v * v;
    }
    if sxx == 0.0 || syy == 0.0 {
        return invalid("correlation is undefined for a zero volume");
    }
    Ok((sxy / (sxx * syy).sqrt()).min(1.0))
}

/// A reference point paired with its nearest unclaimed detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMatch {
    pub reference: Vec3,
    pub matched: Option<Vec3>,
}

impl PeakMatch {
    pub fn offset(&self) -> Option<Vec3> {
        self.matched.map(|m| m - self.reference)
    }

    /// Whether the detection lies within one voxel of the reference on
    /// every axis.
    pub fn within_voxel(&self, grid: &ImageGrid) -> bool {
        let v = grid.voxel_size();
        self.offset()
            .is_some_and(|d| d.x.abs() <= v.x * (1.0 + 1e-9) && d.y.abs() <= v.y * (1.0 + 1e-9) && d.z.abs() <= v.z * (1.0 + 1e-9))
    }
}

/// Greedy nearest-neighbour assignment, closest pairs first.
pub fn match_peaks(reference: &[Vec3], detected: &[Vec3]) -> Vec<PeakMatch> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(reference.len() * detected.len());
    for (i, r) in reference.iter().enumerate() {
        for (j, d) in detected.iter().enumerate() {
            pairs.push(((*r - *d).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out: Vec<PeakMatch> = reference
        .iter()
        .map(|&r| PeakMatch {
            reference: r,
            matched: None,
        })
        .collect();
    let mut taken = vec![false; detected.len()];
    for (_, i, j) in pairs {
        if out[i].matched.is_none() && !taken[j] {
            out[i].matched = Some(detected[j]);
            taken[j] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::UniformAxis;
    use num_complex::Complex64;

    fn line_volume(values: &[f64], step: f64) -> ReflectivityVolume {
        let g = ImageGrid::new(
            UniformAxis::single(0.0),
            UniformAxis::new(0.0, step, values.len()).unwrap(),
            UniformAxis::single(0.5),
        )
        .unwrap();
        ReflectivityVolume::new(g, values.iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap()
    }

    fn sinc_volume(n: usize, width: f64, center: f64, step: f64) -> ReflectivityVolume {
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 * step - center) / width;
                if u == 0.0 {
                    1.0
                } else {
                    ((std::f64::consts::PI * u).sin() / (std::f64::consts::PI * u)).abs()
                }
            })
            .collect();
        line_volume(&vals, step)
    }

    #[test]
    fn resolution_examples() {
        let r = theoretical_resolution(0.25, 0.25, 0.5, 3.79e-3, 4e9).unwrap();
        assert!((r.delta_z - 0.037474).abs() < 1e-5);
        assert!((r.delta_x - 3.79e-3).abs() < 1e-12);
        let r2 = theoretical_resolution(0.5, 0.25, 0.5, 3.79e-3, 4e9).unwrap();
        assert!((r2.delta_x - r.delta_x / 2.0).abs() < 1e-15);
        assert!(theoretical_resolution(0.0, 0.25, 0.5, 3.79e-3, 4e9).is_err());
        assert!(theoretical_resolution(0.25, 0.25, 0.5, 3.79e-3, -1.0).is_err());
    }

    #[test]
    fn sinc_width_and_sidelobe() {
        // |sinc(u)| has a -3 dB width of 0.8859 u and first sidelobe at -13.26 dB
        let (n, w, step) = (801, 0.01, 0.0001);
        let vol = sinc_volume(n, w, 0.04, step);
        let (profile, rep) = psf_profile(&vol, Axis::Y).unwrap();
        assert_eq!(profile.db.len(), n);
        assert!((rep.mainlobe_width_3db - 0.88589 * w).abs() < 2e-3 * w, "{}", rep.mainlobe_width_3db);
        let psl = rep.peak_sidelobe_level.unwrap();
        assert!((psl + 13.26).abs() < 0.05, "{psl}");
        assert!((rep.peak_location - 0.04).abs() < 1e-12);
    }

    #[test]
    fn width_ignores_global_scale_and_missing_nulls() {
        let vals = [0.1, 0.3, 0.6, 1.0, 0.6, 0.3, 0.1];
        let (_, a) = psf_profile(&line_volume(&vals, 1.0), Axis::Y).unwrap();
        let scaled: Vec<f64> = vals.iter().map(|v| v * 7.5).collect();
        let (_, b) = psf_profile(&line_volume(&scaled, 1.0), Axis::Y).unwrap();
        assert!((a.mainlobe_width_3db - b.mainlobe_width_3db).abs() < 1e-12);
        assert_eq!(a.peak_sidelobe_level, None);
    }

    #[test]
    fn degenerate_volumes_have_no_peak() {
        assert!(matches!(psf_profile(&line_volume(&[0.0; 5], 1.0), Axis::Y), Err(Error::NoPeak(_))));
        assert!(matches!(psf_profile(&line_volume(&[1.0; 5], 1.0), Axis::Y), Err(Error::NoPeak(_))));
        // the single-sample x axis has no width
        assert!(matches!(
            psf_profile(&line_volume(&[0.1, 1.0, 0.1], 1.0), Axis::X),
            Err(Error::NoPeak(_))
        ));
    }

    #[test]
    fn peaks_and_exclusion_radius() {
        let mut vals = vec![0.0; 40];
        vals[10] = 1.0;
        vals[30] = 0.8;
        vals[13] = 0.9;
        let vol = line_volume(&vals, 0.001);
        let all = peak_locations(&vol, 3, 0.001).unwrap();
        assert_eq!(all.peaks.len(), 3);
        assert!(all.warnings.is_empty());
        assert!((all.peaks[0].position.y - 0.010).abs() < 1e-12);
        assert!((all.peaks[1].position.y - 0.013).abs() < 1e-12);
        let merged = peak_locations(&vol, 3, 0.005).unwrap();
        assert_eq!(merged.peaks.len(), 2);
        assert!(!merged.warnings.is_empty());
        assert!(peak_locations(&vol, 0, 0.001).is_err());
        assert!(peak_locations(&line_volume(&[0.0; 4], 1.0), 1, 0.0).is_err());
    }

    #[test]
    fn correlation_properties() {
        let a = sinc_volume(101, 0.01, 0.005, 0.0002);
        let b = sinc_volume(101, 0.013, 0.006, 0.0002);
        assert!((image_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let ab = image_correlation(&a, &b).unwrap();
        assert!((ab - image_correlation(&b, &a).unwrap()).abs() < 1e-15);
        let mut scaled = b.clone();
        scaled.voxels.iter_mut().for_each(|v| *v *= 3.0);
        assert!((ab - image_correlation(&a, &scaled).unwrap()).abs() < 1e-12);
        let zero = ReflectivityVolume::zeros(a.grid);
        assert!(image_correlation(&a, &zero).is_err());
        let other = sinc_volume(100, 0.01, 0.005, 0.0002);
        assert!(image_correlation(&a, &other).is_err());
        let u = line_volume(&[1.0, 0.0, 0.0, 0.0], 1.0);
        let v = line_volume(&[1.0, 1.0, 0.0, 0.0], 1.0);
        let w = line_volume(&[0.0, 0.0, 2.0, 0.0], 1.0);
        assert!((image_correlation(&u, &v).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(image_correlation(&u, &w).unwrap(), 0.0);
    }

    #[test]
    fn matching_prefers_closest_pairs() {
        let r = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let d = [Vec3::new(0.9, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0)];
        let m = match_peaks(&r, &d);
        assert_eq!(m[0].matched, Some(d[1]));
        assert_eq!(m[1].matched, Some(d[0]));
        assert_eq!(match_peaks(&r, &d[..1])[0].matched, None);
    }
}
