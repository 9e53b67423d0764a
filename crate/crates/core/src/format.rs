//! On-disk formats.
//!
//! Echo dump, little-endian throughout:
//!
//! | offset | field |
//! |---|---|
//! | 0 | magic `MPMS` |
//! | 4 | `u16` version (1) |
//! | 6 | `u8` flags, bit 0 = compensated |
//! | 7 | `u8` reserved (0) |
//! | 8 | `u32` channel count `C` |
//! | 12 | `u32` frequency count `F` |
//! | 16 | `f64` reference plane `z0` |
//! | 24 | `F × f64` frequencies (Hz) |
//! | | `F × (f64, f64)` pulse spectrum (re, im) |
//! | | `C × 6 f64` tx xyz, rx xyz |
//! | | `C × F × (f64, f64)` samples, channel-major |
//!
//! A compensated dump stores each virtual element as `tx = rx = (x', y', z0)`.
//!
//! Volumes are raw little-endian `f32` peak-normalized magnitudes (x-major,
//! z fastest) with a TOML sidecar describing the axes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::compensation::PlanarSamples;
use crate::echo::{EchoSet, FrequencyGrid};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ChannelGeometry, Vec3};
use crate::reconstruct::{ImageGrid, ReflectivityVolume};

pub const MAGIC: &[u8; 4] = b"MPMS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 24;
const FLAG_COMPENSATED: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub version: u16,
    pub compensated: bool,
    pub n_channels: usize,
    pub n_frequencies: usize,
    pub z0: f64,
}

impl DumpHeader {
    /// Total file length implied by the counts (saturating).
    pub fn expected_len(&self) -> usize {
        let (c, f) = (self.n_channels, self.n_frequencies);
        c.saturating_mul(f)
            .saturating_add(c)
            .saturating_mul(16)
            .saturating_add(24 * f + 32 * c + HEADER_LEN)
    }
}

/// Contents of an echo dump.
#[derive(Debug, Clone, PartialEq)]
pub enum Dump {
    Echo(EchoSet),
    Planar(PlanarSamples),
}

impl Dump {
    pub fn grid(&self) -> &FrequencyGrid {
        match self {
            Dump::Echo(e) => &e.grid,
            Dump::Planar(p) => &p.grid,
        }
    }
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_c64(out: &mut Vec<u8>, v: Complex64) {
    put_f64(out, v.re);
    put_f64(out, v.im);
}

fn encode(
    compensated: bool,
    z0: f64,
    grid: &FrequencyGrid,
    pulse: &[Complex64],
    elements: &[(Vec3, Vec3)],
    samples: &[Complex64],
) -> Result<Vec<u8>> {
    let count = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::InvalidInput(format!("too many {what} for the dump format")))
    };
    let (c, f) = (count(elements.len(), "channels")?, count(grid.len(), "frequencies")?);
    let mut out = Vec::with_capacity(
        DumpHeader {
            version: VERSION,
            compensated,
            n_channels: elements.len(),
            n_frequencies: grid.len(),
            z0,
        }
        .expected_len(),
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(if compensated { FLAG_COMPENSATED } else { 0 });
    out.push(0);
    out.extend_from_slice(&c.to_le_bytes());
    out.extend_from_slice(&f.to_le_bytes());
    put_f64(&mut out, z0);
    grid.frequencies().iter().for_each(|&v| put_f64(&mut out, v));
    pulse.iter().for_each(|&v| put_c64(&mut out, v));
    for (tx, rx) in elements {
        for v in [tx.x, tx.y, tx.z, rx.x, rx.y, rx.z] {
            put_f64(&mut out, v);
        }
    }
    samples.iter().for_each(|&v| put_c64(&mut out, v));
    Ok(out)
}

/// Serializes a multistatic echo. All channels must share the plane `z0`.
pub fn encode_echo(echo: &EchoSet) -> Result<Vec<u8>> {
    echo.validate()?;
    let z0 = echo.channels.first().map_or(0.0, |c| c.z0());
    let elements: Vec<(Vec3, Vec3)> = echo.channels.iter().map(|c| (c.tx_pos, c.rx_pos)).collect();
    encode(false, z0, &echo.grid, &echo.pulse_spectrum, &elements, &echo.samples)
}

pub fn encode_planar(planar: &PlanarSamples) -> Result<Vec<u8>> {
    planar.validate()?;
    let elements: Vec<(Vec3, Vec3)> = planar
        .positions
        .iter()
        .map(|p| {
            let v = Vec3::new(p[0], p[1], planar.z0);
            (v, v)
        })
        .collect();
    encode(true, planar.z0, &planar.grid, &planar.pulse_spectrum, &elements, &planar.samples)
}

pub fn encode_dump(dump: &Dump) -> Result<Vec<u8>> {
    match dump {
        Dump::Echo(e) => encode_echo(e),
        Dump::Planar(p) => encode_planar(p),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> &[u8] {
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        s
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }

    fn c64(&mut self) -> Complex64 {
        let re = self.f64();
        Complex64::new(re, self.f64())
    }
}

/// Parses the fixed header fields without looking at the payload.
fn parse_header(bytes: &[u8]) -> Result<DumpHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corrupt(format!("file has {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("bad magic, not an echo dump".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported dump version {version}")));
    }
    let flags = bytes[6];
    if flags & !FLAG_COMPENSATED != 0 || bytes[7] != 0 {
        return Err(Error::Corrupt(format!("unknown flag bits {flags:#04x}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    Ok(DumpHeader {
        version,
        compensated: flags & FLAG_COMPENSATED != 0,
        n_channels: u32_at(8),
        n_frequencies: u32_at(12),
        z0: f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")),
    })
}

fn check_len(h: &DumpHeader, len: usize) -> Result<()> {
    if len != h.expected_len() {
        return Err(Error::Corrupt(format!(
            "declared {} channels x {} frequencies need {} bytes, file has {}",
            h.n_channels,
            h.n_frequencies,
            h.expected_len(),
            len
        )));
    }
    Ok(())
}

/// Parses the fixed header and checks the total length.
pub fn decode_header(bytes: &[u8]) -> Result<DumpHeader> {
    let h = parse_header(bytes)?;
    check_len(&h, bytes.len())?;
    Ok(h)
}

pub fn decode_dump(bytes: &[u8]) -> Result<Dump> {
    let h = decode_header(bytes)?;
    let corrupt = |e: Error| Error::Corrupt(e.to_string());
    let mut cur = Cursor { bytes, at: HEADER_LEN };
    let (c, f) = (h.n_channels, h.n_frequencies);
    let freqs: Vec<f64> = (0..f).map(|_| cur.f64()).collect();
    let grid = FrequencyGrid::from_frequencies(freqs).map_err(corrupt)?;
    let pulse: Vec<Complex64> = (0..f).map(|_| cur.c64()).collect();
    let elements: Vec<(Vec3, Vec3)> = (0..c)
        .map(|_| {
            let v: Vec<f64> = (0..6).map(|_| cur.f64()).collect();
            (Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
        })
        .collect();
    let samples: Vec<Complex64> = (0..c * f).map(|_| cur.c64()).collect();

    if h.compensated {
        if elements.iter().any(|(t, r)| t != r || t.z != h.z0) {
            return Err(Error::Corrupt("compensated dump holds non-planar elements".into()));
        }
        let planar = PlanarSamples {
            positions: elements.iter().map(|(t, _)| [t.x, t.y]).collect(),
            z0: h.z0,
            grid,
            samples,
            pulse_spectrum: pulse,
        };
        planar.validate().map_err(corrupt)?;
        Ok(Dump::Planar(planar))
    } else {
        let channels = elements
            .iter()
            .map(|&(t, r)| ChannelGeometry::from_elements(t, r, h.z0))
            .collect::<Result<Vec<_>>>()
            .map_err(corrupt)?;
        Ok(Dump::Echo(EchoSet::new(channels, grid, samples, pulse).map_err(corrupt)?))
    }
}

pub fn write_dump(path: &Path, dump: &Dump) -> Result<()> {
    fs::write(path, encode_dump(dump)?)?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<Dump> {
    decode_dump(&fs::read(path)?)
}

/// Reads only the header; the file length is still checked.
pub fn read_dump_header(path: &Path) -> Result<DumpHeader> {
    let mut file = fs::File::open(path)?;
    let len = file.metadata()?.len() as usize;
    let mut head = Vec::with_capacity(HEADER_LEN);
    Read::by_ref(&mut file).take(HEADER_LEN as u64).read_to_end(&mut head)?;
    let h = parse_header(&head)?;
    check_len(&h, len)?;
    Ok(h)
}

/// Sidecar describing a raw volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSidecar {
    pub format: String,
    pub version: u32,
    pub data_file: String,
    pub dtype: String,
    pub order: String,
    /// Magnitude of the brightest voxel before normalization.
    pub peak_magnitude: f64,
    pub grid: ImageGrid,
}

/// `<prefix>.f32` and `<prefix>.toml`.
pub fn volume_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".f32"), with(".toml"))
}

/// Writes peak-normalized magnitudes and the sidecar; returns both paths.
pub fn write_volume(prefix: &Path, volume: &ReflectivityVolume) -> Result<(PathBuf, PathBuf)> {
    let (raw, side) = volume_paths(prefix);
    let mut bytes = Vec::with_capacity(4 * volume.voxels.len());
    for m in volume.normalized_magnitude() {
        bytes.extend_from_slice(&(m as f32).to_le_bytes());
    }
    fs::write(&raw, bytes)?;
    let sidecar = VolumeSidecar {
        format: "mpms-volume".into(),
        version: 1,
        data_file: raw
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::InvalidInput("volume prefix has no file name".into()))?
            .to_string(),
        dtype: "f32le".into(),
        order: "x_major_z_fastest".into(),
        peak_magnitude: volume.peak().1.max(0.0),
        grid: volume.grid,
    };
    let text = toml::to_string(&sidecar).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(&side, text)?;
    Ok((raw, side))
}

/// Reads a volume from its sidecar; voxels are real magnitudes.
pub fn read_volume(sidecar_path: &Path) -> Result<ReflectivityVolume> {
    let text = fs::read_to_string(sidecar_path)?;
    let side: VolumeSidecar = toml::from_str(&text).map_err(|e| Error::Corrupt(format!("volume sidecar: {e}")))?;
    if side.format != "mpms-volume" || side.version != 1 || side.dtype != "f32le" || side.order != "x_major_z_fastest" {
        return Err(Error::Corrupt("unsupported volume sidecar".into()));
    }
    side.grid.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
    let raw = sidecar_path.parent().unwrap_or(Path::new(".")).join(&side.data_file);
    let bytes = fs::read(raw)?;
    if bytes.len() != 4 * side.grid.n_voxels() {
        return Err(Error::Corrupt(format!(
            "volume data has {} bytes, grid needs {}",
            bytes.len(),
            4 * side.grid.n_voxels()
        )));
    }
    let voxels = bytes
        .chunks_exact(4)
        .map(|b| Complex64::new(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64, 0.0))
        .collect();
    ReflectivityVolume::new(side.grid, voxels)
}

/// Plane of a 2-D slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlicePlane {
    Xy,
    Xz,
    Yz,
}

impl SlicePlane {
    /// The plane spanned by the two longest axes.
    pub fn widest(grid: &ImageGrid) -> Self {
        let d = grid.dims();
        if d[2] <= d[0] && d[2] <= d[1] {
            SlicePlane::Xy
        } else if d[1] <= d[0] {
            SlicePlane::Xz
        } else {
            SlicePlane::Yz
        }
    }
}

/// Peak-normalized magnitude image; `values[row * width + col]`, rows along
/// the first axis of the plane, columns along the second.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceImage {
    pub plane: SlicePlane,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub values: Vec<f64>,
}

impl SliceImage {
    pub fn width(&self) -> usize {
        self.cols.len()
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    /// Binary graymap (P5), 8-bit, linear in magnitude.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width(), self.height()).into_bytes();
        out.extend(self.values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn to_csv(&self) -> String {
        let (a, b) = match self.plane {
            SlicePlane::Xy => ("x_m", "y_m"),
            SlicePlane::Xz => ("x_m", "z_m"),
            SlicePlane::Yz => ("y_m", "z_m"),
        };
        let mut s = format!("{a},{b},magnitude\n");
        for (r, rv) in self.rows.iter().enumerate() {
            for (c, cv) in self.cols.iter().enumerate() {
                s.push_str(&format!("{rv:.9},{cv:.9},{:.6e}\n", self.values[r * self.width() + c]));
            }
        }
        s
    }
}

/// Extracts the slice through voxel `through` (a grid index triple).
pub fn slice(volume: &ReflectivityVolume, plane: SlicePlane, through: [usize; 3]) -> Result<SliceImage> {
    let g = &volume.grid;
    if through.iter().zip(g.dims()).any(|(i, n)| *i >= n) {
        return invalid("slice index outside the grid");
    }
    let (ra, ca) = match plane {
        SlicePlane::Xy => (0, 1),
        SlicePlane::Xz => (0, 2),
        SlicePlane::Yz => (1, 2),
    };
    let axes = [g.x, g.y, g.z];
    let peak = volume.peak().1;
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let mut values = Vec::with_capacity(axes[ra].len * axes[ca].len);
    for r in 0..axes[ra].len {
        for c in 0..axes[ca].len {
            let mut at = through;
            at[ra] = r;
            at[ca] = c;
            values.push(volume.at(at[0], at[1], at[2]).norm() * scale);
        }
    }
    Ok(SliceImage {
        plane,
        rows: axes[ra].coords(),
        cols: axes[ca].coords(),
        values,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{synthesize_echo, TargetScene};
    use crate::geometry::{expand_channels, planar_grid_poses, MimoArrayLayout};
    use crate::reconstruct::UniformAxis;

    fn echo() -> EchoSet {
        let mut poses = planar_grid_poses(3, 2, 0.01, 0.0);
        poses[1].position.z = 0.004;
        let channels = expand_channels(&MimoArrayLayout::two_by_four(3.79e-3), &poses, 0.001).unwrap();
        let grid = FrequencyGrid::linspace(77e9, 81e9, 5).unwrap();
        let scene = TargetScene::from_points(&[Vec3::new(0.0, 0.01, 0.4)]);
        synthesize_echo(&scene, &channels, &grid, None).unwrap()
    }

    #[test]
    fn echo_round_trip_is_bit_exact() {
        let e = echo();
        let bytes = encode_echo(&e).unwrap();
        let h = decode_header(&bytes).unwrap();
        assert_eq!((h.n_channels, h.n_frequencies, h.compensated), (48, 5, false));
        assert_eq!(h.expected_len(), bytes.len());
        match decode_dump(&bytes).unwrap() {
            Dump::Echo(back) => {
                assert_eq!(back, e);
                assert_eq!(encode_echo(&back).unwrap(), bytes);
            }
            Dump::Planar(_) => panic!("expected a multistatic dump"),
        }
    }

    #[test]
    fn planar_round_trip() {
        let e = echo();
        let (planar, _) = crate::compensation::compensate_to_planar(&e, 0.001, 0.4).unwrap();
        let bytes = encode_planar(&planar).unwrap();
        assert_eq!(decode_dump(&bytes).unwrap(), Dump::Planar(planar));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = encode_echo(&echo()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dump(&bad), Err(Error::Corrupt(_))));
        assert!(matches!(decode_dump(&bytes[..bytes.len() - 1]), Err(Error::Corrupt(_))));
        assert!(matches!(decode_dump(&bytes[..10]), Err(Error::Corrupt(_))));
        let mut ver = bytes.clone();
        ver[4] = 9;
        assert!(matches!(decode_dump(&ver), Err(Error::Corrupt(_))));
        let mut count = bytes;
        count[8] += 1;
        assert!(matches!(decode_dump(&count), Err(Error::Corrupt(_))));
    }

    #[test]
    fn header_only_read_checks_length() {
        let dir = std::env::temp_dir().join(format!("mpms-hdr-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("e.mpms");
        let bytes = encode_echo(&echo()).unwrap();
        fs::write(&path, &bytes).unwrap();
        assert_eq!(read_dump_header(&path).unwrap().n_channels, 48);
        fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(matches!(read_dump_header(&path), Err(Error::Corrupt(_))));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn volume_round_trip_and_slices() {
        let g = ImageGrid::new(
            UniformAxis::new(-0.01, 0.01, 3).unwrap(),
            UniformAxis::new(0.0, 0.005, 4).unwrap(),
            UniformAxis::single(0.3),
        )
        .unwrap();
        let vox: Vec<Complex64> = (0..12).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let vol = ReflectivityVolume::new(g, vox).unwrap();
        let dir = std::env::temp_dir().join(format!("mpms-vol-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let (_, side) = write_volume(&dir.join("img"), &vol).unwrap();
        let back = read_volume(&side).unwrap();
        assert_eq!(back.grid, g);
        for (a, b) in back.magnitude().iter().zip(vol.normalized_magnitude()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(SlicePlane::widest(&g), SlicePlane::Xy);
        let s = slice(&vol, SlicePlane::Xy, [0, 0, 0]).unwrap();
        assert_eq!((s.height(), s.width()), (3, 4));
        let pgm = s.to_pgm();
        assert!(pgm.starts_with(b"P5\n4 3\n255\n"));
        assert_eq!(*pgm.last().unwrap(), 255);
        assert_eq!(s.to_csv().lines().count(), 13);
        fs::remove_dir_all(dir).unwrap();
    }
}
