//! Subcommand bodies. Each returns a summary that `main` prints; files are
//! written here.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use mpms_core::format::{
    read_dump, read_dump_header, read_volume, slice, write_bytes, write_dump, write_volume, Dump, SlicePlane,
};
use mpms_core::metrics::{match_peaks, peak_locations, Axis};
use mpms_core::reconstruct::{ImageGrid, PipelineReport, RmaParams, StageTiming};
use mpms_core::{
    image_correlation, psf_profile, reconstruct_pipeline, rma_reconstruct, rma_reconstruct_2d, Method,
    PsfReport, ReflectivityVolume,
};

use crate::config::{GridConfig, ScenarioConfig, TrajectoryConfig};
use crate::error::{at, CliError, Result};

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub n_channels: usize,
    pub n_frequencies: usize,
    pub warnings: Vec<String>,
}

pub fn cmd_simulate(config: &Path, out: &Path) -> Result<SimulateSummary> {
    let cfg = ScenarioConfig::load(config)?;
    let (echo, sampling) = cfg.build_echo()?;
    for v in &sampling.violations {
        warn!("sampling: {v}");
    }
    write_dump(out, &Dump::Echo(echo.clone())).map_err(at(out))?;
    info!("wrote {} channels x {} frequencies to {}", echo.n_channels(), echo.n_frequencies(), out.display());
    Ok(SimulateSummary {
        n_channels: echo.n_channels(),
        n_frequencies: echo.n_frequencies(),
        warnings: sampling.violations,
    })
}

/// Grid and migration settings for `reconstruct`; flags override a config.
#[derive(Debug, Clone, Default)]
pub struct ReconstructOptions {
    pub method: Option<Method>,
    pub config: Option<PathBuf>,
    pub grid: Option<GridConfig>,
    pub slice: Option<SlicePlane>,
}

#[derive(Debug, Clone)]
pub struct ReconstructSummary {
    pub method: Method,
    pub volume: ReflectivityVolume,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_reconstruct(dump_path: &Path, opts: &ReconstructOptions, prefix: &Path) -> Result<ReconstructSummary> {
    let cfg = opts.config.as_deref().map(ScenarioConfig::load).transpose()?;
    let method = opts
        .method
        .or(cfg.as_ref().map(|c| c.reconstruction.method))
        .unwrap_or(Method::RmaCompensated);
    let grid = match (opts.grid, &cfg) {
        (Some(g), _) => g.to_grid()?,
        (None, Some(c)) => c.grid()?,
        (None, None) => return Err(CliError::Usage("reconstruct needs --config or --x/--y/--z grid flags".into())),
    };
    let params = cfg.as_ref().map(|c| c.reconstruction.rma).unwrap_or_default();

    let t0 = Instant::now();
    let dump = read_dump(dump_path).map_err(at(dump_path))?;
    let mut stages = vec![StageTiming {
        stage: "load".into(),
        seconds: t0.elapsed().as_secs_f64(),
    }];
    let (volume, report) = reconstruct_dump(&dump, &grid, &params, method)?;
    stages.extend(report.stages);
    for w in &report.warnings {
        warn!("{w}");
    }

    let t1 = Instant::now();
    let (raw, side) = write_volume(prefix, &volume).map_err(at(prefix))?;
    let through = volume.grid.unravel(volume.peak().0);
    let plane = opts.slice.unwrap_or_else(|| SlicePlane::widest(&volume.grid));
    let img = slice(&volume, plane, through)?;
    let pgm = suffixed(prefix, "_slice.pgm");
    let csv = suffixed(prefix, "_slice.csv");
    write_bytes(&pgm, &img.to_pgm()).map_err(at(&pgm))?;
    write_bytes(&csv, img.to_csv().as_bytes()).map_err(at(&csv))?;
    stages.push(StageTiming {
        stage: "write".into(),
        seconds: t1.elapsed().as_secs_f64(),
    });

    let timing = suffixed(prefix, "_timing.csv");
    let mut text = String::from("stage,seconds\n");
    for s in &stages {
        let _ = writeln!(text, "{},{:.6}", s.stage, s.seconds);
    }
    write_bytes(&timing, text.as_bytes()).map_err(at(&timing))?;

    Ok(ReconstructSummary {
        method,
        volume,
        stages,
        warnings: report.warnings,
        files: vec![raw, side, pgm, csv, timing],
    })
}

/// Forms an image from either kind of dump. Planar dumps carry no element
/// positions, so only migration applies to them.
pub fn reconstruct_dump(
    dump: &Dump,
    grid: &ImageGrid,
    params: &RmaParams,
    method: Method,
) -> Result<(ReflectivityVolume, PipelineReport)> {
    match dump {
        Dump::Echo(echo) => Ok(reconstruct_pipeline(echo, grid, params, method)?),
        Dump::Planar(planar) => {
            if method == Method::Bpa {
                return Err(CliError::Usage("bpa needs an uncompensated echo dump, not planar samples".into()));
            }
            let (v, rma) = if grid.z.len == 1 {
                rma_reconstruct_2d(planar, &grid.x, &grid.y, grid.z.start, params)?
            } else {
                rma_reconstruct(planar, grid, params)?
            };
            Ok((
                v,
                PipelineReport {
                    method,
                    stages: rma.stages,
                    warnings: rma.warnings,
                    compensation: None,
                },
            ))
        }
    }
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// One row of the plane-offset sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfRow {
    pub dz_cm: f64,
    pub report: PsfReport,
}

pub const PSF_CSV_HEADER: &str = "dz_max_cm,axis,mainlobe_width_3db_m,peak_sidelobe_level_db,peak_location_m";

pub fn psf_csv(rows: &[PsfRow]) -> String {
    let mut s = format!("{PSF_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{}", r.dz_cm, r.report.csv_row());
    }
    s
}

/// Sweeps the plane-offset bound of a random trajectory and measures the
/// point response along each axis.
pub fn cmd_psf(config: &Path, dz_cm: &[f64], axes: &[Axis], out: Option<&Path>) -> Result<Vec<PsfRow>> {
    let base = ScenarioConfig::load(config)?;
    let n = base.scene()?.len();
    if n != 1 {
        return Err(CliError::Config(format!("psf needs a single-scatterer scene, found {n} scatterers")));
    }
    if !matches!(base.trajectory, TrajectoryConfig::Random { .. }) {
        return Err(CliError::Config("psf sweeps need a random trajectory".into()));
    }
    let grid = base.grid()?;
    let mut rows = Vec::with_capacity(dz_cm.len() * axes.len());
    for &dz in dz_cm {
        if !(dz >= 0.0) || !dz.is_finite() {
            return Err(CliError::Usage(format!("plane offset {dz} cm must be finite and non-negative")));
        }
        let mut cfg = base.clone();
        if let TrajectoryConfig::Random { z_deviation_max_m, .. } = &mut cfg.trajectory {
            *z_deviation_max_m = dz / 100.0;
        }
        let (echo, _) = cfg.build_echo()?;
        let (volume, report) = reconstruct_pipeline(&echo, &grid, &cfg.reconstruction.rma, cfg.reconstruction.method)?;
        for w in &report.warnings {
            warn!("dz {dz} cm: {w}");
        }
        for &axis in axes {
            let (_, r) = psf_profile(&volume, axis)?;
            rows.push(PsfRow { dz_cm: dz, report: r });
        }
    }
    if let Some(path) = out {
        write_bytes(path, psf_csv(&rows).as_bytes()).map_err(at(path))?;
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct CompareSummary {
    pub correlation: f64,
    /// Peak table with B's detections matched against A's.
    pub peaks_csv: String,
    pub matched_within_voxel: usize,
    pub n_peaks: usize,
}

pub fn cmd_compare(
    a: &Path,
    b: &Path,
    n_peaks: usize,
    min_separation_m: f64,
    out: Option<&Path>,
) -> Result<CompareSummary> {
    let va = read_volume(a).map_err(at(a))?;
    let vb = read_volume(b).map_err(at(b))?;
    if va.grid != vb.grid {
        return Err(CliError::Core(mpms_core::Error::InvalidInput(
            "volumes are defined on different grids".into(),
        )));
    }
    let correlation = image_correlation(&va, &vb)?;
    let pa = peak_locations(&va, n_peaks, min_separation_m)?;
    let pb = peak_locations(&vb, n_peaks, min_separation_m)?;
    for w in pa.warnings.iter().chain(&pb.warnings) {
        warn!("peaks: {w}");
    }
    let matches = match_peaks(&pa.positions(), &pb.positions());
    let mut csv = String::from("index,ref_x_m,ref_y_m,ref_z_m,offset_x_m,offset_y_m,offset_z_m,within_voxel\n");
    let mut within = 0;
    for (i, m) in matches.iter().enumerate() {
        let r = m.reference;
        let ok = m.within_voxel(&va.grid);
        within += ok as usize;
        let off = m
            .offset()
            .map(|o| format!("{:.9},{:.9},{:.9}", o.x, o.y, o.z))
            .unwrap_or_else(|| "na,na,na".into());
        let _ = writeln!(csv, "{i},{:.9},{:.9},{:.9},{off},{ok}", r.x, r.y, r.z);
    }
    if let Some(path) = out {
        write_bytes(path, csv.as_bytes()).map_err(at(path))?;
    }
    Ok(CompareSummary {
        correlation,
        peaks_csv: csv,
        matched_within_voxel: within,
        n_peaks: matches.len(),
    })
}

/// Human-readable description of a dump.
pub fn cmd_inspect(dump_path: &Path) -> Result<String> {
    let h = read_dump_header(dump_path).map_err(at(dump_path))?;
    let mut s = String::new();
    let _ = writeln!(s, "file          {}", dump_path.display());
    let _ = writeln!(s, "version       {}", h.version);
    let _ = writeln!(s, "kind          {}", if h.compensated { "planar (compensated)" } else { "echo" });
    let _ = writeln!(s, "channels      {}", h.n_channels);
    let _ = writeln!(s, "frequencies   {}", h.n_frequencies);
    let _ = writeln!(s, "z0_m          {}", h.z0);
    let dump = read_dump(dump_path).map_err(at(dump_path))?;
    let g = dump.grid();
    let _ = writeln!(
        s,
        "band_hz       {:.6e} .. {:.6e} (step {:.6e})",
        g.frequencies()[0],
        g.frequencies()[g.len() - 1],
        g.step()
    );
    if let Dump::Echo(e) = &dump {
        let max_dz = e.channels.iter().map(|c| c.d_z.abs()).fold(0.0, f64::max);
        let _ = writeln!(s, "max_abs_dz_m  {max_dz:.6e}");
    }
    Ok(s)
}
