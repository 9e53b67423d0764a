use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::grid::{ImageGrid, ReflectivityVolume};
use super::rma::{rma_reconstruct, rma_reconstruct_2d, RmaParams};
use super::{bpa_reconstruct, StageTiming};
use crate::compensation::{compensate_to_planar, uncompensated_planar, CompensationReport};
use crate::echo::EchoSet;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bpa,
    /// Migration on the virtual midpoints with no residual-phase correction.
    RmaRaw,
    RmaCompensated,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bpa, Method::RmaRaw, Method::RmaCompensated];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bpa => "bpa",
            Method::RmaRaw => "rma_raw",
            Method::RmaCompensated => "rma_compensated",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}' (expected bpa, rma_raw or rma_compensated)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub method: Method,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub compensation: Option<CompensationReport>,
}

impl PipelineReport {
    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

/// Runs one reconstructor end to end.
///
/// The migration paths take the reference plane from the channels and use
/// the center of the image volume as the scene reference depth. A grid with
/// a single z sample is formed as an exact 2-D slice.
pub fn reconstruct_pipeline(
    echo: &EchoSet,
    grid: &ImageGrid,
    params: &RmaParams,
    method: Method,
) -> Result<(ReflectivityVolume, PipelineReport)> {
    echo.validate()?;
    let mut report = PipelineReport {
        method,
        stages: Vec::new(),
        warnings: Vec::new(),
        compensation: None,
    };
    let volume = match method {
        Method::Bpa => {
            let t0 = Instant::now();
            let v = bpa_reconstruct(echo, grid)?;
            report.stages.push(StageTiming {
                stage: "backprojection".into(),
                seconds: t0.elapsed().as_secs_f64(),
            });
            v
        }
        Method::RmaRaw | Method::RmaCompensated => {
            let Some(first) = echo.channels.first() else {
                return invalid("echo has no channels");
            };
            let z0 = first.z0();
            let t0 = Instant::now();
            let planar = if method == Method::RmaRaw {
                uncompensated_planar(echo, z0)?
            } else {
                let (planar, comp) = compensate_to_planar(echo, z0, grid.z.center())?;
                report.warnings.extend(comp.warnings.iter().cloned());
                report.compensation = Some(comp);
                planar
            };
            report.stages.push(StageTiming {
                stage: "compensation".into(),
                seconds: t0.elapsed().as_secs_f64(),
            });
            let (v, rma) = if grid.z.len == 1 {
                rma_reconstruct_2d(&planar, &grid.x, &grid.y, grid.z.start, params)?
            } else {
                rma_reconstruct(&planar, grid, params)?
            };
            report.stages.extend(rma.stages);
            report.warnings.extend(rma.warnings);
            v
        }
    };
    Ok((volume, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("rma".parse::<Method>().is_err());
    }
}
