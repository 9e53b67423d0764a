//! Image formation: wavenumber-domain migration for planar monostatic data
//! and exact back-projection as the reference.

mod bpa;
mod grid;
mod pipeline;
mod rma;

use serde::{Deserialize, Serialize};

pub use bpa::bpa_reconstruct;
pub use grid::{ImageGrid, ReflectivityVolume, UniformAxis};
pub use pipeline::{reconstruct_pipeline, Method, PipelineReport};
pub use rma::{
    rma_reconstruct, rma_reconstruct_2d, EvanescentPolicy, RmaParams, RmaReport, StoltMethod, Window,
};

/// Wall time of one processing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}
