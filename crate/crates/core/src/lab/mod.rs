//! Desk-scale resilience characterization: normalization amplification and
//! critical-region calibration from injection sweeps.

pub mod fit;
pub mod grid;
pub mod norm;

pub use fit::fit_critical_region;
pub use grid::{
    quality_grid, GridCell, GridSpec, NormPipelineOracle, PlantedStepOracle, QualityGrid,
    QualityOracle,
};
pub use norm::{norm_amplification, normalize, Amplification, NormKind, NormPipelineConfig};
