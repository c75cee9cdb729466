//! Checksum-based error detection for INT8 GEMM on systolic arrays under
//! aggressive voltage scaling.
//!
//! The crate covers the whole loop: exact integer GEMM and checksums, a
//! reproducible timing-error injector, a cycle-level array model with a
//! statistical detection unit, calibration of the critical region from
//! quality sweeps, and the resulting energy/voltage trade-off.
//!
//! ```
//! use realm_core::{gemm, predicted_output_checksum, checksum, QuantMatrix, Side};
//!
//! let w = QuantMatrix::from_rows(&[[1i8, 2], [3, 4]]).unwrap();
//! let x = QuantMatrix::from_rows(&[[5i8, 6], [7, 8]]).unwrap();
//! let y = gemm(&w, &x).unwrap();
//! assert_eq!(y.data(), &[19, 22, 43, 50]);
//! let predicted = predicted_output_checksum(&w, &x).unwrap();
//! assert_eq!(predicted, checksum(&y, Side::Row));
//! ```

pub mod ber;
pub mod detect;
pub mod energy;
pub mod error;
pub mod fault;
pub mod gemm;
pub mod lab;
pub mod matrix;
pub mod report;
pub mod rng;
pub mod systolic;
pub mod workload;

pub use ber::{BerPoint, VoltageBerTable};
pub use detect::{
    detect_classical, detect_dmr, detect_msd, detect_statistical, theta_mag, ChecksumPair,
    CriticalRegionParams, Decision, DetectionVerdict, Detector, DetectorKind,
};
pub use energy::{
    compute_energy, detector_energy, evaluate_trials, summarize, sweep_detectors, sweep_voltage,
    total_energy, DetectorSweep, DetectorTally, EnergyConfig, SweepPoint, SweepSpec, SweepSummary,
    TrialSetup,
};
pub use error::{Error, Result};
pub use fault::{
    inject, inject_uniform, sample_bitflips, BitWindow, ErrorEvent, EventLog, FaultConfig,
    FaultMode, Placement,
};
pub use gemm::{checksum, gemm, predicted_output_checksum, MAX_INNER_DIM};
pub use matrix::{AccumMatrix, ChecksumVector, IntMatrix, QuantMatrix, Side};
pub use rng::{derive_seed, SplitMix64};
pub use systolic::{
    statistical_unit, ArrayConfig, ArrayPass, DataflowKind, Log2Mode, SimResult, StatUnitConfig,
    SystolicArray,
};
pub use workload::{InputDistribution, Workload};
