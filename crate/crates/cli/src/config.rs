//! Experiment configuration document.
//!
//! Every section is optional and falls back to defaults; unknown keys are
//! rejected. Relative file paths inside the document resolve against the
//! directory holding the document.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use realm_core::lab::{GridSpec, NormKind};
use realm_core::systolic::{DEFAULT_FRAC_BITS, MAX_FRAC_BITS};
use realm_core::{
    ArrayConfig, BitWindow, CriticalRegionParams, Detector, DetectorKind, EnergyConfig,
    FaultConfig, FaultMode, Log2Mode, Placement, StatUnitConfig, TrialSetup, VoltageBerTable,
    Workload,
};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Experiment seed for fault draws and randomized checks.
    pub seed: u64,
    pub workload: Workload,
    pub fault: FaultSection,
    pub detector: DetectorSection,
    /// Detector set compared by `compare` and `sweep`.
    pub detectors: Vec<DetectorKind>,
    pub stat_unit: StatUnitSection,
    pub array: ArrayConfig,
    pub energy: EnergySection,
    pub compare: CompareSection,
    pub sweep: SweepSection,
    pub calibrate: CalibrateSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workload: Workload::default(),
            fault: FaultSection::default(),
            detector: DetectorSection::default(),
            detectors: DetectorKind::ALL.to_vec(),
            stat_unit: StatUnitSection::default(),
            array: ArrayConfig::default(),
            energy: EnergySection::default(),
            compare: CompareSection::default(),
            sweep: SweepSection::default(),
            calibrate: CalibrateSection::default(),
            verify: VerifySection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultSection {
    pub mode: FaultMode,
    pub ber: f64,
    pub bit_window: BitWindow,
    pub mag: i32,
    pub freq: usize,
    pub placement: Placement,
    pub signed_mix: bool,
}

impl Default for FaultSection {
    fn default() -> Self {
        let f = FaultConfig::default();
        Self {
            mode: f.mode,
            ber: f.ber,
            bit_window: f.bit_window,
            mag: f.mag,
            freq: f.freq,
            placement: f.placement,
            signed_mix: f.signed_mix,
        }
    }
}

impl FaultSection {
    pub fn to_fault(&self, seed: u64) -> FaultConfig {
        FaultConfig {
            mode: self.mode,
            ber: self.ber,
            bit_window: self.bit_window,
            mag: self.mag,
            freq: self.freq,
            placement: self.placement,
            signed_mix: self.signed_mix,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub a: f64,
    pub b: f64,
    pub theta_freq: u32,
}

/// Built-in critical region used when none is configured.
pub const DEFAULT_PARAMS: ParamsSection = ParamsSection {
    a: 2.0,
    b: 40.0,
    theta_freq: 4,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    pub params: Option<ParamsSection>,
    pub params_file: Option<PathBuf>,
    pub msd_threshold: u64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Statistical,
            params: None,
            params_file: None,
            msd_threshold: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatUnitSection {
    pub log2_mode: Log2Mode,
    pub fixed_point_frac_bits: u32,
}

impl Default for StatUnitSection {
    fn default() -> Self {
        Self {
            log2_mode: Log2Mode::Exact,
            fixed_point_frac_bits: DEFAULT_FRAC_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub v_nom: f64,
    pub e_mac_nom: f64,
    pub detect_overhead: f64,
    pub area_overhead: f64,
    /// CSV with header `voltage,ber`; the built-in synthetic table when absent.
    pub table_path: Option<PathBuf>,
}

impl Default for EnergySection {
    fn default() -> Self {
        let e = EnergyConfig::default();
        Self {
            v_nom: e.v_nom,
            e_mac_nom: e.e_mac_nom,
            detect_overhead: e.detect_overhead,
            area_overhead: e.area_overhead,
            table_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Operating voltage; when set, the fault mode is bit flips at the
    /// table's BER for that voltage. Otherwise `fault` is used as given.
    pub voltage: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub voltages: Option<Vec<f64>>,
    pub range: Option<VoltageRange>,
    pub trials: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            voltages: None,
            range: None,
            trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSection {
    /// Analytic step over a planted critical region, on a zero matrix.
    Planted {
        a: f64,
        b: f64,
        theta_freq: u32,
        rows: usize,
        cols: usize,
    },
    /// Small GEMM followed by row-wise normalization.
    NormPipeline {
        norm_kind: NormKind,
        rows: usize,
        k: usize,
        cols: usize,
    },
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection::Planted {
            a: DEFAULT_PARAMS.a,
            b: DEFAULT_PARAMS.b,
            theta_freq: DEFAULT_PARAMS.theta_freq,
            rows: 256,
            cols: 256,
        }
    }
}

/// A non-negative real that may also be written as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon(pub f64);

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Epsilon(x)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "+inf") => {
                Ok(Epsilon(f64::INFINITY))
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "epsilon must be a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    pub oracle: OracleSection,
    pub mag_axis: Vec<f64>,
    pub freq_axis: Vec<usize>,
    pub epsilon: Epsilon,
    pub trials: usize,
    pub placement: Placement,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        let g = GridSpec::power_of_two_16();
        Self {
            oracle: OracleSection::default(),
            mag_axis: g.mag_axis,
            freq_axis: g.freq_axis,
            epsilon: Epsilon(g.epsilon),
            trials: g.trials,
            placement: g.placement,
        }
    }
}

impl CalibrateSection {
    pub fn grid_spec(&self, seed: u64) -> GridSpec {
        GridSpec {
            mag_axis: self.mag_axis.clone(),
            freq_axis: self.freq_axis.clone(),
            epsilon: self.epsilon.0,
            trials: self.trials,
            seed,
            placement: self.placement,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Randomized cases per check.
    pub min_cases: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { min_cases: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("realm-out"),
            formats: vec![Format::Csv],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        self.workload.validate()?;
        self.fault.to_fault(self.seed).validate()?;
        if self.detectors.is_empty() {
            return Err(CliError::Config("detectors must list at least one detector".into()));
        }
        if self.detector.params.is_some() && self.detector.params_file.is_some() {
            return Err(CliError::Config(
                "detector.params and detector.params_file are mutually exclusive".into(),
            ));
        }
        if self.stat_unit.fixed_point_frac_bits > MAX_FRAC_BITS {
            return Err(CliError::Config(format!(
                "stat_unit.fixed_point_frac_bits must be <= {MAX_FRAC_BITS}"
            )));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats must not be empty".into()));
        }
        if self.verify.min_cases == 0 {
            return Err(CliError::Config("verify.min_cases must be at least 1".into()));
        }
        Ok(())
    }
}

/// A validated configuration plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cfg: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl Resolved {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn params(&self) -> CliResult<CriticalRegionParams> {
        let d = &self.cfg.detector;
        if let Some(file) = &d.params_file {
            let path = self.path(file);
            if !path.exists() {
                return Err(CliError::Config(format!("params file {} not found", path.display())));
            }
            return Ok(CriticalRegionParams::load(&path)?.0);
        }
        let p = d.params.unwrap_or(DEFAULT_PARAMS);
        Ok(CriticalRegionParams::new(p.a, p.b, p.theta_freq)?)
    }

    pub fn detector(&self, kind: DetectorKind) -> CliResult<Detector> {
        Ok(match kind {
            DetectorKind::None => Detector::None,
            DetectorKind::Dmr => Detector::Dmr,
            DetectorKind::Classical => Detector::Classical,
            DetectorKind::Msd => Detector::Msd {
                threshold: self.cfg.detector.msd_threshold,
            },
            DetectorKind::Statistical => Detector::Statistical(self.params()?),
        })
    }

    /// Configured detector set, duplicates dropped, order kept.
    pub fn detectors(&self) -> CliResult<Vec<Detector>> {
        let mut seen = Vec::new();
        for k in &self.cfg.detectors {
            if !seen.contains(k) {
                seen.push(*k);
            }
        }
        seen.into_iter().map(|k| self.detector(k)).collect()
    }

    pub fn stat_unit(&self) -> CliResult<StatUnitConfig> {
        let s = StatUnitConfig {
            params: self.params()?,
            log2_mode: self.cfg.stat_unit.log2_mode,
            fixed_point_frac_bits: self.cfg.stat_unit.fixed_point_frac_bits,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn energy(&self) -> CliResult<EnergyConfig> {
        let e = &self.cfg.energy;
        let table = match &e.table_path {
            Some(p) => {
                let path = self.path(p);
                let file = std::fs::File::open(&path).map_err(|source| CliError::Read {
                    path: path.clone(),
                    source,
                })?;
                VoltageBerTable::from_csv_reader(file)
                    .map_err(|err| CliError::Config(format!("{}: {err}", path.display())))?
            }
            None => VoltageBerTable::default_synthetic(),
        };
        let cfg = EnergyConfig {
            v_nom: e.v_nom,
            e_mac_nom: e.e_mac_nom,
            detect_overhead: e.detect_overhead,
            area_overhead: e.area_overhead,
            table,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn trial_setup(&self, trials: usize) -> CliResult<TrialSetup> {
        Ok(TrialSetup {
            array: self.cfg.array,
            log2_mode: self.cfg.stat_unit.log2_mode,
            fixed_point_frac_bits: self.cfg.stat_unit.fixed_point_frac_bits,
            trials,
            seed: self.cfg.seed,
            reference: self.params()?,
        })
    }

    /// Sweep voltages: explicit list, a descending range, or every table row.
    pub fn voltages(&self, table: &VoltageBerTable) -> CliResult<Vec<f64>> {
        let s = &self.cfg.sweep;
        let v = match (&s.voltages, &s.range) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "sweep.voltages and sweep.range are mutually exclusive".into(),
                ))
            }
            (Some(v), None) => v.clone(),
            (None, Some(r)) => {
                if !(r.step > 0.0 && r.start >= r.stop) {
                    return Err(CliError::Config(
                        "sweep.range needs step > 0 and start >= stop".into(),
                    ));
                }
                let n = ((r.start - r.stop) / r.step + 1e-9).floor() as usize;
                (0..=n)
                    .map(|i| realm_core::ber::round_mv(r.start - i as f64 * r.step))
                    .collect()
            }
            (None, None) => table.points().iter().map(|p| p.voltage).collect(),
        };
        if v.is_empty() {
            return Err(CliError::Config("sweep has no voltages".into()));
        }
        Ok(v)
    }
}
