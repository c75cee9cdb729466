//! Relative energy and latency of voltage-scaled GEMM with detection and
//! recomputation-based recovery.
//!
//! Compute energy scales with `(v / v_nom)^2` per MAC. Checksum detectors add a
//! fixed fractional overhead on the compute at the operating voltage, and each
//! GEMM flagged for recovery is recomputed once at nominal voltage. Leakage and
//! frequency effects are not modeled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ber::VoltageBerTable;
use crate::detect::{ChecksumPair, CriticalRegionParams, Detector, DetectorKind};
use crate::gemm::checksum;
use crate::matrix::Side;
use crate::error::{Error, Result};
use crate::fault::{BitWindow, FaultConfig};
use crate::rng::derive_seed;
use crate::systolic::{statistical_unit, ArrayConfig, Log2Mode, StatUnitConfig, SystolicArray};
use crate::workload::Workload;

const VOLTAGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub v_nom: f64,
    pub e_mac_nom: f64,
    /// Power overhead of the checksum hardware, as a fraction of compute.
    pub detect_overhead: f64,
    /// Area overhead; reported, never used in energy.
    pub area_overhead: f64,
    pub table: VoltageBerTable,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            v_nom: 0.9,
            e_mac_nom: 1.0,
            detect_overhead: 0.0179,
            area_overhead: 0.0142,
            table: VoltageBerTable::default_synthetic(),
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_nom.is_finite() && self.v_nom > 0.0) {
            return Err(Error::InvalidConfig(format!("v_nom must be positive, got {}", self.v_nom)));
        }
        if !(self.e_mac_nom.is_finite() && self.e_mac_nom > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "e_mac_nom must be positive, got {}",
                self.e_mac_nom
            )));
        }
        if !(self.detect_overhead.is_finite() && self.detect_overhead >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "detect_overhead must be >= 0, got {}",
                self.detect_overhead
            )));
        }
        Ok(())
    }

    fn check_voltage(&self, v: f64) -> Result<()> {
        if !(v > 0.0 && v <= self.v_nom + VOLTAGE_EPS) {
            return Err(Error::VoltageOutOfRange {
                voltage: v,
                min: 0.0,
                max: self.v_nom,
            });
        }
        Ok(())
    }
}

/// `n_mac * e_mac_nom * (v / v_nom)^2`.
pub fn compute_energy(v: f64, n_mac: u64, cfg: &EnergyConfig) -> Result<f64> {
    cfg.check_voltage(v)?;
    let ratio = v / cfg.v_nom;
    Ok(n_mac as f64 * cfg.e_mac_nom * ratio * ratio)
}

/// Checksum-protected execution at `v` plus recomputation at nominal voltage
/// for the fraction `recovery_rate` of GEMMs.
pub fn total_energy(v: f64, recovery_rate: f64, n_mac: u64, cfg: &EnergyConfig) -> Result<f64> {
    check_rate(recovery_rate)?;
    Ok(compute_energy(v, n_mac, cfg)? * (1.0 + cfg.detect_overhead)
        + recovery_rate * compute_energy(cfg.v_nom, n_mac, cfg)?)
}

/// Total energy for a detector family: none pays neither overhead nor
/// recovery, DMR pays twice the compute plus recovery.
pub fn detector_energy(
    kind: DetectorKind,
    v: f64,
    recovery_rate: f64,
    n_mac: u64,
    cfg: &EnergyConfig,
) -> Result<f64> {
    check_rate(recovery_rate)?;
    match kind {
        DetectorKind::None => compute_energy(v, n_mac, cfg),
        DetectorKind::Dmr => Ok(2.0 * compute_energy(v, n_mac, cfg)?
            + recovery_rate * compute_energy(cfg.v_nom, n_mac, cfg)?),
        _ => total_energy(v, recovery_rate, n_mac, cfg),
    }
}

fn check_rate(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidConfig(format!("recovery rate must lie in [0, 1], got {r}")));
    }
    Ok(())
}

/// Shared settings for simulated GEMM trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub array: ArrayConfig,
    pub log2_mode: Log2Mode,
    pub fixed_point_frac_bits: u32,
    pub trials: usize,
    pub seed: u64,
    /// Region used to judge whether an undetected error set was harmful.
    pub reference: CriticalRegionParams,
}

impl TrialSetup {
    pub fn new(reference: CriticalRegionParams) -> Self {
        Self {
            array: ArrayConfig::default(),
            log2_mode: Log2Mode::Exact,
            fixed_point_frac_bits: crate::systolic::DEFAULT_FRAC_BITS,
            trials: 100,
            seed: 0,
            reference,
        }
    }
}

/// Per-detector counts over a batch of trials. Integer sums keep the result
/// independent of trial evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorTally {
    pub kind: DetectorKind,
    pub trials: u64,
    pub recovered: u64,
    pub undetected_critical: u64,
    pub freq_eff_sum: u64,
    pub msd_sum: u128,
}

impl DetectorTally {
    fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            trials: 0,
            recovered: 0,
            undetected_critical: 0,
            freq_eff_sum: 0,
            msd_sum: 0,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.trials += other.trials;
        self.recovered += other.recovered;
        self.undetected_critical += other.undetected_critical;
        self.freq_eff_sum += other.freq_eff_sum;
        self.msd_sum += other.msd_sum;
    }

    fn ratio(&self, x: u64) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            x as f64 / self.trials as f64
        }
    }

    pub fn recovery_rate(&self) -> f64 {
        self.ratio(self.recovered)
    }

    /// Fraction of all trials the detector passed although the injected
    /// errors fell inside the reference critical region.
    pub fn undetected_critical_rate(&self) -> f64 {
        self.ratio(self.undetected_critical)
    }

    pub fn mean_freq_eff(&self) -> f64 {
        self.ratio(self.freq_eff_sum)
    }

    pub fn mean_msd(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.msd_sum as f64 / self.trials as f64
        }
    }
}

/// Runs `setup.trials` GEMMs; for each, every fault configuration in `faults`
/// is applied to the same clean pass with the same seed, and every detector
/// judges the same corrupted output. Returns tallies indexed `[fault][detector]`.
pub fn evaluate_trials(
    workload: &Workload,
    setup: &TrialSetup,
    detectors: &[Detector],
    faults: &[FaultConfig],
) -> Result<Vec<Vec<DetectorTally>>> {
    workload.validate()?;
    if setup.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    for f in faults {
        f.validate()?;
    }
    let array = SystolicArray::new(setup.array)?;
    let stat_cfg = |p: CriticalRegionParams| StatUnitConfig {
        params: p,
        log2_mode: setup.log2_mode,
        fixed_point_frac_bits: setup.fixed_point_frac_bits,
    };
    if let Some(p) = detectors.iter().find_map(|d| match d {
        Detector::Statistical(p) => Some(*p),
        _ => None,
    }) {
        stat_cfg(p).validate()?;
    }
    let empty: Vec<Vec<DetectorTally>> = faults
        .iter()
        .map(|_| detectors.iter().map(|d| DetectorTally::new(d.kind())).collect())
        .collect();

    (0..setup.trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Vec<Vec<DetectorTally>>> {
            let (w, x) = workload.operands(trial);
            let pass = array.pass(&w, &x)?;
            let seed = derive_seed(setup.seed, trial, 0);
            let mut out = empty.clone();
            for (fi, fault) in faults.iter().enumerate() {
                let (corrupted, events) = crate::fault::inject(&pass.clean, fault, seed)?;
                let critical = setup.reference.events_critical(&events);
                let observed = checksum(&corrupted, Side::Row);
                let pair = ChecksumPair::new(pass.predicted.clone(), observed)?;
                for (di, det) in detectors.iter().enumerate() {
                    let verdict = match det {
                        Detector::Statistical(p) => {
                            statistical_unit(pair.predicted(), pair.observed(), &stat_cfg(*p))?
                        }
                        other => other.evaluate(&pair, &events),
                    };
                    let t = &mut out[fi][di];
                    t.trials += 1;
                    t.freq_eff_sum += verdict.freq_eff as u64;
                    t.msd_sum += u128::from(verdict.msd);
                    if verdict.recover() {
                        t.recovered += 1;
                    } else if critical {
                        t.undetected_critical += 1;
                    }
                }
            }
            Ok(out)
        })
        .try_reduce(
            || empty.clone(),
            |mut acc, part| {
                for (a_row, p_row) in acc.iter_mut().zip(&part) {
                    for (a, p) in a_row.iter_mut().zip(p_row) {
                        a.merge(p);
                    }
                }
                Ok(acc)
            },
        )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub voltages: Vec<f64>,
    pub bit_window: BitWindow,
    pub setup: TrialSetup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub voltage: f64,
    pub ber: f64,
    pub recovery_rate: f64,
    pub energy_total: f64,
    pub latency_factor: f64,
    pub quality_proxy: f64,
    pub tally: DetectorTally,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSweep {
    pub detector: Detector,
    /// Ordered by descending voltage.
    pub points: Vec<SweepPoint>,
    /// Index of the minimum-energy point (ties go to the higher voltage).
    pub optimum: usize,
}

impl DetectorSweep {
    pub fn optimum_point(&self) -> &SweepPoint {
        &self.points[self.optimum]
    }
}

/// Sweeps all `detectors` over `spec.voltages` with shared fault samples.
pub fn sweep_detectors(
    workload: &Workload,
    detectors: &[Detector],
    spec: &SweepSpec,
    cfg: &EnergyConfig,
) -> Result<Vec<DetectorSweep>> {
    cfg.validate()?;
    if spec.voltages.is_empty() {
        return Err(Error::InvalidConfig("voltage list is empty".into()));
    }
    if detectors.is_empty() {
        return Err(Error::InvalidConfig("detector list is empty".into()));
    }
    let mut voltages = spec.voltages.clone();
    voltages.sort_by(|a, b| b.total_cmp(a));
    voltages.dedup_by(|a, b| (*a - *b).abs() <= VOLTAGE_EPS);

    let mut bers = Vec::with_capacity(voltages.len());
    for &v in &voltages {
        cfg.check_voltage(v)?;
        bers.push(cfg.table.ber_at(v)?);
    }
    let faults: Vec<FaultConfig> = bers
        .iter()
        .map(|&b| FaultConfig::ber(b, spec.bit_window))
        .collect();
    let tallies = evaluate_trials(workload, &spec.setup, detectors, &faults)?;

    let array = SystolicArray::new(spec.setup.array)?;
    let (m, k, n) = (workload.m, workload.k, workload.n);
    let checksum_latency = array.cycles(m, k, n)? as f64 / array.base_cycles(m, k, n)?.max(1) as f64;
    let n_mac = workload.total_macs();

    detectors
        .iter()
        .enumerate()
        .map(|(di, det)| {
            let points = voltages
                .iter()
                .zip(&bers)
                .zip(&tallies)
                .map(|((&voltage, &ber), row)| {
                    let tally = row[di];
                    let recovery_rate = tally.recovery_rate();
                    let latency_factor = match det.kind() {
                        DetectorKind::None => 1.0,
                        DetectorKind::Dmr => 1.0 + recovery_rate,
                        _ => checksum_latency * (1.0 + recovery_rate),
                    };
                    Ok(SweepPoint {
                        voltage,
                        ber,
                        recovery_rate,
                        energy_total: detector_energy(det.kind(), voltage, recovery_rate, n_mac, cfg)?,
                        latency_factor,
                        quality_proxy: tally.undetected_critical_rate(),
                        tally,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let optimum = points
                .iter()
                .enumerate()
                .fold(0, |best, (i, p)| {
                    if p.energy_total < points[best].energy_total {
                        i
                    } else {
                        best
                    }
                });
            Ok(DetectorSweep {
                detector: *det,
                points,
                optimum,
            })
        })
        .collect()
}

pub fn sweep_voltage(
    workload: &Workload,
    detector: Detector,
    spec: &SweepSpec,
    cfg: &EnergyConfig,
) -> Result<DetectorSweep> {
    Ok(sweep_detectors(workload, &[detector], spec, cfg)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub detector: DetectorKind,
    pub optimal_voltage: f64,
    pub energy_total: f64,
    /// Saving relative to unprotected execution at nominal voltage.
    pub saving_vs_nominal: f64,
    /// Saving relative to classical checksum detection at its own optimum.
    pub saving_vs_classical: Option<f64>,
}

pub fn summarize(sweeps: &[DetectorSweep], n_mac: u64, cfg: &EnergyConfig) -> Result<Vec<SweepSummary>> {
    let nominal = compute_energy(cfg.v_nom, n_mac, cfg)?;
    let classical = sweeps
        .iter()
        .find(|s| s.detector.kind() == DetectorKind::Classical)
        .map(|s| s.optimum_point().energy_total);
    Ok(sweeps
        .iter()
        .map(|s| {
            let p = s.optimum_point();
            SweepSummary {
                detector: s.detector.kind(),
                optimal_voltage: p.voltage,
                energy_total: p.energy_total,
                saving_vs_nominal: 1.0 - p.energy_total / nominal,
                saving_vs_classical: classical.map(|c| 1.0 - p.energy_total / c),
            }
        })
        .collect())
}
