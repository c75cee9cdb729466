//! Checksum-based error detectors.
//!
//! All detectors look at the column-checksum differences
//! `d_j = predicted_j - observed_j`. The statistical detector counts the
//! differences whose `log2 |d_j|` exceeds the magnitude threshold
//! `theta_mag = b - (a - 1) * log2(MSD)`, where `MSD = |sum_j d_j|`, and asks
//! for recomputation only when that count exceeds `theta_freq`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault::EventLog;
use crate::matrix::{AccumMatrix, ChecksumVector};

/// Predicted and observed column checksums plus their difference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChecksumPair {
    predicted: ChecksumVector,
    observed: ChecksumVector,
    diff: Vec<i64>,
}

impl ChecksumPair {
    pub fn new(predicted: ChecksumVector, observed: ChecksumVector) -> Result<Self> {
        if predicted.len() != observed.len() {
            return Err(Error::DimensionMismatch(format!(
                "predicted checksum has {} entries, observed has {}",
                predicted.len(),
                observed.len()
            )));
        }
        let diff = predicted
            .as_slice()
            .iter()
            .zip(observed.as_slice())
            .map(|(p, o)| p.wrapping_sub(*o))
            .collect();
        Ok(Self {
            predicted,
            observed,
            diff,
        })
    }

    /// A pair whose observed side is zero, so `diff == d`.
    pub fn from_diff(d: &[i64]) -> Self {
        let side = crate::matrix::Side::Row;
        Self {
            predicted: ChecksumVector::new(side, d.to_vec()),
            observed: ChecksumVector::zeros(side, d.len()),
            diff: d.to_vec(),
        }
    }

    pub fn predicted(&self) -> &ChecksumVector {
        &self.predicted
    }

    pub fn observed(&self) -> &ChecksumVector {
        &self.observed
    }

    pub fn diff(&self) -> &[i64] {
        &self.diff
    }

    /// `|sum_j d_j|`, saturating at `u64::MAX`.
    pub fn msd(&self) -> u64 {
        msd_of(&self.diff)
    }

    pub fn nonzero(&self) -> usize {
        self.diff.iter().filter(|&&d| d != 0).count()
    }
}

pub(crate) fn msd_of(d: &[i64]) -> u64 {
    let s: i128 = d.iter().map(|&v| i128::from(v)).sum();
    u64::try_from(s.unsigned_abs()).unwrap_or(u64::MAX)
}

/// Fitted boundary of the critical error region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalRegionParams {
    /// Slope of the inclined boundary, > 1.
    pub a: f64,
    /// Magnitude of the inclined boundary's intercept.
    pub b: f64,
    pub theta_freq: u32,
}

impl CriticalRegionParams {
    pub fn new(a: f64, b: f64, theta_freq: u32) -> Result<Self> {
        let p = Self { a, b, theta_freq };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(Error::InvalidConfig(format!("slope a must exceed 1, got {}", self.a)));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidConfig(format!("intercept b must be finite, got {}", self.b)));
        }
        Ok(())
    }

    pub fn theta_mag(&self, msd: u64) -> f64 {
        theta_mag(msd, self)
    }

    /// Whether a set of element-level errors lies inside the critical region:
    /// more than `theta_freq` of them exceed the magnitude threshold implied by
    /// their combined deviation.
    pub fn is_critical<I: IntoIterator<Item = i64>>(&self, deltas: I) -> bool {
        let deltas: Vec<i64> = deltas.into_iter().filter(|&d| d != 0).collect();
        let t = theta_mag(msd_of(&deltas), self);
        let significant = deltas
            .iter()
            .filter(|&&d| (d.unsigned_abs() as f64).log2() > t)
            .count();
        significant > self.theta_freq as usize
    }

    pub fn events_critical(&self, events: &EventLog) -> bool {
        self.is_critical(events.iter().map(|e| e.delta()))
    }

    pub fn to_json(&self, provenance: &str) -> Result<String> {
        let doc = ParamsDocument {
            a: self.a,
            b: self.b,
            theta_freq: self.theta_freq,
            provenance: provenance.to_string(),
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Parses a params document, returning the parameters and provenance note.
    pub fn from_json(s: &str) -> Result<(Self, String)> {
        let doc: ParamsDocument = serde_json::from_str(s)?;
        let p = Self::new(doc.a, doc.b, doc.theta_freq)?;
        Ok((p, doc.provenance))
    }

    pub fn save(&self, path: impl AsRef<Path>, provenance: &str) -> Result<()> {
        std::fs::write(path, self.to_json(provenance)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDocument {
    a: f64,
    b: f64,
    theta_freq: u32,
    #[serde(default)]
    provenance: String,
}

/// `b - (a - 1) log2(msd)`, or `+inf` when `msd == 0`.
pub fn theta_mag(msd: u64, p: &CriticalRegionParams) -> f64 {
    if msd == 0 {
        f64::INFINITY
    } else {
        p.b - (p.a - 1.0) * (msd as f64).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pass,
    Recover,
}

impl Decision {
    pub fn is_recover(self) -> bool {
        self == Decision::Recover
    }

    fn from_bool(recover: bool) -> Self {
        if recover {
            Decision::Recover
        } else {
            Decision::Pass
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    None,
    Dmr,
    Classical,
    Msd,
    Statistical,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::None,
        DetectorKind::Dmr,
        DetectorKind::Classical,
        DetectorKind::Msd,
        DetectorKind::Statistical,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::None => "none",
            DetectorKind::Dmr => "dmr",
            DetectorKind::Classical => "classical",
            DetectorKind::Msd => "msd",
            DetectorKind::Statistical => "statistical",
        }
    }

    /// Whether the detector reads the checksum hardware (and pays its overhead).
    pub fn uses_checksums(self) -> bool {
        matches!(
            self,
            DetectorKind::Classical | DetectorKind::Msd | DetectorKind::Statistical
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown detector {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub msd: u64,
    /// Threshold on `log2 |d_j|` the detector applied; `-inf` for detectors
    /// that count every nonzero difference, `+inf` when nothing can count.
    pub theta_mag: f64,
    pub freq_eff: usize,
    pub decision: Decision,
    pub detector: DetectorKind,
}

impl DetectionVerdict {
    pub fn recover(&self) -> bool {
        self.decision.is_recover()
    }
}

/// Exact checksum comparison: any nonzero difference triggers recovery.
pub fn detect_classical(cs: &ChecksumPair) -> DetectionVerdict {
    let freq = cs.nonzero();
    DetectionVerdict {
        msd: cs.msd(),
        theta_mag: f64::NEG_INFINITY,
        freq_eff: freq,
        decision: Decision::from_bool(freq > 0),
        detector: DetectorKind::Classical,
    }
}

/// Recovers when the matrix sum deviation strictly exceeds `threshold`.
pub fn detect_msd(cs: &ChecksumPair, threshold: u64) -> DetectionVerdict {
    let msd = cs.msd();
    DetectionVerdict {
        msd,
        theta_mag: f64::NEG_INFINITY,
        freq_eff: cs.nonzero(),
        decision: Decision::from_bool(msd > threshold),
        detector: DetectorKind::Msd,
    }
}

/// Recovers when more than `theta_freq` differences exceed `theta_mag(MSD)`.
pub fn detect_statistical(cs: &ChecksumPair, p: &CriticalRegionParams) -> DetectionVerdict {
    let msd = cs.msd();
    let t = theta_mag(msd, p);
    let freq_eff = cs
        .diff()
        .iter()
        .filter(|&&d| d != 0 && (d.unsigned_abs() as f64).log2() > t)
        .count();
    DetectionVerdict {
        msd,
        theta_mag: t,
        freq_eff,
        decision: Decision::from_bool(freq_eff > p.theta_freq as usize),
        detector: DetectorKind::Statistical,
    }
}

/// Dual modular redundancy: compares the primary output against a shadow
/// copy element by element.
pub fn detect_dmr(primary: &AccumMatrix, shadow: &AccumMatrix) -> DetectionVerdict {
    let mismatches = primary
        .data()
        .iter()
        .zip(shadow.data())
        .filter(|(a, b)| a != b)
        .count();
    DetectionVerdict {
        msd: 0,
        theta_mag: f64::NEG_INFINITY,
        freq_eff: mismatches,
        decision: Decision::from_bool(mismatches > 0 || primary.data().len() != shadow.data().len()),
        detector: DetectorKind::Dmr,
    }
}

/// A configured detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detector {
    None,
    Dmr,
    Classical,
    Msd { threshold: u64 },
    Statistical(CriticalRegionParams),
}

impl Detector {
    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::None => DetectorKind::None,
            Detector::Dmr => DetectorKind::Dmr,
            Detector::Classical => DetectorKind::Classical,
            Detector::Msd { .. } => DetectorKind::Msd,
            Detector::Statistical(_) => DetectorKind::Statistical,
        }
    }

    /// Verdict for a checksum pair. DMR has no checksum view; it is judged
    /// from the ground-truth event log (any corrupted element is a mismatch).
    pub fn evaluate(&self, cs: &ChecksumPair, events: &EventLog) -> DetectionVerdict {
        match self {
            Detector::None => DetectionVerdict {
                msd: cs.msd(),
                theta_mag: f64::INFINITY,
                freq_eff: 0,
                decision: Decision::Pass,
                detector: DetectorKind::None,
            },
            Detector::Dmr => DetectionVerdict {
                msd: cs.msd(),
                theta_mag: f64::NEG_INFINITY,
                freq_eff: events.len(),
                decision: Decision::from_bool(!events.is_empty()),
                detector: DetectorKind::Dmr,
            },
            Detector::Classical => detect_classical(cs),
            Detector::Msd { threshold } => detect_msd(cs, *threshold),
            Detector::Statistical(p) => detect_statistical(cs, p),
        }
    }
}
